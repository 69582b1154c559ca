//! Tables with missing cells, missingness injection, and the horizontal and
//! vertical splits between Alice and Bob.
//!
//! Every numeric cell is stored as a fixed-point integer: the decimal value
//! multiplied by the table's scale and rounded to the nearest integer.
//! Categorical cells hold `code * scale`, where `code` indexes the column's
//! dictionary, so that unscaling is uniform across column kinds.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// A cell value; `None` is a missing cell.
pub type Cell = Option<i64>;

pub const DEFAULT_SCALE: i64 = 1000;
pub const DEFAULT_WIDTH_BITS: u32 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttributeKind {
    Numerical,
    Categorical,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    names: Vec<String>,
    kinds: Vec<AttributeKind>,
    dictionaries: Vec<Vec<String>>,
    scale: i64,
    cells: Vec<Cell>,
    m: usize,
}

impl Table {
    /// Builds a table of numerical attributes from already-scaled rows.
    pub fn from_rows(names: Vec<String>, scale: i64, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let m = names.len();
        let kinds = vec![AttributeKind::Numerical; m];
        Self::with_kinds(names, kinds, scale, rows)
    }

    pub fn with_kinds(names: Vec<String>, kinds: Vec<AttributeKind>, scale: i64, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let m = names.len();
        if kinds.len() != m {
            return Err(Error::InvalidSpec("kinds and names differ in length".into()));
        }
        if scale < 1 {
            return Err(Error::InvalidSpec("scale must be positive".into()));
        }
        let mut cells = Vec::with_capacity(rows.len() * m);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(Error::Parse {
                    row: i,
                    column: row.len(),
                    message: format!("expected {m} cells"),
                });
            }
            cells.extend(row);
        }
        Ok(Table {
            names,
            kinds,
            dictionaries: vec![Vec::new(); m],
            scale,
            cells,
            m,
        })
    }

    pub fn n(&self) -> usize {
        self.cells.len().checked_div(self.m).unwrap_or(0)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[AttributeKind] {
        &self.kinds
    }

    pub fn kind(&self, j: usize) -> AttributeKind {
        self.kinds[j]
    }

    pub fn dictionary(&self, j: usize) -> &[String] {
        &self.dictionaries[j]
    }

    pub fn get(&self, i: usize, j: usize) -> Cell {
        self.cells[i * self.m + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Cell) {
        self.cells[i * self.m + j] = value;
    }

    pub fn row(&self, i: usize) -> &[Cell] {
        &self.cells[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Cell]> {
        self.cells.chunks(self.m.max(1))
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = Cell> + '_ {
        (0..self.n()).map(move |i| self.get(i, j))
    }

    pub fn present(&self, j: usize) -> Vec<i64> {
        self.column(j).flatten().collect()
    }

    pub fn unscale(&self, v: i64) -> f64 {
        v as f64 / self.scale as f64
    }

    /// Mean of the present cells of column `j`, rounded half away from zero.
    pub fn column_mean(&self, j: usize) -> Option<i64> {
        let vals = self.present(j);
        if vals.is_empty() {
            return None;
        }
        let sum: i128 = vals.iter().map(|&v| v as i128).sum();
        Some(div_round_half_away(sum, vals.len() as i128) as i64)
    }

    /// Population standard deviation of the present cells, in scaled units.
    pub fn column_std(&self, j: usize) -> f64 {
        let vals = self.present(j);
        if vals.len() < 2 {
            return 0.0;
        }
        let n = vals.len() as f64;
        let mean = vals.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = vals.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        var.sqrt()
    }

    pub fn column_bounds(&self, j: usize) -> Option<(i64, i64)> {
        let vals = self.present(j);
        let lo = *vals.iter().min()?;
        let hi = *vals.iter().max()?;
        Some((lo, hi))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Table {
        let mut cells = Vec::with_capacity(rows.len() * self.m);
        for &i in rows {
            cells.extend_from_slice(self.row(i));
        }
        Table {
            cells,
            ..self.clone_meta()
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Table {
        let mut cells = Vec::with_capacity(self.n() * cols.len());
        for i in 0..self.n() {
            cells.extend(cols.iter().map(|&j| self.get(i, j)));
        }
        Table {
            names: cols.iter().map(|&j| self.names[j].clone()).collect(),
            kinds: cols.iter().map(|&j| self.kinds[j]).collect(),
            dictionaries: cols.iter().map(|&j| self.dictionaries[j].clone()).collect(),
            scale: self.scale,
            cells,
            m: cols.len(),
        }
    }

    fn clone_meta(&self) -> Table {
        Table {
            names: self.names.clone(),
            kinds: self.kinds.clone(),
            dictionaries: self.dictionaries.clone(),
            scale: self.scale,
            cells: Vec::new(),
            m: self.m,
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn format_cell(&self, j: usize, v: i64) -> String {
        match self.kinds[j] {
            AttributeKind::Categorical => {
                let code = (v / self.scale) as usize;
                self.dictionaries[j]
                    .get(code)
                    .cloned()
                    .unwrap_or_else(|| code.to_string())
            }
            AttributeKind::Numerical => format!("{}", self.unscale(v)),
        }
    }

    /// Writes the table as comma-separated text with a header row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.names)?;
        for i in 0..self.n() {
            let rec: Vec<String> = (0..self.m)
                .map(|j| match self.get(i, j) {
                    Some(v) => self.format_cell(j, v),
                    None => String::new(),
                })
                .collect();
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Integer division rounding to nearest, ties away from zero.
pub fn div_round_half_away(num: i128, den: i128) -> i128 {
    assert!(den > 0, "denominator must be positive");
    let q = (2 * num.abs() + den) / (2 * den);
    if num < 0 {
        -q
    } else {
        q
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LoadOptions {
    pub scale: i64,
    pub width_bits: u32,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            scale: DEFAULT_SCALE,
            width_bits: DEFAULT_WIDTH_BITS,
        }
    }
}

pub fn load_table(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Table> {
    let file = std::fs::File::open(path)?;
    parse_table(file, opts)
}

/// Parses header-row comma-separated text. Empty cells are missing; any
/// column with a non-numeric cell is treated as categorical and
/// dictionary-encoded in order of first appearance.
pub fn parse_table<R: Read>(reader: R, opts: &LoadOptions) -> Result<Table> {
    if opts.scale < 1 {
        return Err(Error::InvalidSpec("scale must be positive".into()));
    }
    if !(2..=63).contains(&opts.width_bits) {
        return Err(Error::InvalidSpec("width must be in 2..=63 bits".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = match rdr.headers() {
        Ok(h) => h.iter().map(str::to_string).collect(),
        Err(_) => return Err(Error::NoRows),
    };
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::NoRows);
    }
    let m = names.len();
    let mut raw: Vec<Vec<String>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: i + 1,
            column: 0,
            message: e.to_string(),
        })?;
        if rec.len() != m {
            return Err(Error::Parse {
                row: i + 1,
                column: rec.len(),
                message: format!("expected {m} fields, found {}", rec.len()),
            });
        }
        raw.push(rec.iter().map(str::to_string).collect());
    }
    if raw.is_empty() {
        return Err(Error::NoRows);
    }

    let kinds: Vec<AttributeKind> = (0..m)
        .map(|j| {
            let numeric = raw.iter().all(|r| r[j].is_empty() || r[j].parse::<f64>().is_ok());
            if numeric {
                AttributeKind::Numerical
            } else {
                AttributeKind::Categorical
            }
        })
        .collect();

    let lo = -(1i64 << (opts.width_bits - 1));
    let hi = (1i64 << (opts.width_bits - 1)) - 1;
    let mut dictionaries: Vec<Vec<String>> = vec![Vec::new(); m];
    let mut lookup: Vec<HashMap<String, usize>> = vec![HashMap::new(); m];
    let mut cells = Vec::with_capacity(raw.len() * m);
    for (i, r) in raw.iter().enumerate() {
        for j in 0..m {
            let s = &r[j];
            if s.is_empty() {
                cells.push(None);
                continue;
            }
            let v = match kinds[j] {
                AttributeKind::Numerical => {
                    let x: f64 = s.parse().map_err(|_| Error::Parse {
                        row: i + 1,
                        column: j,
                        message: format!("not a number: {s:?}"),
                    })?;
                    let scaled = (x * opts.scale as f64).round();
                    if !scaled.is_finite() || scaled < lo as f64 || scaled > hi as f64 {
                        return Err(Error::Overflow {
                            column: j,
                            value: s.clone(),
                            bits: opts.width_bits,
                        });
                    }
                    scaled as i64
                }
                AttributeKind::Categorical => {
                    let next = dictionaries[j].len();
                    let code = *lookup[j].entry(s.clone()).or_insert_with(|| {
                        dictionaries[j].push(s.clone());
                        next
                    });
                    code as i64 * opts.scale
                }
            };
            cells.push(Some(v));
        }
    }
    Ok(Table {
        names,
        kinds,
        dictionaries,
        scale: opts.scale,
        cells,
        m,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pattern {
    Mcar,
    Mar,
    Mnar,
}

impl std::str::FromStr for Pattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcar" => Ok(Pattern::Mcar),
            "mar" => Ok(Pattern::Mar),
            "mnar" => Ok(Pattern::Mnar),
            _ => Err(Error::InvalidSpec(format!("unknown pattern {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MissingnessSpec {
    pub pattern: Pattern,
    pub fraction: f64,
    pub target: usize,
    /// Percentile window for MAR/MNAR. Drawn from the seed when absent.
    pub percentile_bounds: Option<(f64, f64)>,
    /// Column whose values drive MAR drops. Drawn from the seed when absent.
    pub driver: Option<usize>,
    pub seed: u64,
}

impl MissingnessSpec {
    pub fn new(pattern: Pattern, target: usize, seed: u64) -> Self {
        MissingnessSpec {
            pattern,
            fraction: 0.10,
            target,
            percentile_bounds: None,
            driver: None,
            seed,
        }
    }

    fn validate(&self, t: &Table) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::InvalidSpec("fraction must lie in (0, 1]".into()));
        }
        if self.target >= t.m() {
            return Err(Error::InvalidSpec("target column out of range".into()));
        }
        if let Some((lo, hi)) = self.percentile_bounds {
            if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo >= hi {
                return Err(Error::InvalidSpec(
                    "percentile bounds must satisfy 0 <= lower < upper <= 100".into(),
                ));
            }
        }
        if let Some(d) = self.driver {
            if d >= t.m() || d == self.target {
                return Err(Error::InvalidSpec("driver column must differ from the target".into()));
            }
        }
        Ok(())
    }
}

/// Nearest-rank percentile over sorted values.
fn percentile_value(sorted: &[i64], p: f64) -> i64 {
    let idx = ((p / 100.0) * sorted.len() as f64).floor() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Drops cells of the target column and returns the corrupted table plus the
/// dropped `(row, original value)` pairs.
pub fn inject_missing(t: &Table, spec: &MissingnessSpec) -> Result<(Table, Vec<(usize, i64)>)> {
    spec.validate(t)?;
    let present: Vec<usize> = (0..t.n()).filter(|&i| t.get(i, spec.target).is_some()).collect();
    if present.is_empty() {
        return Err(Error::InvalidSpec("target column has no present values".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut dropped: Vec<usize> = match spec.pattern {
        Pattern::Mcar => present
            .iter()
            .copied()
            .filter(|_| rng.gen::<f64>() < spec.fraction)
            .collect(),
        Pattern::Mar | Pattern::Mnar => {
            let keyed = match spec.pattern {
                Pattern::Mnar => spec.target,
                _ => match spec.driver {
                    Some(d) => d,
                    None => {
                        let others: Vec<usize> = (0..t.m())
                            .filter(|&j| j != spec.target && !t.present(j).is_empty())
                            .collect();
                        *others
                            .choose(&mut rng)
                            .ok_or_else(|| Error::InvalidSpec("no driver column available".into()))?
                    }
                },
            };
            let (plo, phi) = match spec.percentile_bounds {
                Some(b) => b,
                None => {
                    let a: f64 = rng.gen_range(0.0..=100.0);
                    let b: f64 = rng.gen_range(0.0..=100.0);
                    (a.min(b), a.max(b))
                }
            };
            let mut keys: Vec<i64> = present.iter().filter_map(|&i| t.get(i, keyed)).collect();
            if keys.is_empty() {
                return Err(Error::EmptyInterval);
            }
            keys.sort_unstable();
            let lo = percentile_value(&keys, plo);
            let hi = percentile_value(&keys, phi);
            let mut candidates: Vec<usize> = present
                .iter()
                .copied()
                .filter(|&i| match t.get(i, keyed) {
                    Some(v) => v >= lo && (phi >= 100.0 || v < hi),
                    None => false,
                })
                .collect();
            if candidates.is_empty() {
                return Err(Error::EmptyInterval);
            }
            let want = (spec.fraction * present.len() as f64).round().max(1.0) as usize;
            if candidates.len() > want {
                candidates.shuffle(&mut rng);
                candidates.truncate(want);
                candidates.sort_unstable();
            }
            candidates
        }
    };
    dropped.sort_unstable();
    let mut out = t.clone();
    let truth = dropped
        .iter()
        .map(|&i| {
            let v = t.get(i, spec.target).expect("candidate rows are present");
            out.set(i, spec.target, None);
            (i, v)
        })
        .collect();
    Ok((out, truth))
}

pub fn write_ground_truth<W: Write>(t: &Table, truth: &[(usize, i64)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["row_index", "value"])?;
    for &(i, v) in truth {
        out.write_record([i.to_string(), format!("{}", t.unscale(v))])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub enum SplitSpec {
    /// Seeded row shuffle, then the first `round(alice_fraction * n)` rows go
    /// to Alice.
    Horizontal { alice_fraction: f64, seed: u64 },
    /// Columns `0..alice_columns` go to Alice, the rest to Bob; the imputed
    /// attribute `beta` must be on Bob's side.
    Vertical { alice_columns: usize, beta: usize },
}

/// One party's share of a split table, with the global row and column ids of
/// its cells. Row ids double as the common identifier in vertical splits.
#[derive(Clone, Debug)]
pub struct PartyView {
    pub table: Table,
    pub rows: Vec<usize>,
    pub columns: Vec<usize>,
}

pub fn split(t: &Table, spec: &SplitSpec) -> Result<(PartyView, PartyView)> {
    let all_cols: Vec<usize> = (0..t.m()).collect();
    let all_rows: Vec<usize> = (0..t.n()).collect();
    match *spec {
        SplitSpec::Horizontal { alice_fraction, seed } => {
            let n = t.n();
            let n_a = (alice_fraction * n as f64).round() as usize;
            if n < 2 || n_a == 0 || n_a >= n {
                return Err(Error::InvalidSpec(format!(
                    "horizontal split of {n} rows gives Alice {n_a}; need 0 < n_A < n"
                )));
            }
            let mut order = all_rows;
            order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
            let (a, b) = order.split_at(n_a);
            Ok((
                PartyView {
                    table: t.select_rows(a),
                    rows: a.to_vec(),
                    columns: all_cols.clone(),
                },
                PartyView {
                    table: t.select_rows(b),
                    rows: b.to_vec(),
                    columns: all_cols,
                },
            ))
        }
        SplitSpec::Vertical { alice_columns, beta } => {
            let m = t.m();
            if alice_columns == 0 || alice_columns >= m {
                return Err(Error::InvalidSpec(format!(
                    "vertical cut {alice_columns} must lie strictly between 0 and {m}"
                )));
            }
            if beta < alice_columns || beta >= m {
                return Err(Error::InvalidSpec(format!(
                    "imputed attribute {beta} must be on Bob's side (columns {alice_columns}..{m})"
                )));
            }
            let (a, b) = all_cols.split_at(alice_columns);
            Ok((
                PartyView {
                    table: t.select_columns(a),
                    rows: all_rows.clone(),
                    columns: a.to_vec(),
                },
                PartyView {
                    table: t.select_columns(b),
                    rows: all_rows,
                    columns: b.to_vec(),
                },
            ))
        }
    }
}

/// Rebuilds the full table from two views produced by [`split`].
pub fn reassemble(template: &Table, views: &[&PartyView]) -> Table {
    let mut out = template.clone();
    for i in 0..out.n() {
        for j in 0..out.m() {
            out.set(i, j, None);
        }
    }
    for v in views {
        for (li, &gi) in v.rows.iter().enumerate() {
            for (lj, &gj) in v.columns.iter().enumerate() {
                out.set(gi, gj, v.table.get(li, lj));
            }
        }
    }
    out
}

/// Small public datasets shipped with the crate: name, default imputed
/// attribute, CSV text.
pub const BUNDLED: [(&str, &str, &str); 3] = [
    ("iris", "petal_width", include_str!("../data/iris.csv")),
    ("wine", "flavanoids", include_str!("../data/wine.csv")),
    ("diabetes", "bmi", include_str!("../data/diabetes.csv")),
];

/// Loads a bundled dataset and the index of its default imputed attribute.
pub fn load_bundled(name: &str, opts: &LoadOptions) -> Result<(Table, usize)> {
    let (_, target, text) = BUNDLED
        .iter()
        .find(|b| b.0 == name)
        .ok_or_else(|| Error::InvalidSpec(format!("no bundled dataset named {name:?}")))?;
    let t = parse_table(text.as_bytes(), opts)?;
    let beta = t.column_index(target).expect("bundled target exists");
    Ok((t, beta))
}
