//! Per-attribute radius search on a held-out validation fold.
//!
//! Each attribute is tuned on its own with the others held at their
//! starting radii: the radius grows by a step that shrinks after every
//! validation-error increase, and the search stops after `patience`
//! consecutive increases.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::dataset::{AttributeKind, Table};
use crate::error::{Error, Result};
use crate::rnn::{impute_oracle, rmse, ImputeMode, QuantizationScheme};

pub const MIN_RADIUS: i64 = 2;

#[derive(Clone, Debug)]
pub struct RadiusSearchConfig {
    pub init_factor: f64,
    pub decay: f64,
    pub patience: usize,
    /// Initial step as a multiple of the starting radius.
    pub step_factor: f64,
    pub max_iterations: usize,
    pub validation_fraction: f64,
    pub mask_fraction: f64,
    /// Disjoint validation blocks of `validation_fraction` each; the error is
    /// pooled over all of them.
    pub folds: usize,
    /// Before the per-attribute searches, scale every radius by one shared
    /// multiple of its standard deviation, climbing the multiple the same
    /// way. Without it, tables with many attributes tend to start where no
    /// row matches on all of them and the error surface is flat.
    pub joint_stage: bool,
    pub seed: u64,
}

impl Default for RadiusSearchConfig {
    fn default() -> Self {
        RadiusSearchConfig {
            init_factor: 0.35,
            decay: 0.9,
            patience: 3,
            step_factor: 0.25,
            max_iterations: 50,
            validation_fraction: 0.2,
            mask_fraction: 1.0,
            folds: 1,
            joint_stage: true,
            seed: 0,
        }
    }
}

impl RadiusSearchConfig {
    fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::InvalidSpec("decay must lie in (0, 1)".into()));
        }
        if self.patience == 0 || self.max_iterations == 0 || self.folds == 0 {
            return Err(Error::InvalidSpec(
                "patience and max_iterations must be positive".into(),
            ));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidSpec("validation fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RadiusSearchResult {
    pub radii: Vec<i64>,
    /// Attributes left at the minimum radius because their variance is zero.
    pub degenerate: Vec<bool>,
    /// Evaluated `(radius, rmse)` pairs per attribute, in evaluation order.
    pub log: Vec<Vec<(i64, f64)>>,
    /// Evaluated `(multiple of std, rmse)` pairs of the joint stage.
    pub joint_log: Vec<(f64, f64)>,
}

impl RadiusSearchResult {
    pub fn scheme(&self) -> QuantizationScheme {
        QuantizationScheme::new(self.radii.clone()).expect("search yields even radii")
    }
}

/// Rounds to the nearest even integer, never below [`MIN_RADIUS`].
pub fn round_even(x: f64) -> i64 {
    ((x / 2.0).round() as i64 * 2).max(MIN_RADIUS)
}

/// Starting radii: `init_factor` standard deviations, rounded to even.
/// Categorical attributes get the minimum radius, which only matches equal
/// codes.
pub fn initial_radii(t: &Table, init_factor: f64) -> (Vec<i64>, Vec<bool>) {
    (0..t.m())
        .map(|j| {
            let std = t.column_std(j);
            if t.kind(j) == AttributeKind::Categorical {
                (MIN_RADIUS, false)
            } else if std == 0.0 {
                (MIN_RADIUS, true)
            } else {
                (round_even(init_factor * std), false)
            }
        })
        .unzip()
}

struct Fold {
    fit: Table,
    queries: Vec<(Vec<crate::dataset::Cell>, f64)>,
    fallback: i64,
}

struct Validation<'a> {
    folds: Vec<Fold>,
    table: &'a Table,
    beta: usize,
}

impl Validation<'_> {
    /// RMSE pooled over the queries of every fold.
    fn rmse(&self, radii: &[i64]) -> f64 {
        let s = QuantizationScheme::new(radii.to_vec()).expect("even radii");
        let (truth, pred): (Vec<f64>, Vec<f64>) = self
            .folds
            .iter()
            .flat_map(|f| {
                f.queries.iter().map(|(q, y)| {
                    let v = impute_oracle(&f.fit, q, self.beta, &s, ImputeMode::Mean).unwrap_or(f.fallback);
                    (*y, self.table.unscale(v))
                })
            })
            .unzip();
        rmse(&truth, &pred).expect("non-empty validation set")
    }
}

pub fn search_radii(train: &Table, beta: usize, cfg: &RadiusSearchConfig) -> Result<RadiusSearchResult> {
    cfg.validate()?;
    if beta >= train.m() {
        return Err(Error::InvalidSpec("query attribute out of range".into()));
    }
    let mut rows: Vec<usize> = (0..train.n()).filter(|&i| train.get(i, beta).is_some()).collect();
    if rows.len() < 10 {
        return Err(Error::InvalidSpec(format!(
            "radius search needs at least 10 rows with the query attribute, found {}",
            rows.len()
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rows.shuffle(&mut rng);
    let n_val = ((cfg.validation_fraction * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
    let mut folds = Vec::with_capacity(cfg.folds);
    for k in 0..cfg.folds {
        // Fold k validates on the k-th block of n_val shuffled rows.
        let lo = (k * n_val).min(rows.len() - n_val);
        let val_rows = &rows[lo..lo + n_val];
        let fit_rows: Vec<usize> = rows[..lo].iter().chain(&rows[lo + n_val..]).copied().collect();
        let mut masked: Vec<usize> = val_rows
            .iter()
            .copied()
            .filter(|_| rng.gen::<f64>() < cfg.mask_fraction)
            .collect();
        if masked.is_empty() {
            masked.push(val_rows[rng.gen_range(0..val_rows.len())]);
        }
        let fit = train.select_rows(&fit_rows);
        let queries = masked
            .iter()
            .map(|&i| {
                let mut q = train.row(i).to_vec();
                let y = train.unscale(q[beta].take().expect("validation rows carry beta"));
                (q, y)
            })
            .collect();
        folds.push(Fold {
            fallback: fit.column_mean(beta).expect("fit rows carry beta"),
            fit,
            queries,
        });
    }
    let val = Validation {
        folds,
        table: train,
        beta,
    };

    let (mut init, degenerate) = initial_radii(train, cfg.init_factor);
    let tuned = |j: usize| j != beta && !degenerate[j] && train.kind(j) == AttributeKind::Numerical;
    let mut joint_log = Vec::new();
    if cfg.joint_stage {
        let at = |f: f64| -> Vec<i64> {
            (0..train.m())
                .map(|j| {
                    if tuned(j) {
                        round_even(f * train.column_std(j))
                    } else {
                        init[j]
                    }
                })
                .collect()
        };
        climb(
            cfg,
            cfg.init_factor,
            cfg.step_factor * cfg.init_factor,
            &mut joint_log,
            |f| val.rmse(&at(f)),
        );
        init = at(argmin(&joint_log));
    }
    let mut radii = init.clone();
    let mut log = vec![Vec::new(); train.m()];
    for j in 0..train.m() {
        if !tuned(j) {
            continue;
        }
        let mut trial = init.clone();
        let mut r = init[j];
        let mut prev = val.rmse(&trial);
        log[j].push((r, prev));
        let mut step = cfg.step_factor * r as f64;
        let mut declines = 0;
        while log[j].len() < cfg.max_iterations && declines < cfg.patience {
            r += round_even(step);
            trial[j] = r;
            let e = val.rmse(&trial);
            log[j].push((r, e));
            if e > prev {
                declines += 1;
                step *= cfg.decay;
            } else {
                declines = 0;
            }
            prev = e;
        }
        let mut best = log[j][0];
        for &(r, e) in &log[j][1..] {
            if e < best.1 {
                best = (r, e);
            }
        }
        radii[j] = best.0;
    }
    Ok(RadiusSearchResult {
        radii,
        degenerate,
        log,
        joint_log,
    })
}

/// Hill-climbs `x` upward from `start`, shrinking the step by `decay` after
/// every increase in error and stopping after `patience` increases in a row.
fn climb(
    cfg: &RadiusSearchConfig,
    start: f64,
    mut step: f64,
    log: &mut Vec<(f64, f64)>,
    mut eval: impl FnMut(f64) -> f64,
) {
    let mut x = start;
    let mut prev = eval(x);
    log.push((x, prev));
    let mut declines = 0;
    while log.len() < cfg.max_iterations && declines < cfg.patience {
        x += step;
        let e = eval(x);
        log.push((x, e));
        if e > prev {
            declines += 1;
            step *= cfg.decay;
        } else {
            declines = 0;
        }
        prev = e;
    }
}

/// First point of lowest error.
fn argmin(log: &[(f64, f64)]) -> f64 {
    let mut best = log[0];
    for &p in &log[1..] {
        if p.1 < best.1 {
            best = p;
        }
    }
    best.0
}

/// Writes `attribute,radius[,lower,upper]` rows in decimal units.
pub fn write_radii<W: Write>(t: &Table, radii: &[i64], bounds: Option<&[Option<(i64, i64)>]>, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["attribute", "radius", "lower", "upper"])?;
    for (j, &r) in radii.iter().enumerate() {
        let (lo, hi) = match bounds.and_then(|b| b[j]) {
            Some((lo, hi)) => (format!("{}", t.unscale(lo)), format!("{}", t.unscale(hi))),
            None => (String::new(), String::new()),
        };
        out.write_record([t.names()[j].clone(), format!("{}", t.unscale(r)), lo, hi])?;
    }
    out.flush()?;
    Ok(())
}

/// Public per-attribute parameters read from a radii file.
#[derive(Clone, Debug)]
pub struct RadiiFile {
    pub scheme: QuantizationScheme,
    pub bounds: Vec<Option<(i64, i64)>>,
}

/// Reads a radii file written by [`write_radii`], matching attributes by name.
/// Rows for attributes outside `names` are skipped, so one file can serve
/// both sides of a vertical split.
pub fn read_radii<R: Read>(names: &[String], scale: i64, r: R) -> Result<RadiiFile> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut radii = vec![None; names.len()];
    let mut bounds = vec![None; names.len()];
    let to_fixed = |s: &str| -> Result<i64> {
        s.parse::<f64>()
            .map(|x| (x * scale as f64).round() as i64)
            .map_err(|_| Error::Config(format!("bad number {s:?} in radii file")))
    };
    for rec in rdr.records() {
        let rec = rec?;
        let name = rec.get(0).unwrap_or_default();
        let Some(j) = names.iter().position(|n| n == name) else {
            continue;
        };
        let r = to_fixed(rec.get(1).unwrap_or_default())?;
        radii[j] = Some(round_even(r as f64));
        if let (Some(lo), Some(hi)) = (rec.get(2), rec.get(3)) {
            if !lo.is_empty() && !hi.is_empty() {
                bounds[j] = Some((to_fixed(lo)?, to_fixed(hi)?));
            }
        }
    }
    let radii = radii
        .into_iter()
        .enumerate()
        .map(|(j, r)| r.ok_or_else(|| Error::Config(format!("radii file lacks attribute {:?}", names[j]))))
        .collect::<Result<Vec<_>>>()?;
    Ok(RadiiFile {
        scheme: QuantizationScheme::new(radii)?,
        bounds,
    })
}
