//! Synthetic tables with a known number of neighbors for a query tuple.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Cell, Table, DEFAULT_SCALE};
use crate::error::{Error, Result};

/// Default radius of every attribute, in fixed-point units (2.0 at the
/// default scale).
pub const SYNTH_RADIUS: i64 = 2 * DEFAULT_SCALE;

#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub n: usize,
    /// Attribute count including the imputed last column.
    pub m: usize,
    pub neighbor_fraction: f64,
    pub radius: i64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(n: usize, m: usize, neighbor_fraction: f64, seed: u64) -> Self {
        SynthSpec {
            n,
            m,
            neighbor_fraction,
            radius: SYNTH_RADIUS,
            seed,
        }
    }

    /// Number of planted neighbors.
    pub fn planted(&self) -> usize {
        (self.neighbor_fraction * self.n as f64).round() as usize
    }
}

/// Row 0 is the query: zero on every attribute and missing the last one.
/// Exactly [`SynthSpec::planted`] other rows lie within `r/2` of it on every
/// attribute; the rest lie beyond `3r/2` on every attribute, so neighbor
/// status does not depend on bucket boundaries.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<Table> {
    let (n, m, r) = (spec.n, spec.m, spec.radius);
    if m < 2 || n < 1 {
        return Err(Error::InvalidSpec("need at least one row and two attributes".into()));
    }
    if r < 2 || r % 2 != 0 {
        return Err(Error::InvalidSpec(format!("radius {r} must be even and at least 2")));
    }
    let k = spec.planted();
    if !(0.0..=1.0).contains(&spec.neighbor_fraction) || k > n - 1 {
        return Err(Error::InvalidSpec(format!(
            "neighbor fraction {} plants {k} neighbors among {} other rows",
            spec.neighbor_fraction,
            n - 1
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let rf = r as f64;
    let spread = Normal::new(0.0, 2.0 * rf).expect("positive sd");
    let target = Normal::new(5.0 * rf, rf).expect("positive sd");
    let mut planted = vec![false; n];
    for i in index::sample(&mut rng, n - 1, k) {
        planted[i + 1] = true;
    }
    let mut rows = Vec::with_capacity(n);
    let mut query: Vec<Cell> = vec![Some(0); m];
    query[m - 1] = None;
    rows.push(query);
    for &near in &planted[1..] {
        let mut row: Vec<Cell> = (0..m - 1)
            .map(|_| {
                Some(if near {
                    rng.gen_range(-r / 2..=r / 2)
                } else {
                    let mag = 3 * r / 2 + 1 + spread.sample(&mut rng).abs().round() as i64;
                    if rng.gen() {
                        mag
                    } else {
                        -mag
                    }
                })
            })
            .collect();
        row.push(Some(target.sample(&mut rng).round() as i64));
        rows.push(row);
    }
    let mut names: Vec<String> = (0..m - 1).map(|j| format!("x{j}")).collect();
    names.push("y".into());
    Table::from_rows(names, DEFAULT_SCALE, rows)
}
