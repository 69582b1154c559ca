//! Random desk-scale instances shared by the integration tests.

#![allow(dead_code)]

use privimpute::dataset::{Cell, Table};
use privimpute::proto::{horizontal, vertical, LocalRun, Outcome};
use privimpute::rnn::{impute_oracle, neighbors, ImputeMode, QuantizationScheme};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// A table, radii and a query cell `(alpha, beta)` whose value is missing.
pub struct Instance {
    pub full: Table,
    pub scheme: QuantizationScheme,
    pub alpha: usize,
    pub beta: usize,
    /// Rows held by Bob in the horizontal split, `alpha` among them.
    pub bob_rows: Vec<usize>,
    /// Non-`beta` columns held by Alice in the vertical split.
    pub alice_cols: Vec<usize>,
    pub seed: u64,
}

/// Clustered integer data so that most queries have a handful of neighbors.
/// The value range is kept narrow: a missing query attribute makes Bob
/// program every bucket pair inside the public bounds.
pub fn random_instance(seed: u64, max_n: usize) -> Instance {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = (rng.gen_range(8f64.ln()..=(max_n as f64).ln()).exp().round() as usize).clamp(8, max_n);
    let m = rng.gen_range(2..=10);
    let radii: Vec<i64> = (0..m).map(|_| 2 * rng.gen_range(1..=30)).collect();
    let clusters = 1 + n / 40;
    let centers: Vec<Vec<i64>> = (0..clusters)
        .map(|_| (0..m).map(|_| rng.gen_range(-400..=400)).collect())
        .collect();
    let beta = rng.gen_range(0..m);
    let rows: Vec<Vec<Cell>> = (0..n)
        .map(|_| {
            let c = &centers[rng.gen_range(0..clusters)];
            (0..m)
                .map(|j| {
                    let miss = if j == beta { 0.1 } else { 0.03 };
                    if rng.gen_bool(miss) {
                        None
                    } else {
                        Some(c[j] + rng.gen_range(-radii[j]..=radii[j]))
                    }
                })
                .collect()
        })
        .collect();
    let names = (0..m).map(|j| format!("a{j}")).collect();
    let mut full = Table::from_rows(names, 1, rows).unwrap();
    let alpha = rng.gen_range(0..n);
    full.set(alpha, beta, None);

    let mut bob_rows: Vec<usize> = (0..n).filter(|&i| i == alpha || rng.gen_bool(0.5)).collect();
    if bob_rows.len() == n {
        bob_rows.retain(|&i| i == alpha || i != (alpha + 1) % n);
    }
    let mut cols: Vec<usize> = (0..m).filter(|&j| j != beta).collect();
    cols.shuffle(&mut rng);
    let cut = cols.len().div_ceil(2);
    let mut alice_cols = cols[..cut].to_vec();
    alice_cols.sort_unstable();
    Instance {
        full,
        scheme: QuantizationScheme::new(radii).unwrap(),
        alpha,
        beta,
        bob_rows,
        alice_cols,
        seed,
    }
}

impl Instance {
    pub fn oracle_mean(&self) -> Option<i64> {
        impute_oracle(
            &self.full,
            self.full.row(self.alpha),
            self.beta,
            &self.scheme,
            ImputeMode::Mean,
        )
    }

    /// The multiset of `beta` values over the query's neighbors.
    pub fn neighbor_values(&self) -> Vec<i64> {
        neighbors(&self.full, self.full.row(self.alpha), self.beta, &self.scheme)
            .into_iter()
            .map(|w| self.full.get(w, self.beta).expect("neighbors carry beta"))
            .collect()
    }

    pub fn run_horizontal(&self, variant: horizontal::Variant) -> privimpute::Result<LocalRun<Outcome>> {
        let alice_rows: Vec<usize> = (0..self.full.n())
            .filter(|i| self.bob_rows.binary_search(i).is_err())
            .collect();
        let alice_t = self.full.select_rows(&alice_rows);
        let bob_t = self.full.select_rows(&self.bob_rows);
        let bounds: Vec<Option<(i64, i64)>> = (0..self.full.m()).map(|j| self.full.column_bounds(j)).collect();
        horizontal::run_local(
            &horizontal::AliceInput {
                table: &alice_t,
                scheme: &self.scheme,
            },
            &horizontal::BobInput {
                table: &bob_t,
                query: self.full.row(self.alpha),
                beta: self.beta,
                scheme: &self.scheme,
                bounds: &bounds,
                variant,
                epsilon: 2f64.powi(-40),
                ell_fraction: None,
            },
            self.seed ^ 0x4011,
        )
    }

    pub fn bob_cols(&self) -> Vec<usize> {
        let mut c: Vec<usize> = (0..self.full.m()).filter(|j| !self.alice_cols.contains(j)).collect();
        c.sort_unstable();
        c
    }

    pub fn run_vertical(
        &self,
        variant: vertical::Variant,
        psi: vertical::PsiBackend,
    ) -> privimpute::Result<LocalRun<Outcome>> {
        let bob_cols = self.bob_cols();
        let ta = self.full.select_columns(&self.alice_cols);
        let tb = self.full.select_columns(&bob_cols);
        let sa = self.scheme.select(&self.alice_cols);
        let sb = self.scheme.select(&bob_cols);
        vertical::run_local(
            &vertical::AliceInput {
                table: &ta,
                scheme: &sa,
                padding: vertical::DEFAULT_PADDING,
            },
            &vertical::BobInput {
                table: &tb,
                scheme: &sb,
                alpha: self.alpha,
                beta: bob_cols.iter().position(|&j| j == self.beta).unwrap(),
                variant,
                psi,
                padding: vertical::DEFAULT_PADDING,
            },
            self.seed ^ 0x7e47,
        )
    }
}

/// Whether an outcome is consistent with the oracle: exact for means,
/// membership for samples. Aborts are judged by the caller.
pub fn consistent(out: Outcome, mean: bool, oracle: Option<i64>, values: &[i64]) -> bool {
    match (out, mean) {
        (Outcome::Value(v), true) => oracle == Some(v),
        (Outcome::Value(v), false) => values.contains(&v),
        (Outcome::NoNeighbor, _) => oracle.is_none() && values.is_empty(),
        (Outcome::Aborted, _) => false,
    }
}
