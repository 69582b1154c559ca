//! Dual quantization, the quantized neighbor relation, and the cleartext
//! imputation oracles every protocol is checked against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::dataset::{div_round_half_away, Cell, Table};
use crate::error::{Error, Result};

/// Primary and half-offset bucket of `x` for radius `r`.
///
/// Primary buckets are `[k*r, (k+1)*r - 1]`; offset buckets are shifted down by
/// `r/2`, so bucket 0 of the offset grid is `[-r/2, r/2 - 1]`.
pub fn quantize(x: i64, r: i64) -> (i64, i64) {
    debug_assert!(r >= 2 && r % 2 == 0);
    let q1 = x.div_euclid(r);
    let q2 = (x as i128 + (r / 2) as i128).div_euclid(r as i128) as i64;
    (q1, q2)
}

/// The neighboring bucket on the side of each grid nearer to `x`; an exact
/// midpoint goes to the lower bucket.
pub fn adjacent_buckets(x: i64, r: i64) -> (i64, i64) {
    let (q1, q2) = quantize(x, r);
    let side = |k: i64, lower_edge: i128| {
        let x = x as i128;
        let to_lower = x - lower_edge;
        let to_upper = lower_edge + r as i128 - 1 - x;
        if to_lower <= to_upper {
            k - 1
        } else {
            k + 1
        }
    };
    let a1 = side(q1, q1 as i128 * r as i128);
    let a2 = side(q2, q2 as i128 * r as i128 - (r / 2) as i128);
    (a1, a2)
}

pub fn quantized_match(a: i64, b: i64, r: i64) -> bool {
    let (a1, a2) = quantize(a, r);
    let (b1, b2) = quantize(b, r);
    a1 == b1 || a2 == b2
}

/// Per-attribute radii in fixed-point units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizationScheme {
    radii: Vec<i64>,
}

impl QuantizationScheme {
    pub fn new(radii: Vec<i64>) -> Result<Self> {
        if let Some((j, r)) = radii.iter().enumerate().find(|(_, &r)| r < 2 || r % 2 != 0) {
            return Err(Error::InvalidSpec(format!(
                "radius {r} of attribute {j} must be even and at least 2"
            )));
        }
        Ok(QuantizationScheme { radii })
    }

    pub fn uniform(m: usize, r: i64) -> Result<Self> {
        Self::new(vec![r; m])
    }

    pub fn radii(&self) -> &[i64] {
        &self.radii
    }

    pub fn radius(&self, j: usize) -> i64 {
        self.radii[j]
    }

    pub fn m(&self) -> usize {
        self.radii.len()
    }

    pub fn quantize(&self, x: i64, j: usize) -> (i64, i64) {
        quantize(x, self.radii[j])
    }

    pub fn adjacent(&self, x: i64, j: usize) -> (i64, i64) {
        adjacent_buckets(x, self.radii[j])
    }

    pub fn matches(&self, a: i64, b: i64, j: usize) -> bool {
        quantized_match(a, b, self.radii[j])
    }

    /// Restricts the scheme to the given global attribute ids.
    pub fn select(&self, columns: &[usize]) -> QuantizationScheme {
        QuantizationScheme {
            radii: columns.iter().map(|&j| self.radii[j]).collect(),
        }
    }
}

/// The modified neighbor relation: `t_omega` must carry a value at `beta`,
/// and every other attribute must be missing on either side or match.
pub fn is_neighbor(t_alpha: &[Cell], t_omega: &[Cell], beta: usize, s: &QuantizationScheme) -> bool {
    if t_omega[beta].is_none() {
        return false;
    }
    attributes_match(t_alpha, t_omega, Some(beta), s)
}

/// Conjunction of the per-attribute tests over every attribute except `skip`.
pub fn attributes_match(t_alpha: &[Cell], t_omega: &[Cell], skip: Option<usize>, s: &QuantizationScheme) -> bool {
    t_alpha
        .iter()
        .zip(t_omega)
        .enumerate()
        .filter(|&(j, _)| Some(j) != skip)
        .all(|(j, (a, b))| match (a, b) {
            (Some(a), Some(b)) => s.matches(*a, *b, j),
            _ => true,
        })
}

/// Rows of `table` that neighbor `t_alpha` for imputing attribute `beta`.
pub fn neighbors(table: &Table, t_alpha: &[Cell], beta: usize, s: &QuantizationScheme) -> Vec<usize> {
    (0..table.n())
        .filter(|&i| is_neighbor(t_alpha, table.row(i), beta, s))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImputeMode {
    Mean,
    Random { seed: u64 },
}

/// Mean of fixed-point values, rounded to nearest with ties away from zero.
pub fn fixed_mean(values: &[i64]) -> Option<i64> {
    if values.is_empty() {
        return None;
    }
    let sum: i128 = values.iter().map(|&v| v as i128).sum();
    Some(div_round_half_away(sum, values.len() as i128) as i64)
}

/// Imputes `beta` for `t_alpha` from the neighbors in `table`. `None` means
/// no neighbor exists.
pub fn impute_oracle(
    table: &Table,
    t_alpha: &[Cell],
    beta: usize,
    s: &QuantizationScheme,
    mode: ImputeMode,
) -> Option<i64> {
    let rows = neighbors(table, t_alpha, beta, s);
    let mut vals: Vec<(i64, usize)> = rows
        .iter()
        .map(|&i| (table.get(i, beta).expect("neighbors carry beta"), i))
        .collect();
    match mode {
        ImputeMode::Mean => fixed_mean(&vals.iter().map(|v| v.0).collect::<Vec<_>>()),
        ImputeMode::Random { seed } => {
            if vals.is_empty() {
                return None;
            }
            vals.sort_unstable();
            let k = ChaCha20Rng::seed_from_u64(seed).gen_range(0..vals.len());
            Some(vals[k].0)
        }
    }
}

/// Per-attribute population standard deviations, in fixed-point units.
pub fn column_stds(table: &Table) -> Vec<f64> {
    (0..table.m()).map(|j| table.column_std(j)).collect()
}

/// Mean of `beta` over the `k` rows closest to `t_alpha`. Distances are
/// Euclidean over mutually present attributes, each divided by the
/// attribute's standard deviation, and rescaled by the fraction of usable
/// attributes. Ties go to the lower row index.
pub fn knn_impute(table: &Table, t_alpha: &[Cell], beta: usize, k: usize, stds: &[f64]) -> Result<i64> {
    if k == 0 {
        return Err(Error::InvalidSpec("k must be at least 1".into()));
    }
    let others = (0..table.m()).filter(|&j| j != beta && stds[j] > 0.0).count().max(1);
    let mut scored: Vec<(f64, usize, i64)> = Vec::new();
    for i in 0..table.n() {
        let row = table.row(i);
        let Some(y) = row[beta] else { continue };
        let mut d2 = 0.0;
        let mut used = 0usize;
        for j in 0..table.m() {
            if j == beta || stds[j] <= 0.0 {
                continue;
            }
            if let (Some(a), Some(b)) = (t_alpha[j], row[j]) {
                let z = (a - b) as f64 / stds[j];
                d2 += z * z;
                used += 1;
            }
        }
        let d2 = if used == 0 {
            f64::INFINITY
        } else {
            d2 * others as f64 / used as f64
        };
        scored.push((d2, i, y));
    }
    if scored.is_empty() {
        return Err(Error::NothingToImpute);
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.truncate(k);
    let vals: Vec<i64> = scored.iter().map(|s| s.2).collect();
    Ok(fixed_mean(&vals).expect("non-empty"))
}

pub fn rmse(truth: &[f64], predictions: &[f64]) -> Result<f64> {
    if truth.len() != predictions.len() || truth.is_empty() {
        return Err(Error::InvalidSpec(format!(
            "rmse needs equal non-empty inputs, got {} and {}",
            truth.len(),
            predictions.len()
        )));
    }
    let sq: f64 = truth.iter().zip(predictions).map(|(t, p)| (t - p) * (t - p)).sum();
    Ok((sq / truth.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    /// Bucket membership by scanning the literal ranges.
    fn scan_bucket(x: i64, r: i64, offset: i64) -> i64 {
        let mut k = -1000;
        loop {
            let lo = k * r + offset;
            if x >= lo && x < lo + r {
                return k;
            }
            k += 1;
        }
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(3, 10), (0, 0));
        assert_eq!(quantize(12, 10), (1, 1));
        assert_eq!(quantize(0, 2), (0, 0));
        assert_eq!(quantize(0, 100), (0, 0));
        assert_eq!(quantize(-1, 10), (-1, 0));
        assert_eq!(quantize(-6, 10), (-1, -1));
    }

    #[test]
    fn quantize_matches_range_scan() {
        for r in [2, 4, 10] {
            for x in -60..60 {
                assert_eq!(quantize(x, r), (scan_bucket(x, r, 0), scan_bucket(x, r, -r / 2)));
            }
        }
    }

    #[test]
    fn adjacent_examples() {
        assert_eq!(adjacent_buckets(3, 10), (-1, 1));
        assert_eq!(adjacent_buckets(5, 10).0, 1);
        assert_eq!(adjacent_buckets(4, 10).0, -1);
        for k in -3..4 {
            assert_eq!(adjacent_buckets(10 * k, 10).0, k - 1);
        }
    }

    #[test]
    fn adjacent_is_nearest_other_bucket() {
        // Independent oracle: the other bucket containing the closest value.
        for r in [2, 4, 10] {
            for x in -40i64..40 {
                let (q1, _) = quantize(x, r);
                let below = (1..=r).find(|d| quantize(x - d, r).0 != q1).unwrap();
                let above = (1..=r).find(|d| quantize(x + d, r).0 != q1).unwrap();
                let want = if below <= above { q1 - 1 } else { q1 + 1 };
                assert_eq!(adjacent_buckets(x, r).0, want, "x={x} r={r}");
            }
        }
    }

    #[test]
    fn match_examples() {
        assert!(quantized_match(3, 7, 10));
        assert!(!quantized_match(3, 20, 10));
        assert!(quantized_match(-17, -17, 4));
    }

    #[test]
    fn quantization_law_sweep() {
        for r in [2i64, 4, 10, 100] {
            for a in -10 * r..=10 * r {
                for b in -10 * r..=10 * r {
                    let m = quantized_match(a, b, r);
                    let d = (a - b).abs();
                    assert!(d * 2 > r || m, "sound r={r} a={a} b={b}");
                    assert!(!m || 2 * d <= 3 * r, "complete r={r} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn scheme_rejects_odd_radius() {
        assert!(QuantizationScheme::new(vec![2, 3]).is_err());
        assert!(QuantizationScheme::new(vec![0]).is_err());
    }

    fn brute_neighbor(a: &[Cell], w: &[Cell], beta: usize, r: &[i64]) -> bool {
        if w[beta].is_none() {
            return false;
        }
        for j in 0..a.len() {
            if j == beta {
                continue;
            }
            if let (Some(x), Some(y)) = (a[j], w[j]) {
                let same1 = x.div_euclid(r[j]) == y.div_euclid(r[j]);
                let same2 = (x + r[j] / 2).div_euclid(r[j]) == (y + r[j] / 2).div_euclid(r[j]);
                if !(same1 || same2) {
                    return false;
                }
            }
        }
        true
    }

    fn cell() -> impl Strategy<Value = Cell> {
        prop_oneof![1 => Just(None), 4 => (-50i64..50).prop_map(Some)]
    }

    proptest! {
        #[test]
        fn is_neighbor_matches_brute_force(
            a in proptest::collection::vec(cell(), 5),
            w in proptest::collection::vec(cell(), 5),
            beta in 0usize..5,
            r in proptest::collection::vec((1i64..8).prop_map(|h| 2 * h), 5),
        ) {
            let s = QuantizationScheme::new(r.clone()).unwrap();
            prop_assert_eq!(is_neighbor(&a, &w, beta, &s), brute_neighbor(&a, &w, beta, &r));
        }

        #[test]
        fn neighbor_tests_are_symmetric(
            a in proptest::collection::vec(-50i64..50, 4),
            w in proptest::collection::vec(-50i64..50, 4),
            r in 1i64..20,
        ) {
            let s = QuantizationScheme::uniform(4, 2 * r).unwrap();
            let a: Vec<Cell> = a.into_iter().map(Some).collect();
            let w: Vec<Cell> = w.into_iter().map(Some).collect();
            prop_assert_eq!(attributes_match(&a, &w, Some(0), &s), attributes_match(&w, &a, Some(0), &s));
        }
    }

    #[test]
    fn neighbor_needs_beta() {
        let s = QuantizationScheme::uniform(3, 10).unwrap();
        let a = [Some(1), None, Some(5)];
        assert!(!is_neighbor(&a, &[Some(1), None, Some(5)], 1, &s));
        assert!(is_neighbor(&a, &[Some(1), Some(9), Some(5)], 1, &s));
    }

    fn table(rows: Vec<Vec<Cell>>) -> Table {
        let m = rows[0].len();
        Table::from_rows((0..m).map(|j| format!("c{j}")).collect(), 1, rows).unwrap()
    }

    #[test]
    fn oracle_mean_and_singleton() {
        let s = QuantizationScheme::uniform(2, 10).unwrap();
        let t = table(vec![
            vec![Some(1), Some(10)],
            vec![Some(2), Some(20)],
            vec![Some(90), Some(7)],
        ]);
        let q = [Some(0), None];
        assert_eq!(impute_oracle(&t, &q, 1, &s, ImputeMode::Mean), Some(15));
        let q = [Some(90), None];
        assert_eq!(impute_oracle(&t, &q, 1, &s, ImputeMode::Mean), Some(7));
        assert_eq!(impute_oracle(&t, &q, 1, &s, ImputeMode::Random { seed: 3 }), Some(7));
        let q = [Some(500), None];
        assert_eq!(impute_oracle(&t, &q, 1, &s, ImputeMode::Mean), None);
    }

    #[test]
    fn oracle_mean_is_order_invariant() {
        let s = QuantizationScheme::uniform(2, 10).unwrap();
        let rows: Vec<Vec<Cell>> = (0..7).map(|i| vec![Some(i), Some(i * i - 9)]).collect();
        let mut rev = rows.clone();
        rev.reverse();
        let q = [Some(3), None];
        assert_eq!(
            impute_oracle(&table(rows), &q, 1, &s, ImputeMode::Mean),
            impute_oracle(&table(rev), &q, 1, &s, ImputeMode::Mean)
        );
    }

    #[test]
    fn oracle_random_frequency() {
        let s = QuantizationScheme::uniform(2, 10).unwrap();
        let t = table(vec![
            vec![Some(1), Some(4)],
            vec![Some(2), Some(4)],
            vec![Some(3), Some(9)],
        ]);
        let q = [Some(0), None];
        let hits = (0..10_000u64)
            .filter(|&seed| impute_oracle(&t, &q, 1, &s, ImputeMode::Random { seed }) == Some(4))
            .count();
        let f = hits as f64 / 10_000.0;
        assert!((0.653..=0.680).contains(&f), "frequency {f}");
    }

    #[test]
    fn knn_examples() {
        let t = table(vec![
            vec![Some(0), Some(0), Some(10)],
            vec![Some(10), Some(0), Some(20)],
            vec![Some(0), Some(30), Some(40)],
        ]);
        let stds = column_stds(&t);
        // Exact duplicate of row 1 on the non-target attributes.
        assert_eq!(knn_impute(&t, &[Some(10), Some(0), None], 2, 1, &stds).unwrap(), 20);
        // k = n gives the column mean.
        assert_eq!(
            knn_impute(&t, &[Some(5), Some(5), None], 2, 3, &stds).unwrap(),
            t.column_mean(2).unwrap()
        );
        // Hand ranking from (1, 1): normalized distances put rows 0 then 1 first.
        let d = |i: usize| -> f64 {
            let r = t.row(i);
            (0..2).map(|j| ((1 - r[j].unwrap()) as f64 / stds[j]).powi(2)).sum()
        };
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| d(a).total_cmp(&d(b)));
        let want = fixed_mean(&[t.get(order[0], 2).unwrap(), t.get(order[1], 2).unwrap()]).unwrap();
        assert_eq!(knn_impute(&t, &[Some(1), Some(1), None], 2, 2, &stds).unwrap(), want);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.535_533_905_932_737_6).abs() < 1e-12);
        assert!(rmse(&[1.0], &[]).is_err());
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let a: Vec<f64> = (0..50).map(|_| rng.gen()).collect();
        let b: Vec<f64> = (0..50).map(|_| rng.gen()).collect();
        let direct = (a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / 50.0).sqrt();
        assert!((rmse(&a, &b).unwrap() - direct).abs() < 1e-12);
    }
}
