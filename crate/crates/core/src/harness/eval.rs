//! Accuracy evaluation: repeated party splits crossed with repeated
//! missingness draws, scored by RMSE against the dropped values.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::dataset::{inject_missing, MissingnessSpec, Pattern, Table};
use crate::error::{Error, Result};
use crate::proto::{horizontal, vertical, Outcome};
use crate::radius::{search_radii, RadiusSearchConfig};
use crate::rnn::{column_stds, impute_oracle, knn_impute, rmse, ImputeMode, QuantizationScheme};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    RnnFull,
    KnnFull,
    KnnVerticalLocal,
    KnnHorizontalLocal,
    RnnPrivateHorizontal,
    RnnPrivateVertical,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::RnnFull,
        Method::KnnFull,
        Method::KnnVerticalLocal,
        Method::KnnHorizontalLocal,
        Method::RnnPrivateHorizontal,
        Method::RnnPrivateVertical,
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::RnnFull => "rnn_full",
            Method::KnnFull => "knn_full",
            Method::KnnVerticalLocal => "knn_vertical_local",
            Method::KnnHorizontalLocal => "knn_horizontal_local",
            Method::RnnPrivateHorizontal => "rnn_private_horizontal",
            Method::RnnPrivateVertical => "rnn_private_vertical",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct EvalPlan {
    pub dataset: String,
    pub table: Table,
    pub beta: usize,
    pub pattern: Pattern,
    pub fraction: f64,
    pub splits: usize,
    pub resamples: usize,
    pub methods: Vec<Method>,
    pub k: usize,
    /// Share of rows given to Alice in horizontal splits.
    pub alice_fraction: f64,
    pub radius: RadiusSearchConfig,
    /// Queries of the first repetition that are also imputed by running the
    /// blind-mean protocols, whose outputs must equal the oracle's.
    pub spot_checks: usize,
    pub seed: u64,
}

impl EvalPlan {
    pub fn new(dataset: impl Into<String>, table: Table, beta: usize) -> Self {
        EvalPlan {
            dataset: dataset.into(),
            table,
            beta,
            pattern: Pattern::Mcar,
            fraction: 0.10,
            splits: 25,
            resamples: 25,
            methods: Method::ALL.to_vec(),
            k: 5,
            alice_fraction: 0.5,
            radius: RadiusSearchConfig::default(),
            spot_checks: 2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub dataset: String,
    pub method: Method,
    pub split: usize,
    pub resample: usize,
    pub rmse: f64,
    /// Queries answered by the column mean for lack of neighbors.
    pub fallbacks: usize,
    pub queries: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub dataset: String,
    pub method: Method,
    pub mean_rmse: f64,
    /// Half-width of the 95% interval over repetitions.
    pub ci95: f64,
    /// Mean RMSE as a percentage of the full-data r-NN's; NaN when that
    /// method was not run.
    pub scaled_pct: f64,
}

#[derive(Clone, Debug)]
pub struct EvalResult {
    pub rows: Vec<EvalRow>,
    pub summary: Vec<MethodSummary>,
    pub spot_checked: usize,
}

pub const ROWS_HEADER: [&str; 7] = ["dataset", "method", "split", "resample", "rmse", "fallbacks", "queries"];
pub const SUMMARY_HEADER: [&str; 5] = ["dataset", "method", "mean_rmse", "ci95", "scaled_pct"];

impl EvalResult {
    /// Mean RMSE of `method` per split repetition, in split order.
    pub fn split_means(&self, method: Method) -> Vec<f64> {
        let splits = self.rows.iter().map(|r| r.split + 1).max().unwrap_or(0);
        (0..splits)
            .map(|s| {
                let v: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.method == method && r.split == s)
                    .map(|r| r.rmse)
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            })
            .collect()
    }

    pub fn mean(&self, method: Method) -> Option<f64> {
        self.summary.iter().find(|s| s.method == method).map(|s| s.mean_rmse)
    }

    /// Relative RMSE reduction of `of` over `baseline`, in percent.
    pub fn gain(&self, of: Method, baseline: Method) -> Option<f64> {
        Some(100.0 * (1.0 - self.mean(of)? / self.mean(baseline)?))
    }

    pub fn write_rows<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(ROWS_HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.dataset.clone(),
                r.method.to_string(),
                r.split.to_string(),
                r.resample.to_string(),
                format!("{:.6}", r.rmse),
                r.fallbacks.to_string(),
                r.queries.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(SUMMARY_HEADER)?;
        for s in &self.summary {
            out.write_record([
                s.dataset.clone(),
                s.method.to_string(),
                format!("{:.6}", s.mean_rmse),
                format!("{:.6}", s.ci95),
                // Empty when the full-data r-NN was not run.
                if s.scaled_pct.is_nan() {
                    String::new()
                } else {
                    format!("{:.2}", s.scaled_pct)
                },
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.rotate_left(32));
    rng.gen()
}

/// One party split of the columns and rows for repetition `split`.
struct Partition {
    alice_cols: Vec<usize>,
    bob_cols: Vec<usize>,
    /// Owner of each row in the horizontal split: true for Alice.
    alice_rows: Vec<bool>,
}

fn partition(t: &Table, beta: usize, alice_fraction: f64, seed: u64) -> Partition {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut cols: Vec<usize> = (0..t.m()).filter(|&j| j != beta).collect();
    cols.shuffle(&mut rng);
    let cut = (cols.len() / 2).max(1).min(cols.len());
    let mut alice_cols = cols[..cut].to_vec();
    let mut bob_cols = cols[cut..].to_vec();
    bob_cols.push(beta);
    alice_cols.sort_unstable();
    bob_cols.sort_unstable();
    let mut rows: Vec<usize> = (0..t.n()).collect();
    rows.shuffle(&mut rng);
    let n_a = (alice_fraction * t.n() as f64).round() as usize;
    let mut alice_rows = vec![false; t.n()];
    for &i in &rows[..n_a.min(t.n())] {
        alice_rows[i] = true;
    }
    Partition {
        alice_cols,
        bob_cols,
        alice_rows,
    }
}

struct Job<'a> {
    plan: &'a EvalPlan,
    split: usize,
    resample: usize,
}

impl Job<'_> {
    fn run(&self) -> Result<(Vec<EvalRow>, usize)> {
        let plan = self.plan;
        let beta = plan.beta;
        let draw = mix(plan.seed, self.split as u64, self.resample as u64 + 1);
        let mut spec = MissingnessSpec::new(plan.pattern, beta, draw);
        spec.fraction = plan.fraction;
        let (t, truth) = inject_missing(&plan.table, &spec)?;
        if truth.is_empty() {
            return Err(Error::NothingToImpute);
        }
        let mut cfg = plan.radius.clone();
        cfg.seed = draw;
        let scheme = search_radii(&t, beta, &cfg)?.scheme();
        let part = partition(&t, beta, plan.alice_fraction, mix(plan.seed, self.split as u64, 0));
        let fallback = t.column_mean(beta).ok_or(Error::NothingToImpute)?;
        let stds = column_stds(&t);
        let bob_t = t.select_columns(&part.bob_cols);
        let bob_beta = part
            .bob_cols
            .iter()
            .position(|&j| j == beta)
            .expect("beta on Bob's side");
        let bob_stds = column_stds(&bob_t);
        let owners: [Vec<usize>; 2] = [
            (0..t.n()).filter(|&i| part.alice_rows[i]).collect(),
            (0..t.n()).filter(|&i| !part.alice_rows[i]).collect(),
        ];
        let local_tables = [t.select_rows(&owners[0]), t.select_rows(&owners[1])];
        let local_stds = [column_stds(&local_tables[0]), column_stds(&local_tables[1])];

        let oracle: Vec<Option<i64>> = truth
            .iter()
            .map(|&(i, _)| impute_oracle(&t, t.row(i), beta, &scheme, ImputeMode::Mean))
            .collect();
        let mut spot = 0;
        if self.split == 0 && self.resample == 0 {
            for (q, &(i, _)) in truth.iter().enumerate().take(plan.spot_checks) {
                self.spot_check(&t, &scheme, &part, &owners, i, oracle[q])?;
                spot += 1;
            }
        }

        let truth_f: Vec<f64> = truth.iter().map(|&(_, v)| t.unscale(v)).collect();
        let mut rows = Vec::new();
        for &method in &plan.methods {
            let mut fallbacks = 0;
            let mut pred = Vec::with_capacity(truth.len());
            for (q, &(i, _)) in truth.iter().enumerate() {
                let v = match method {
                    Method::RnnFull | Method::RnnPrivateHorizontal | Method::RnnPrivateVertical => oracle[q]
                        .unwrap_or_else(|| {
                            fallbacks += 1;
                            fallback
                        }),
                    Method::KnnFull => knn_impute(&t, t.row(i), beta, plan.k, &stds)?,
                    Method::KnnVerticalLocal => knn_impute(&bob_t, bob_t.row(i), bob_beta, plan.k, &bob_stds)?,
                    Method::KnnHorizontalLocal => {
                        let o = if part.alice_rows[i] { 0 } else { 1 };
                        let li = owners[o].binary_search(&i).expect("row owned");
                        knn_impute(&local_tables[o], local_tables[o].row(li), beta, plan.k, &local_stds[o])?
                    }
                };
                pred.push(t.unscale(v));
            }
            rows.push(EvalRow {
                dataset: plan.dataset.clone(),
                method,
                split: self.split,
                resample: self.resample,
                rmse: rmse(&truth_f, &pred)?,
                fallbacks,
                queries: truth.len(),
            });
        }
        Ok((rows, spot))
    }

    /// Imputes row `i` with both blind-mean protocols and compares with the
    /// oracle. The row's owner plays Bob in the horizontal run.
    fn spot_check(
        &self,
        t: &Table,
        scheme: &QuantizationScheme,
        part: &Partition,
        owners: &[Vec<usize>; 2],
        i: usize,
        want: Option<i64>,
    ) -> Result<()> {
        let beta = self.plan.beta;
        let seed = mix(self.plan.seed, i as u64, 7);
        let (mine, theirs) = if part.alice_rows[i] { (0, 1) } else { (1, 0) };
        let bob_t = t.select_rows(&owners[mine]);
        let alice_t = t.select_rows(&owners[theirs]);
        let bounds: Vec<Option<(i64, i64)>> = (0..t.m()).map(|j| t.column_bounds(j)).collect();
        let h = horizontal::run_local(
            &horizontal::AliceInput {
                table: &alice_t,
                scheme,
            },
            &horizontal::BobInput {
                table: &bob_t,
                query: t.row(i),
                beta,
                scheme,
                bounds: &bounds,
                variant: horizontal::Variant::BlindMean,
                epsilon: 2f64.powi(-40),
                ell_fraction: None,
            },
            seed,
        )?
        .output;
        let (ta, tb) = (t.select_columns(&part.alice_cols), t.select_columns(&part.bob_cols));
        let (sa, sb) = (scheme.select(&part.alice_cols), scheme.select(&part.bob_cols));
        let v = vertical::run_local(
            &vertical::AliceInput {
                table: &ta,
                scheme: &sa,
                padding: vertical::DEFAULT_PADDING,
            },
            &vertical::BobInput {
                table: &tb,
                scheme: &sb,
                alpha: i,
                beta: part
                    .bob_cols
                    .iter()
                    .position(|&j| j == beta)
                    .expect("beta on Bob's side"),
                variant: vertical::Variant::BlindMean,
                psi: vertical::PsiBackend::Oprf,
                padding: vertical::DEFAULT_PADDING,
            },
            seed,
        )?
        .output;
        let want = want.map_or(Outcome::NoNeighbor, Outcome::Value);
        if h != want || v != want {
            return Err(Error::Protocol(format!(
                "row {i}: protocols gave {h:?} and {v:?}, oracle {want:?}"
            )));
        }
        Ok(())
    }
}

/// Runs the plan's grid of splits and missingness draws.
pub fn eval_accuracy(plan: &EvalPlan) -> Result<EvalResult> {
    if plan.splits == 0 || plan.resamples == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    if plan.methods.is_empty() {
        return Err(Error::Config("no methods selected".into()));
    }
    if plan.beta >= plan.table.m() || plan.table.m() < 2 {
        return Err(Error::Config("imputed attribute out of range".into()));
    }
    let jobs: Vec<Job> = (0..plan.splits)
        .flat_map(|split| (0..plan.resamples).map(move |resample| Job { plan, split, resample }))
        .collect();
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(jobs.len());
    let results: Vec<Result<(Vec<EvalRow>, usize)>> = if workers <= 1 {
        jobs.iter().map(Job::run).collect()
    } else {
        let chunk = jobs.len().div_ceil(workers);
        std::thread::scope(|s| {
            let handles: Vec<_> = jobs
                .chunks(chunk)
                .map(|c| s.spawn(move || c.iter().map(Job::run).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("worker panicked"))
                .collect()
        })
    };
    let mut rows = Vec::new();
    let mut spot_checked = 0;
    for r in results {
        let (r, s) = r?;
        rows.extend(r);
        spot_checked += s;
    }
    let summary = summarize(&plan.dataset, &plan.methods, &rows);
    Ok(EvalResult {
        rows,
        summary,
        spot_checked,
    })
}

fn summarize(dataset: &str, methods: &[Method], rows: &[EvalRow]) -> Vec<MethodSummary> {
    let stats = |m: Method| {
        let v: Vec<f64> = rows.iter().filter(|r| r.method == m).map(|r| r.rmse).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        (mean, 1.96 * sd / n.sqrt())
    };
    let base = methods.contains(&Method::RnnFull).then(|| stats(Method::RnnFull).0);
    methods
        .iter()
        .map(|&m| {
            let (mean, ci) = stats(m);
            MethodSummary {
                dataset: dataset.to_string(),
                method: m,
                mean_rmse: mean,
                ci95: ci,
                scaled_pct: base.map_or(f64::NAN, |b| 100.0 * mean / b),
            }
        })
        .collect()
}
