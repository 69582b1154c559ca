//! Timing and communication runs on synthetic tables with a planted
//! neighbor count.
//!
//! Horizontal sessions give Bob only the query tuple and Alice every other
//! row. Vertical sessions split the non-imputed columns in half, Bob taking
//! the second half plus the imputed column, and query row 0.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use super::synth::{gen_synthetic, SynthSpec};
use crate::dataset::Table;
use crate::error::{Error, Result};
use crate::net::Channel;
use crate::proto::{horizontal, vertical, LocalRun, Outcome};
use crate::rnn::QuantizationScheme;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BenchVariant {
    Horizontal(horizontal::Variant),
    Vertical(vertical::Variant),
}

impl BenchVariant {
    pub fn all() -> Vec<BenchVariant> {
        let h = horizontal::Variant::ALL.map(BenchVariant::Horizontal);
        let v = vertical::Variant::ALL.map(BenchVariant::Vertical);
        h.into_iter().chain(v).collect()
    }
}

impl fmt::Display for BenchVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchVariant::Horizontal(v) => write!(f, "horizontal/{v}"),
            BenchVariant::Vertical(v) => write!(f, "vertical/{v}"),
        }
    }
}

impl FromStr for BenchVariant {
    type Err = Error;

    /// Parses `horizontal/blind-mean` or `vertical/plain-random`.
    fn from_str(s: &str) -> Result<BenchVariant> {
        match s.split_once('/') {
            Some(("horizontal", v)) => Ok(BenchVariant::Horizontal(v.parse()?)),
            Some(("vertical", v)) => Ok(BenchVariant::Vertical(v.parse()?)),
            _ => Err(Error::Config(format!(
                "bench variant {s:?} must look like horizontal/blind-mean or vertical/plain-random"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transport {
    InProcess,
    /// A TCP socket on 127.0.0.1; link shaping is left to the OS.
    Loopback,
}

impl FromStr for Transport {
    type Err = Error;

    fn from_str(s: &str) -> Result<Transport> {
        match s {
            "in-process" => Ok(Transport::InProcess),
            "loopback" => Ok(Transport::Loopback),
            _ => Err(Error::Config(format!("unknown transport {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchPlan {
    pub n: usize,
    pub m: usize,
    pub neighbor_fraction: f64,
    pub variants: Vec<BenchVariant>,
    pub trials: usize,
    pub epsilon: f64,
    pub padding: f64,
    pub transport: Transport,
    pub seed: u64,
}

impl BenchPlan {
    pub fn new(n: usize, m: usize, neighbor_fraction: f64) -> Self {
        BenchPlan {
            n,
            m,
            neighbor_fraction,
            variants: BenchVariant::all(),
            trials: 25,
            epsilon: 2f64.powi(-40),
            padding: vertical::DEFAULT_PADDING,
            transport: Transport::InProcess,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub variant: BenchVariant,
    pub trial: usize,
    pub n: usize,
    pub m: usize,
    pub neighbors: usize,
    pub outcome: Outcome,
    /// OPPRF work for horizontal sessions, set intersection for vertical ones.
    pub opprf_or_psi_s: f64,
    pub mpc_build_s: f64,
    pub mpc_eval_s: f64,
    pub total_s: f64,
    /// Bytes sent by both parties, in units of 10^6.
    pub comm_mb: f64,
}

pub const BENCH_HEADER: [&str; 11] = [
    "variant",
    "trial",
    "n",
    "m",
    "neighbors",
    "outcome",
    "opprf_or_psi_s",
    "mpc_build_s",
    "mpc_eval_s",
    "total_s",
    "comm_mb",
];

fn outcome_label(o: Outcome) -> String {
    match o {
        Outcome::Value(v) => v.to_string(),
        Outcome::NoNeighbor => "none".into(),
        Outcome::Aborted => "abort".into(),
    }
}

pub fn write_bench<W: Write>(rows: &[BenchRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(BENCH_HEADER)?;
    for r in rows {
        out.write_record([
            r.variant.to_string(),
            r.trial.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.neighbors.to_string(),
            outcome_label(r.outcome),
            format!("{:.6}", r.opprf_or_psi_s),
            format!("{:.6}", r.mpc_build_s),
            format!("{:.6}", r.mpc_eval_s),
            format!("{:.6}", r.total_s),
            format!("{:.6}", r.comm_mb),
        ])?;
    }
    out.flush()?;
    Ok(())
}

struct Setup {
    spec: SynthSpec,
    h_alice: Table,
    h_bob: Table,
    h_scheme: QuantizationScheme,
    bounds: Vec<Option<(i64, i64)>>,
    v_alice: Table,
    v_bob: Table,
    v_alice_scheme: QuantizationScheme,
    v_bob_scheme: QuantizationScheme,
}

impl Setup {
    fn new(plan: &BenchPlan) -> Result<Setup> {
        if plan.trials == 0 {
            return Err(Error::Config("at least one trial is needed".into()));
        }
        if plan.n < 2 {
            return Err(Error::Config("need at least two rows".into()));
        }
        let spec = SynthSpec::new(plan.n, plan.m, plan.neighbor_fraction, plan.seed);
        let t = gen_synthetic(&spec)?;
        let m = plan.m;
        let scheme = QuantizationScheme::uniform(m, spec.radius)?;
        let rest: Vec<usize> = (1..t.n()).collect();
        let features = m - 1;
        let alice_cols: Vec<usize> = (0..features.div_ceil(2)).collect();
        let bob_cols: Vec<usize> = (features.div_ceil(2)..m).collect();
        Ok(Setup {
            h_alice: t.select_rows(&rest),
            h_bob: t.select_rows(&[0]),
            h_scheme: scheme.clone(),
            bounds: vec![None; m],
            v_alice: t.select_columns(&alice_cols),
            v_bob: t.select_columns(&bob_cols),
            v_alice_scheme: scheme.select(&alice_cols),
            v_bob_scheme: scheme.select(&bob_cols),
            spec,
        })
    }

    fn run(&self, variant: BenchVariant, plan: &BenchPlan, seed: u64) -> Result<LocalRun<Outcome>> {
        let channels = match plan.transport {
            Transport::InProcess => Channel::pair(),
            Transport::Loopback => Channel::loopback_pair()?,
        };
        match variant {
            BenchVariant::Horizontal(v) => {
                let alice = horizontal::AliceInput {
                    table: &self.h_alice,
                    scheme: &self.h_scheme,
                };
                let bob = horizontal::BobInput {
                    table: &self.h_bob,
                    query: self.h_bob.row(0),
                    beta: plan.m - 1,
                    scheme: &self.h_scheme,
                    bounds: &self.bounds,
                    variant: v,
                    epsilon: plan.epsilon,
                    ell_fraction: (plan.neighbor_fraction > 0.0).then_some(plan.neighbor_fraction),
                };
                horizontal::run_session(channels, &alice, &bob, seed)
            }
            BenchVariant::Vertical(v) => {
                let alice = vertical::AliceInput {
                    table: &self.v_alice,
                    scheme: &self.v_alice_scheme,
                    padding: plan.padding,
                };
                let bob = vertical::BobInput {
                    table: &self.v_bob,
                    scheme: &self.v_bob_scheme,
                    alpha: 0,
                    beta: self.v_bob.m() - 1,
                    variant: v,
                    psi: vertical::PsiBackend::Oprf,
                    padding: plan.padding,
                };
                vertical::run_session(channels, &alice, &bob, seed)
            }
        }
    }
}

fn secs(nanos: u64) -> f64 {
    nanos as f64 / 1e9
}

/// Runs every variant `trials` times on one synthetic table. Phase times
/// are Bob's view; the total is wall time of the whole session.
pub fn bench(plan: &BenchPlan) -> Result<Vec<BenchRow>> {
    let setup = Setup::new(plan)?;
    let mut rows = Vec::with_capacity(plan.variants.len() * plan.trials);
    for &variant in &plan.variants {
        for trial in 0..plan.trials {
            let seed = plan.seed ^ ((trial as u64) << 32) ^ 0x5eed;
            let start = Instant::now();
            let run = setup.run(variant, plan, seed)?;
            let total = start.elapsed();
            let first = match variant {
                BenchVariant::Horizontal(_) => "opprf",
                BenchVariant::Vertical(_) => "psi",
            };
            rows.push(BenchRow {
                variant,
                trial,
                n: plan.n,
                m: plan.m,
                neighbors: setup.spec.planted(),
                outcome: run.output,
                opprf_or_psi_s: secs(run.bob.phase_nanos(first)),
                mpc_build_s: secs(run.bob.phase_nanos("mpc_build")),
                mpc_eval_s: secs(run.bob.phase_nanos("mpc_eval")),
                total_s: total.as_secs_f64(),
                comm_mb: (run.alice.bytes_sent + run.bob.bytes_sent) as f64 / 1e6,
            });
        }
    }
    Ok(rows)
}
