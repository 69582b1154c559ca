use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use privimpute::dataset::{
    inject_missing, load_bundled, load_table, write_ground_truth, LoadOptions, MissingnessSpec, Pattern, Table,
};
use privimpute::harness::bench::{bench, write_bench, BenchPlan, BenchVariant, Transport};
use privimpute::harness::eval::{eval_accuracy, EvalPlan, Method};
use privimpute::harness::synth::{gen_synthetic, SynthSpec};
use privimpute::mpc::triples::{write_dealer_files, Ring};
use privimpute::mpc::{Party, TripleProvider};
use privimpute::net::{write_transcript, Channel};
use privimpute::proto::{horizontal, vertical, Outcome};
use privimpute::radius::{read_radii, search_radii, write_radii, RadiiFile, RadiusSearchConfig};

#[derive(Parser)]
#[command(name = "privimpute", version, about = "Two-party private r-NN imputation")]
struct Cli {
    /// TOML file with defaults for options left off the command line.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic table with a planted neighbor count for row 0.
    Gen(GenArgs),
    /// Drop cells of one column and record the dropped values.
    Inject(InjectArgs),
    /// Search per-attribute radii on a table.
    Radii(RadiiArgs),
    /// Accuracy grid of repeated splits and missingness draws.
    Eval(EvalArgs),
    /// Timing and communication on synthetic tables.
    Bench(BenchArgs),
    /// One imputation over a horizontal split.
    Horizontal(HorizontalArgs),
    /// One imputation over a vertical split.
    Vertical(VerticalArgs),
    /// Write matching dealer triple files for both parties.
    Triples(TriplesArgs),
}

/// Defaults read from `--config`. Flags win over these.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Settings {
    addr: Option<String>,
    seed: Option<u64>,
    epsilon: Option<String>,
    pad: Option<f64>,
    psi: Option<String>,
    trials: Option<usize>,
    timeout_secs: Option<u64>,
    triple_seed: Option<u64>,
    scale: Option<i64>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Settings> {
        let Some(p) = path else {
            return Ok(Settings::default());
        };
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
    }
}

#[derive(Args)]
struct Source {
    /// CSV file with a header row; empty cells are missing.
    #[arg(long, conflicts_with = "dataset")]
    input: Option<PathBuf>,
    /// Bundled dataset: iris, wine or diabetes.
    #[arg(long)]
    dataset: Option<String>,
    /// Fixed-point scale applied to decimal values.
    #[arg(long)]
    scale: Option<i64>,
}

impl Source {
    /// The table, a display name and the bundled default target if any.
    fn load(&self, cfg: &Settings) -> Result<(Table, String, Option<usize>)> {
        let mut opts = LoadOptions::default();
        if let Some(s) = self.scale.or(cfg.scale) {
            opts.scale = s;
        }
        match (&self.input, &self.dataset) {
            (Some(p), _) => {
                let t = load_table(p, &opts).with_context(|| format!("loading {}", p.display()))?;
                let name = p
                    .file_stem()
                    .map_or("input".into(), |s| s.to_string_lossy().into_owned());
                Ok((t, name, None))
            }
            (None, Some(d)) => {
                let (t, beta) = load_bundled(d, &opts)?;
                Ok((t, d.clone(), Some(beta)))
            }
            (None, None) => bail!("give --input or --dataset"),
        }
    }
}

/// Resolves a column given by name or index.
fn column(t: &Table, spec: &str) -> Result<usize> {
    if let Some(j) = t.column_index(spec) {
        return Ok(j);
    }
    match spec.parse::<usize>() {
        Ok(j) if j < t.m() => Ok(j),
        _ => bail!("no column {spec:?} among {:?}", t.names()),
    }
}

fn target(t: &Table, given: Option<&str>, default: Option<usize>) -> Result<usize> {
    match (given, default) {
        (Some(s), _) => column(t, s),
        (None, Some(j)) => Ok(j),
        (None, None) => bail!("give --target"),
    }
}

/// Accepts `2^-40` as well as plain decimals.
fn parse_epsilon(s: &str) -> Result<f64> {
    let v = match s.split_once('^') {
        Some((base, exp)) => base.trim().parse::<f64>()?.powf(exp.trim().parse::<f64>()?),
        None => s.trim().parse::<f64>()?,
    };
    if !(v > 0.0 && v < 1.0) {
        bail!("epsilon {s} must lie in (0, 1)");
    }
    Ok(v)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 0.01)]
    neighbor_frac: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_gen(a: &GenArgs, cfg: &Settings) -> Result<()> {
    let spec = SynthSpec::new(a.n, a.m, a.neighbor_frac, a.seed.or(cfg.seed).unwrap_or(0));
    let t = gen_synthetic(&spec)?;
    t.write_csv(output(a.out.as_deref())?)?;
    Ok(())
}

#[derive(Args)]
struct InjectArgs {
    #[command(flatten)]
    src: Source,
    /// Column to drop cells from, by name or index.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value = "mcar")]
    pattern: String,
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    /// Column driving MAR drops.
    #[arg(long)]
    driver: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the dropped `(row_index, value)` pairs.
    #[arg(long)]
    truth: PathBuf,
}

fn cmd_inject(a: &InjectArgs, cfg: &Settings) -> Result<()> {
    let (t, _, default) = a.src.load(cfg)?;
    let beta = target(&t, a.target.as_deref(), default)?;
    let mut spec = MissingnessSpec::new(a.pattern.parse::<Pattern>()?, beta, a.seed.or(cfg.seed).unwrap_or(0));
    spec.fraction = a.fraction;
    spec.driver = a.driver.as_deref().map(|d| column(&t, d)).transpose()?;
    let (out, truth) = inject_missing(&t, &spec)?;
    out.write_csv(create(&a.out)?)?;
    write_ground_truth(&t, &truth, create(&a.truth)?)?;
    eprintln!("dropped {} cells of {}", truth.len(), t.names()[beta]);
    Ok(())
}

#[derive(Args)]
struct RadiiArgs {
    #[command(flatten)]
    src: Source,
    #[arg(long)]
    target: Option<String>,
    /// Also write each attribute's observed range as its public bounds.
    #[arg(long)]
    bounds: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_radii(a: &RadiiArgs, cfg: &Settings) -> Result<()> {
    let (t, _, default) = a.src.load(cfg)?;
    let beta = target(&t, a.target.as_deref(), default)?;
    let rc = RadiusSearchConfig {
        seed: a.seed.or(cfg.seed).unwrap_or(0),
        ..RadiusSearchConfig::default()
    };
    let res = search_radii(&t, beta, &rc)?;
    let bounds: Vec<Option<(i64, i64)>> = (0..t.m()).map(|j| t.column_bounds(j)).collect();
    write_radii(
        &t,
        &res.radii,
        a.bounds.then_some(&bounds[..]),
        output(a.out.as_deref())?,
    )?;
    Ok(())
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    src: Source,
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value = "mcar")]
    pattern: String,
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    #[arg(long, default_value_t = 25)]
    splits: usize,
    #[arg(long, default_value_t = 25)]
    resamples: usize,
    /// Comma-separated subset of the methods; all when omitted.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Queries of the first repetition also imputed by the real protocols.
    #[arg(long, default_value_t = 2)]
    spot_checks: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-repetition CSV.
    #[arg(long)]
    rows: Option<PathBuf>,
    /// Per-method summary CSV; printed when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn cmd_eval(a: &EvalArgs, cfg: &Settings) -> Result<()> {
    let (t, name, default) = a.src.load(cfg)?;
    let beta = target(&t, a.target.as_deref(), default)?;
    let mut plan = EvalPlan::new(name, t, beta);
    plan.pattern = a.pattern.parse()?;
    plan.fraction = a.fraction;
    plan.splits = a.splits;
    plan.resamples = a.resamples;
    plan.k = a.k;
    plan.spot_checks = a.spot_checks;
    plan.seed = a.seed.or(cfg.seed).unwrap_or(0);
    if !a.methods.is_empty() {
        plan.methods = a
            .methods
            .iter()
            .map(|m| m.parse::<Method>())
            .collect::<Result<_, _>>()?;
    }
    let res = eval_accuracy(&plan)?;
    if let Some(p) = &a.rows {
        res.write_rows(create(p)?)?;
    }
    res.write_summary(output(a.summary.as_deref())?)?;
    for (of, base) in [
        (Method::RnnPrivateVertical, Method::KnnVerticalLocal),
        (Method::RnnPrivateHorizontal, Method::KnnHorizontalLocal),
    ] {
        if let Some(g) = res.gain(of, base) {
            eprintln!("{of}: {:.1}% RMSE change against {base}", -g);
        }
    }
    Ok(())
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 50_000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 0.01)]
    neighbor_frac: f64,
    /// Comma-separated, e.g. `horizontal/blind-random,vertical/blind-mean`;
    /// all eight when omitted.
    #[arg(long, value_delimiter = ',')]
    variants: Vec<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    pad: Option<f64>,
    #[arg(long, default_value = "in-process")]
    transport: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_bench(a: &BenchArgs, cfg: &Settings) -> Result<()> {
    let mut plan = BenchPlan::new(a.n, a.m, a.neighbor_frac);
    if !a.variants.is_empty() {
        plan.variants = a
            .variants
            .iter()
            .map(|v| v.parse::<BenchVariant>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(t) = a.trials.or(cfg.trials) {
        plan.trials = t;
    }
    if let Some(e) = a.epsilon.as_ref().or(cfg.epsilon.as_ref()) {
        plan.epsilon = parse_epsilon(e)?;
    }
    if let Some(p) = a.pad.or(cfg.pad) {
        plan.padding = p;
    }
    plan.transport = a.transport.parse::<Transport>()?;
    plan.seed = a.seed.or(cfg.seed).unwrap_or(0);
    let rows = bench(&plan)?;
    write_bench(&rows, output(a.out.as_deref())?)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Role {
    Alice,
    Bob,
}

/// Connection and bookkeeping options shared by both protocols. Alice
/// listens on `--addr` and Bob connects to it.
#[derive(Args)]
struct Session {
    #[arg(long, value_enum)]
    role: Role,
    #[arg(long)]
    addr: Option<String>,
    /// This party's CSV.
    #[arg(long)]
    data: PathBuf,
    /// Radii file as written by `radii`; attributes are matched by name.
    #[arg(long)]
    radii: PathBuf,
    #[arg(long)]
    scale: Option<i64>,
    /// Seed shared by both parties for dealer triples. Anyone holding it can
    /// reconstruct every share; use `--triples` for real deployments.
    #[arg(long)]
    triple_seed: Option<u64>,
    /// This party's arithmetic and boolean triple files.
    #[arg(long, num_args = 2, value_names = ["ARITH", "BOOL"])]
    triples: Option<Vec<PathBuf>>,
    /// Seed for this party's own randomness; drawn from the OS when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Per-phase transcript CSV.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

impl Session {
    fn party(&self) -> Party {
        match self.role {
            Role::Alice => Party::Alice,
            Role::Bob => Party::Bob,
        }
    }

    fn load(&self, cfg: &Settings) -> Result<(Table, RadiiFile)> {
        let mut opts = LoadOptions::default();
        if let Some(s) = self.scale.or(cfg.scale) {
            opts.scale = s;
        }
        let t = load_table(&self.data, &opts).with_context(|| format!("loading {}", self.data.display()))?;
        let f = File::open(&self.radii).with_context(|| format!("opening {}", self.radii.display()))?;
        let radii = read_radii(t.names(), t.scale(), f)?;
        Ok((t, radii))
    }

    fn triples(&self, cfg: &Settings) -> Result<TripleProvider> {
        Ok(match &self.triples {
            Some(files) => TripleProvider::from_files(self.party(), &files[0], &files[1])?,
            None => TripleProvider::dealer(self.party(), self.triple_seed.or(cfg.triple_seed).unwrap_or(0)),
        })
    }

    fn connect(&self, cfg: &Settings) -> Result<Channel> {
        let addr = self
            .addr
            .clone()
            .or(cfg.addr.clone())
            .unwrap_or_else(|| "127.0.0.1:7700".into());
        let timeout = Duration::from_secs(cfg.timeout_secs.unwrap_or(120));
        let mut ch = match self.role {
            Role::Alice => Channel::listen(addr.as_str()).with_context(|| format!("listening on {addr}"))?,
            Role::Bob => Channel::connect(addr.as_str(), timeout).with_context(|| format!("connecting to {addr}"))?,
        };
        ch.set_timeout(timeout);
        Ok(ch)
    }

    fn seed(&self, cfg: &Settings) -> u64 {
        self.seed.or(cfg.seed).unwrap_or_else(rand_seed)
    }

    fn finish(&self, ch: &Channel) -> Result<()> {
        if let Some(p) = &self.transcript {
            write_transcript(ch.phases(), create(p)?)?;
        }
        eprintln!("sent {} bytes, received {}", ch.bytes_sent(), ch.bytes_received());
        Ok(())
    }
}

fn rand_seed() -> u64 {
    use std::collections::hash_map::RandomState;
    use std::hash::{BuildHasher, Hasher};
    RandomState::new().build_hasher().finish()
}

fn report(t: &Table, o: Outcome) {
    match o {
        Outcome::Value(v) => println!("{}", t.unscale(v)),
        Outcome::NoNeighbor => println!("none"),
        Outcome::Aborted => println!("abort"),
    }
}

#[derive(Args)]
struct HorizontalArgs {
    #[command(flatten)]
    session: Session,
    #[arg(long, default_value = "blind-mean")]
    variant: String,
    /// Imputed attribute, by name or index.
    #[arg(long)]
    beta: Option<String>,
    /// Bob's query row; the first row missing `beta` when omitted.
    #[arg(long)]
    row: Option<usize>,
    #[arg(long)]
    epsilon: Option<String>,
    /// Expected fraction of Alice's rows neighboring the query.
    #[arg(long)]
    ell_frac: Option<f64>,
}

fn cmd_horizontal(a: &HorizontalArgs, cfg: &Settings) -> Result<()> {
    let s = &a.session;
    let (t, radii) = s.load(cfg)?;
    let triples = s.triples(cfg)?;
    let seed = s.seed(cfg);
    match s.role {
        Role::Alice => {
            let mut ch = s.connect(cfg)?;
            let input = horizontal::AliceInput {
                table: &t,
                scheme: &radii.scheme,
            };
            horizontal::run_alice(&mut ch, &input, triples, seed)?;
            s.finish(&ch)
        }
        Role::Bob => {
            let beta = column(&t, a.beta.as_deref().context("Bob needs --beta")?)?;
            let row = match a.row {
                Some(r) if r < t.n() => r,
                Some(r) => bail!("row {r} out of range"),
                None => (0..t.n())
                    .find(|&i| t.get(i, beta).is_none())
                    .context("no row is missing the imputed attribute; give --row")?,
            };
            let eps = a
                .epsilon
                .as_ref()
                .or(cfg.epsilon.as_ref())
                .map_or(Ok(2f64.powi(-40)), |e| parse_epsilon(e))?;
            let input = horizontal::BobInput {
                table: &t,
                query: t.row(row),
                beta,
                scheme: &radii.scheme,
                bounds: &radii.bounds,
                variant: a.variant.parse()?,
                epsilon: eps,
                ell_fraction: a.ell_frac,
            };
            let mut ch = s.connect(cfg)?;
            let out = horizontal::run_bob(&mut ch, &input, triples, seed)?;
            report(&t, out);
            s.finish(&ch)
        }
    }
}

#[derive(Args)]
struct VerticalArgs {
    #[command(flatten)]
    session: Session,
    #[arg(long, default_value = "blind-mean")]
    variant: String,
    /// Row id of the query tuple.
    #[arg(long)]
    alpha: Option<usize>,
    /// Imputed attribute among Bob's columns, by name or index.
    #[arg(long)]
    beta: Option<String>,
    /// Padding granularity as a fraction of the row count.
    #[arg(long)]
    pad: Option<f64>,
    /// Set intersection for the plain variants: oprf or dh.
    #[arg(long)]
    psi: Option<String>,
}

fn cmd_vertical(a: &VerticalArgs, cfg: &Settings) -> Result<()> {
    let s = &a.session;
    let (t, radii) = s.load(cfg)?;
    let triples = s.triples(cfg)?;
    let seed = s.seed(cfg);
    let padding = a.pad.or(cfg.pad).unwrap_or(vertical::DEFAULT_PADDING);
    match s.role {
        Role::Alice => {
            let mut ch = s.connect(cfg)?;
            let input = vertical::AliceInput {
                table: &t,
                scheme: &radii.scheme,
                padding,
            };
            vertical::run_alice(&mut ch, &input, triples, seed)?;
            s.finish(&ch)
        }
        Role::Bob => {
            let beta = column(&t, a.beta.as_deref().context("Bob needs --beta")?)?;
            let psi = a.psi.as_deref().or(cfg.psi.as_deref()).unwrap_or("oprf");
            let input = vertical::BobInput {
                table: &t,
                scheme: &radii.scheme,
                alpha: a.alpha.context("Bob needs --alpha")?,
                beta,
                variant: a.variant.parse()?,
                psi: psi.parse()?,
                padding,
            };
            let mut ch = s.connect(cfg)?;
            let out = vertical::run_bob(&mut ch, &input, triples, seed)?;
            report(&t, out);
            s.finish(&ch)
        }
    }
}

#[derive(Args)]
struct TriplesArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Arithmetic triples to write per party.
    #[arg(long)]
    arith: u64,
    /// Boolean word triples to write per party.
    #[arg(long)]
    boolean: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn cmd_triples(a: &TriplesArgs, cfg: &Settings) -> Result<()> {
    let seed = a.seed.or(cfg.seed).unwrap_or_else(rand_seed);
    let d = &a.out_dir;
    write_dealer_files(
        seed,
        Ring::Arith,
        a.arith,
        &d.join("alice_arith.bin"),
        &d.join("bob_arith.bin"),
    )?;
    write_dealer_files(
        seed ^ 1,
        Ring::Bool,
        a.boolean,
        &d.join("alice_bool.bin"),
        &d.join("bob_bool.bin"),
    )?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = Settings::load(cli.config.as_deref())?;
    match &cli.cmd {
        Cmd::Gen(a) => cmd_gen(a, &cfg),
        Cmd::Inject(a) => cmd_inject(a, &cfg),
        Cmd::Radii(a) => cmd_radii(a, &cfg),
        Cmd::Eval(a) => cmd_eval(a, &cfg),
        Cmd::Bench(a) => cmd_bench(a, &cfg),
        Cmd::Horizontal(a) => cmd_horizontal(a, &cfg),
        Cmd::Vertical(a) => cmd_vertical(a, &cfg),
        Cmd::Triples(a) => cmd_triples(a, &cfg),
    }
}
