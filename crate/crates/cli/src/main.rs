use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use discwalk::harness::{
    certify_walk, parse_grid, parse_key_values, parse_seeds, results_csv, run_experiment_records, run_single,
    walk_config_for, Algorithm, ExperimentConfig, InstanceSource,
};
use discwalk::instance::{
    brute_force_min_disc, canonicalize, gen_random_regular_with, parse_instance, write_instance, SetSystem, SignModel,
};
use discwalk::walk::{run_walk, write_coloring, write_telemetry, SamplerMode, WalkConfig};
use discwalk::Error;

#[derive(Parser, Debug)]
#[command(name = "discwalk", version, about = "Low-discrepancy colorings of bounded-degree set systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random instance with every column of degree k.
    Gen(GenArgs),
    /// Color one instance with one algorithm.
    Solve(RunArgs),
    /// Run a grid of algorithms, instances and seeds into a results CSV.
    Bench(RunArgs),
    /// Run a walk (sub-isotropic sampler by default) and check every
    /// monitored invariant.
    Verify(RunArgs),
    /// Exact minimum discrepancy by enumeration (small instances).
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Number of rows; defaults to n.
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw each sign uniformly instead of using +1.
    #[arg(long)]
    random_signs: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    input: PathBuf,
}

/// Options shared by `solve`, `bench` and `verify`. Each may also come from a
/// `--config` file of `key=value` lines using the same names; flags win.
#[derive(Args, Debug, Default)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// One algorithm, or a comma list for `bench`.
    #[arg(long)]
    alg: Option<String>,
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// `N`, `a..b` or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    /// A single seed; overrides `--seeds`.
    #[arg(long)]
    seed: Option<u64>,
    /// Cells `NxK,...` for `bench`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lambda_const: Option<f64>,
    #[arg(long)]
    b0_const: Option<f64>,
    #[arg(long)]
    ct_const: Option<f64>,
    #[arg(long)]
    freeze: Option<usize>,
    #[arg(long)]
    guard: Option<f64>,
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Telemetry file (`solve`, `verify`) or directory (`bench`).
    #[arg(long)]
    telemetry: Option<PathBuf>,
}

/// Failure kinds mapped to exit codes.
enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Parse { .. } | Error::InvalidInstance(_) | Error::TooLarge { .. } => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Run options with config-file values filled in under the flags.
struct Resolved {
    args: RunArgs,
    file: BTreeMap<String, String>,
}

impl Resolved {
    fn new(args: RunArgs) -> CliResult<Self> {
        let file = match &args.config {
            Some(path) => parse_key_values(&fs::read_to_string(path)?)?,
            None => BTreeMap::new(),
        };
        let known = [
            "alg", "sampler", "n", "k", "seeds", "seed", "grid", "dt", "batch", "lambda-const", "b0-const",
            "ct-const", "freeze", "guard", "strict", "input", "out", "telemetry",
        ];
        if let Some(key) = file.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Failure::Usage(format!("unknown config key `{key}`")));
        }
        Ok(Self { args, file })
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Failure::Usage(format!("bad value `{v}` for config key `{key}`"))),
            None => Ok(None),
        }
    }

    fn string(&self, flag: &Option<String>, key: &str) -> Option<String> {
        flag.clone().or_else(|| self.file.get(key).cloned())
    }

    fn path(&self, flag: &Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.clone().or_else(|| self.file.get(key).map(PathBuf::from))
    }

    fn walk_config(&self) -> CliResult<WalkConfig> {
        let a = &self.args;
        let mut cfg = WalkConfig::default();
        if let Some(s) = self.string(&a.sampler, "sampler") {
            cfg.sampler = match s.as_str() {
                "projection" => SamplerMode::Projection,
                "sdp" => SamplerMode::Sdp,
                other => return Err(Failure::Usage(format!("unknown sampler `{other}`"))),
            };
        }
        if let Some(v) = self.get(a.dt, "dt")? {
            cfg.dt = v;
        }
        if let Some(v) = self.get(a.batch, "batch")? {
            cfg.batch = v;
        }
        if let Some(v) = self.get(a.lambda_const, "lambda-const")? {
            cfg.lambda_const = v;
        }
        if let Some(v) = self.get(a.b0_const, "b0-const")? {
            cfg.b0_const = v;
        }
        if let Some(v) = self.get(a.ct_const, "ct-const")? {
            cfg.ct_const = v;
        }
        if let Some(v) = self.get(a.freeze, "freeze")? {
            cfg.freeze = Some(v);
        }
        if let Some(v) = self.get(a.guard, "guard")? {
            cfg.guard = v;
        }
        cfg.strict = a.strict || self.get(None, "strict")?.unwrap_or(false);
        cfg.validate()?;
        Ok(cfg)
    }

    fn seeds(&self) -> CliResult<Vec<u64>> {
        if let Some(s) = self.get(self.args.seed, "seed")? {
            return Ok(vec![s]);
        }
        match self.string(&self.args.seeds, "seeds") {
            Some(s) => Ok(parse_seeds(&s)?),
            None => Ok(vec![0]),
        }
    }

    fn algorithms(&self, default: Algorithm) -> CliResult<Vec<Algorithm>> {
        match self.string(&self.args.alg, "alg") {
            Some(s) => Ok(s.split(',').map(|a| a.trim().parse()).collect::<Result<_, _>>()?),
            None => Ok(vec![default]),
        }
    }

    /// The input file if given, otherwise a generated `n x n` instance.
    fn instance(&self, seed: u64) -> CliResult<SetSystem> {
        if let Some(path) = self.path(&self.args.input, "input") {
            return Ok(parse_instance(&fs::read_to_string(path)?)?);
        }
        let n = self.get(self.args.n, "n")?;
        let k = self.get(self.args.k, "k")?;
        match (n, k) {
            (Some(n), Some(k)) => Ok(gen_random_regular_with(n, n, k, seed, SignModel::Positive)?),
            _ => Err(Failure::Usage("need --input or both --n and --k".into())),
        }
    }
}

fn write_out(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn gen(args: GenArgs) -> CliResult<()> {
    let model = if args.random_signs { SignModel::Random } else { SignModel::Positive };
    let sys = gen_random_regular_with(args.rows.unwrap_or(args.n), args.n, args.k, args.seed, model)?;
    write_out(args.out.as_deref(), &write_instance(&sys))
}

fn solve(args: RunArgs) -> CliResult<()> {
    let r = Resolved::new(args)?;
    let seeds = r.seeds()?;
    let &[seed] = seeds.as_slice() else {
        return Err(Failure::Usage("solve takes a single seed".into()));
    };
    let algs = r.algorithms(Algorithm::Walk)?;
    let &[alg] = algs.as_slice() else {
        return Err(Failure::Usage("solve takes a single algorithm".into()));
    };
    let sys = r.instance(seed)?;
    let base = r.walk_config()?;

    let record = run_single(alg, &sys, seed, &base);
    if let (Some(path), Some(w)) = (r.path(&r.args.telemetry, "telemetry"), &record.walk) {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        write_telemetry(&mut f, &w.telemetry)?;
    }
    let row = &record.row;
    eprintln!("{}", row.csv_line());
    if row.disc.is_none() {
        return Err(Failure::Run(row.status.clone()));
    }
    if let (Some(path), Some(coloring)) = (r.path(&r.args.out, "out"), &record.coloring) {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        write_coloring(&mut f, coloring)?;
    }
    if row.status.starts_with("failed") || (base.strict && row.guard_tripped) {
        return Err(Failure::Run(row.status.clone()));
    }
    Ok(())
}

fn bench(args: RunArgs) -> CliResult<()> {
    let r = Resolved::new(args)?;
    let seeds = r.seeds()?;
    let source = if r.path(&r.args.input, "input").is_some() {
        InstanceSource::Fixed(r.instance(0)?)
    } else if let Some(g) = r.string(&r.args.grid, "grid") {
        InstanceSource::Generated(parse_grid(&g)?)
    } else {
        match (r.get(r.args.n, "n")?, r.get(r.args.k, "k")?) {
            (Some(n), Some(k)) => InstanceSource::Generated(vec![(n, k)]),
            _ => return Err(Failure::Usage("need --grid, --input, or both --n and --k".into())),
        }
    };
    let cfg = ExperimentConfig {
        algorithms: r.algorithms(Algorithm::Walk)?,
        source,
        seeds,
        walk: r.walk_config()?,
        telemetry_dir: r.path(&r.args.telemetry, "telemetry"),
    };
    let records = run_experiment_records(&cfg)?;
    let rows: Vec<_> = records.into_iter().map(|rec| rec.row).collect();
    write_out(r.path(&r.args.out, "out").as_deref(), &results_csv(&rows))?;
    let failed = rows.iter().filter(|row| row.status.starts_with("failed")).count();
    if failed > 0 {
        return Err(Failure::Run(format!("{failed} of {} runs failed", rows.len())));
    }
    Ok(())
}

fn verify(args: RunArgs) -> CliResult<()> {
    let r = Resolved::new(args)?;
    let seeds = r.seeds()?;
    let algs = r.algorithms(Algorithm::Walk)?;
    let &[alg @ (Algorithm::Walk | Algorithm::WalkSimple)] = algs.as_slice() else {
        return Err(Failure::Usage("verify runs a single walk algorithm".into()));
    };
    let mut base = r.walk_config()?;
    if r.string(&r.args.sampler, "sampler").is_none() {
        // Certification uses the sub-isotropic sampler unless told otherwise.
        base.sampler = SamplerMode::Sdp;
    }
    let mut all_passed = true;
    for seed in seeds {
        let sys = r.instance(seed)?;
        let inst = canonicalize(&sys);
        let outcome = run_walk(&inst, &walk_config_for(&base, alg, seed))?;
        if let Some(path) = r.path(&r.args.telemetry, "telemetry") {
            let mut f = std::io::BufWriter::new(fs::File::create(path)?);
            write_telemetry(&mut f, &outcome.telemetry)?;
        }
        for c in certify_walk(&outcome) {
            all_passed &= c.passed;
            println!("seed {seed} {:<18} {}  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
        }
    }
    if all_passed {
        Ok(())
    } else {
        Err(Failure::Run("some invariants failed".into()))
    }
}

fn oracle(args: OracleArgs) -> CliResult<()> {
    let sys = parse_instance(&fs::read_to_string(&args.input)?)?;
    println!("{}", brute_force_min_disc(&sys)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `discwalk help` for usage");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
