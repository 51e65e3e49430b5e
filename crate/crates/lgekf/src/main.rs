//! Command-line front end: Monte Carlo experiment runner, property
//! verification, and single-trajectory export.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 property failure in `verify`.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use lgekf::groups;
use lgekf::harness::{self, ExperimentConfig, HarnessError};
use lgekf::ins::InsModel;
use lgekf::lie::GroupDescriptor;
use lgekf::sim;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_PROPERTY: u8 = 4;

#[derive(Parser)]
#[command(
    name = "lgekf",
    version,
    about = "Invariant extended Kalman filtering on matrix Lie groups: \
             GNSS-aided INS Monte Carlo experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment described by a JSON config file.
    Run {
        /// JSON experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory for CSV/JSON artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the worker-thread count (0 = one per core).
        #[arg(long)]
        workers: Option<usize>,
        /// Override the filter variant list, e.g. L-FO,R-FO.
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<String>>,
    },
    /// Run the property suites (group identities, filter equivalence) and
    /// exit nonzero on failure.
    Verify {
        /// Seed for the randomized checks.
        #[arg(long, default_value_t = 0x1E_EF)]
        seed: u64,
        /// Monte Carlo trials for the equivalence suite.
        #[arg(long, default_value_t = 2)]
        trials: usize,
    },
    /// Simulate one ground-truth trajectory and dump it as CSV.
    Simulate {
        /// Optional JSON experiment configuration (trajectory and noise
        /// sections are used).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Trial index within the seed.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            trials,
            seed,
            out,
            workers,
            variants,
        } => cmd_run(config, trials, seed, out, workers, variants),
        Command::Verify { seed, trials } => cmd_verify(seed, trials),
        Command::Simulate {
            config,
            seed,
            trial,
            out,
        } => cmd_simulate(config, seed, trial, out),
    }
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })?;
    serde_json::from_str(&text).map_err(|e| {
        eprintln!("error: cannot parse {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })
}

fn harness_exit(err: &HarnessError) -> ExitCode {
    match err {
        HarnessError::Config(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_NUMERICAL),
    }
}

fn cmd_run(
    config: PathBuf,
    trials: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    variants: Option<Vec<String>>,
) -> ExitCode {
    let mut cfg = match load_config(&config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(dir) = out {
        cfg.output.directory = Some(dir);
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(v) = variants {
        cfg.filters.variants = v;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let started = Instant::now();
    let result = match harness::run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return harness_exit(&e);
        }
    };
    for line in harness::format_summary(&result) {
        println!("{line}");
    }
    println!(
        "{} trials x {} variants in {:.1} s",
        cfg.trials,
        result.variants.len(),
        started.elapsed().as_secs_f64()
    );
    if let Some(dir) = &cfg.output.directory {
        println!("artifacts written to {}", dir.display());
    }
    ExitCode::SUCCESS
}

fn cmd_simulate(
    config: Option<PathBuf>,
    seed: Option<u64>,
    trial: u64,
    out: Option<PathBuf>,
) -> ExitCode {
    let mut cfg = match config {
        Some(path) => match load_config(&path) {
            Ok(c) => c,
            Err(code) => return code,
        },
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let model = InsModel::new(cfg.noise.clone());
    let record = sim::simulate_truth(&cfg.trajectory, &model, cfg.master_seed, trial);
    let write = |w: &mut dyn Write| sim::export_truth_csv(&record, w);
    let io_result = match &out {
        Some(path) => fs::File::create(path)
            .and_then(|f| {
                let mut buf = std::io::BufWriter::new(f);
                write(&mut buf)?;
                buf.flush()
            })
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).map_err(|e| format!("cannot write to stdout: {e}"))
        }
    };
    if let Err(msg) = io_result {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    ExitCode::SUCCESS
}

// ---------------------------------------------------------------------------
// verify

struct Suite {
    failures: usize,
    numerical: bool,
}

impl Suite {
    fn new() -> Self {
        Self {
            failures: 0,
            numerical: false,
        }
    }

    fn report(&mut self, name: &str, ok: bool, detail: &str) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} {name}: {detail}");
        if !ok {
            self.failures += 1;
        }
    }
}

fn cmd_verify(seed: u64, trials: usize) -> ExitCode {
    let mut suite = Suite::new();
    let mut rng = StdRng::seed_from_u64(seed);

    for group in [
        groups::so3(),
        groups::se23(),
        groups::vector_group(3),
        groups::navigation_group(),
    ] {
        verify_group_identities(&mut suite, &group, &mut rng);
    }
    verify_equivalence(&mut suite, seed, trials);

    if suite.numerical {
        ExitCode::from(EXIT_NUMERICAL)
    } else if suite.failures > 0 {
        ExitCode::from(EXIT_PROPERTY)
    } else {
        println!("all property suites passed");
        ExitCode::SUCCESS
    }
}

fn random_algebra(group: &GroupDescriptor, rng: &mut StdRng) -> DVector<f64> {
    DVector::from_fn(group.dim(), |_, _| rng.gen_range(-0.8..0.8))
}

fn verify_group_identities(suite: &mut Suite, group: &GroupDescriptor, rng: &mut StdRng) {
    const CASES: usize = 1000;
    const TOL: f64 = 1e-9;
    let mut worst: f64 = 0.0;
    let started = Instant::now();
    for _ in 0..CASES {
        let xi = random_algebra(group, rng);
        let eta = random_algebra(group, rng);
        let checks = (|| -> Result<[f64; 5], lgekf::lie::LieError> {
            let g = group.exp(&xi)?;
            let h = group.exp(&eta)?;
            let roundtrip = (group.log(&g)? - &xi).norm();
            let hat_vee = (group.vee(&group.hat(&xi)?) - &xi).norm();
            let gh = group.compose(&g, &h)?;
            let hom = (group.adjoint(&gh)? - group.adjoint(&g)? * group.adjoint(&h)?).norm();
            let jac = (group.jac_left(&xi)? - group.adjoint(&g)? * group.jac_right(&xi)?).norm();
            let ginv = group.inverse(&g)?;
            let membership = group
                .membership_residual(gh.matrix())
                .max(group.membership_residual(ginv.matrix()));
            Ok([roundtrip, hat_vee, hom, jac, membership])
        })();
        match checks {
            Ok(residuals) => {
                for r in residuals {
                    worst = worst.max(r);
                }
            }
            Err(e) => {
                suite.report(
                    &format!("group identities [{}]", group.name()),
                    false,
                    &format!("operation failed: {e}"),
                );
                suite.numerical = true;
                return;
            }
        }
    }
    suite.report(
        &format!("group identities [{}]", group.name()),
        worst < TOL,
        &format!(
            "{CASES} cases, worst residual {worst:.2e} (tol {TOL:.0e}), {:.2} s",
            started.elapsed().as_secs_f64()
        ),
    );
}

fn verify_equivalence(suite: &mut Suite, seed: u64, trials: usize) {
    let mut cfg = ExperimentConfig {
        trials,
        master_seed: seed,
        ..ExperimentConfig::default()
    };
    cfg.filters.variants = vec![
        "L-FO".into(),
        "R-FO".into(),
        "L-1O".into(),
        "R-1O".into(),
        "L-0O".into(),
        "R-0O".into(),
    ];
    cfg.output.directory = None;
    let result = match harness::run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => {
            suite.report("filter equivalence", false, &format!("run failed: {e}"));
            suite.numerical = true;
            return;
        }
    };
    let fo_max = result.pairwise_max[(0, 1)];
    suite.report(
        "full-order equivalence [L-FO vs R-FO]",
        fo_max < 1e-6 && result.divergences.is_empty(),
        &format!(
            "max total error {fo_max:.2e} over {trials} trials (tol 1e-6), {} divergences",
            result.divergences.len()
        ),
    );
    let first = result.pairwise_mae[(2, 3)];
    let zero = result.pairwise_mae[(4, 5)];
    suite.report(
        "reduced-order separation [L-1O vs R-1O, L-0O vs R-0O]",
        first > 1e-3 && zero > 1e-3,
        &format!("MAE {first:.2e} / {zero:.2e} (both must exceed 1e-3)"),
    );
}
