//! `bumpforge` command-line front end.

mod cache;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use bumpforge::ansatz_norms::{Ansatz, AnsatzBounds, Bump, SamplingPlan};
use bumpforge::diagnostics::{
    bootstrap_exponents, check_green_decay, check_lattice_sandwich, check_pairwise_decay, decay_exponent_fit,
    scaling_study, DecayMode, GreenDecayConfig, LemmaReport, PairwiseConfig, SandwichConfig, ScalingConfig, Table,
};
use bumpforge::lattice::build_lattice;
use bumpforge::profile::{fd_laplacian, ExactExample};
use bumpforge::reduced::{solve_positions, NewtonSettings, PositionSettings, ReducedProblem};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use config::{Format, RunConfig};
use output::Emitter;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration rejected: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] bumpforge::Error),
    #[error("check failed: {0}")]
    Failed(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bumpforge",
    version,
    about = "Multi-bump constructions on lattices and numerical checks of their estimates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Lattice parameter l (overrides problem.l).
    #[arg(long, global = true)]
    l: Option<u64>,
    /// Finite lattice size m (overrides problem.m).
    #[arg(long, global = true)]
    m: Option<usize>,
    /// Weight exponent τ (overrides problem.tau).
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Shorthand for --format json.
    #[arg(long, global = true, conflicts_with = "format")]
    json: bool,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the summary on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lattice, constants, reduced solve, scales and centers.
    Construct,
    /// Property checks of the decay and lattice-sum lemmas.
    Verify {
        #[arg(value_enum)]
        lemma: Lemma,
        /// Samples for A1, or per region for A3.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Error-norm decay in λ over a list of l values.
    Scaling {
        #[arg(long = "ls", value_delimiter = ',', default_values_t = [4u64, 8, 16])]
        ls: Vec<u64>,
    },
    /// Finite-difference residual of the closed-form example.
    Example {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
    },
    /// Decay-exponent fit of a solution candidate and the bootstrap sequence.
    Decay {
        #[arg(long, value_enum, default_value_t = Target::Ansatz)]
        target: Target,
        #[arg(long, value_enum, default_value_t = Mode::Directional)]
        mode: Mode,
        #[arg(long)]
        r_min: Option<f64>,
        #[arg(long)]
        r_max: Option<f64>,
        #[arg(long, default_value_t = 9)]
        count: usize,
        #[arg(long, default_value_t = 0.1)]
        tau0: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Lemma {
    #[value(name = "A1", alias = "a1", alias = "pairwise")]
    A1,
    #[value(name = "A2", alias = "a2", alias = "green")]
    A2,
    #[value(name = "A3", alias = "a3", alias = "sandwich")]
    A3,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    Ansatz,
    ExactExample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Directional,
    Spherical,
}

struct Ctx {
    cfg: RunConfig,
    emitter: Emitter,
    quiet: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn resolve(cli: &Cli, default_format: Format) -> Result<Ctx, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(l) = cli.l {
        cfg.problem.l = l;
    }
    if let Some(m) = cli.m {
        cfg.problem.m = Some(m);
        cfg.problem.window = None;
    }
    if let Some(t) = cli.tau {
        cfg.problem.tau = t;
    }
    if let Some(s) = cli.seed {
        cfg.solver.seed = s;
    }
    if cfg.problem.m.is_none() && cfg.problem.window.is_none() {
        cfg.problem.m = Some(2);
    }
    let format = if cli.json {
        Format::Json
    } else {
        cli.format.or(cfg.output.format).unwrap_or(default_format)
    };
    cfg.output.format = Some(format);
    if let Some(p) = &cli.out {
        cfg.output.path = Some(p.display().to_string());
    }
    cfg.validate()?;
    let emitter = Emitter {
        format,
        path: cfg.output.path.as_ref().map(PathBuf::from),
    };
    Ok(Ctx {
        cfg,
        emitter,
        quiet: cli.quiet,
    })
}

fn require_local_model(cfg: &RunConfig, what: &str) -> Result<(), CliError> {
    if cfg.profile.exact_example {
        return Err(CliError::Config(format!(
            "{what} needs the local coefficient model, not exact_example"
        )));
    }
    Ok(())
}

fn sampling_plan(cfg: &RunConfig) -> SamplingPlan {
    let mut plan = SamplingPlan {
        seed: cfg.solver.seed,
        ..SamplingPlan::default()
    };
    for _ in 0..cfg.solver.sampling_level {
        plan = plan.refined();
    }
    plan
}

fn newton(cfg: &RunConfig) -> NewtonSettings {
    NewtonSettings {
        grad_tol: cfg.solver.grad_tol,
        max_iterations: cfg.solver.max_iterations,
        ..NewtonSettings::default()
    }
}

fn construct(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    require_local_model(cfg, "construct")?;
    let profile = cfg.profile()?;
    let lat = build_lattice(&cfg.lattice_spec())?;
    let consts = cache::constants(cfg.problem.n, cfg.problem.beta, profile.sum_a())?;
    let sol = ReducedProblem::from_lattice(&lat, consts.clone())?.solve(&newton(cfg))?;
    let positions = if cfg.solver.positions {
        let settings = PositionSettings {
            rel_tol: cfg.solver.position_rel_tol,
            max_iterations: cfg.solver.position_max_iterations,
            ..PositionSettings::for_lattice(&lat)
        };
        let kl = profile.scaled(lat.lambda());
        Some(solve_positions(&lat, &kl, &profile.a, &sol.scales, &consts, &settings)?)
    } else {
        None
    };
    let bumps: Vec<Bump> = (0..lat.len())
        .map(|i| Bump {
            center: match &positions {
                Some(p) => lat.point(i).iter().zip(&p.offsets[i]).map(|(x, o)| x + o).collect(),
                None => lat.point(i).to_vec(),
            },
            scale: sol.scales[i],
            eps: 0.0,
        })
        .collect();
    let ansatz = Ansatz::new(lat.clone(), bumps, AnsatzBounds::default())?;

    let k = cfg.problem.k;
    let mut cols: Vec<String> = vec!["index".into()];
    cols.extend((1..=k).map(|h| format!("x{h}")));
    cols.extend(["scale", "b", "offset"].map(String::from));
    let mut table = Table {
        columns: cols,
        rows: Vec::new(),
    };
    for i in 0..lat.len() {
        let mut row = vec![i as f64];
        row.extend(&lat.point(i)[..k]);
        let off = positions
            .as_ref()
            .map(|p| p.offsets[i].iter().map(|v| v * v).sum::<f64>().sqrt())
            .unwrap_or(0.0);
        row.extend([sol.scales[i], sol.b[i], off]);
        table.push(row);
    }
    ctx.note(format!(
        "{} bumps, lambda = {}, b in [{:.6}, {:.6}], Hessian max eigenvalue {:.4}, max offset {}",
        lat.len(),
        lat.lambda(),
        sol.bounds.0,
        sol.bounds.1,
        sol.hessian_max_eig,
        positions
            .as_ref()
            .map(|p| format!("{:.3e}", p.max_offset))
            .unwrap_or_else(|| "not computed".into()),
    ));
    let report = json!({
        "command": "construct",
        "config": cfg,
        "lattice": lat.describe(),
        "constants": consts,
        "reduced": sol,
        "positions": positions,
        "ansatz": ansatz.describe(),
    });
    ctx.emitter.emit(&report, &table)
}

fn verify(ctx: &Ctx, lemma: Lemma, samples: Option<usize>) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let n = cfg.problem.n;
    let seed = cfg.solver.seed;
    let mut reports: Vec<LemmaReport> = Vec::new();
    if matches!(lemma, Lemma::A1 | Lemma::All) {
        reports.push(check_pairwise_decay(&PairwiseConfig {
            n,
            samples: samples.unwrap_or(10_000),
            seed,
            ..PairwiseConfig::default()
        }));
    }
    if matches!(lemma, Lemma::A2 | Lemma::All) {
        for tau in [1.0, 3.0, 10.0] {
            reports.push(check_green_decay(&GreenDecayConfig::new(n, tau))?);
        }
    }
    if matches!(lemma, Lemma::A3 | Lemma::All) {
        reports.push(check_lattice_sandwich(&SandwichConfig {
            n,
            k: cfg.problem.k,
            beta: cfg.problem.beta,
            samples_per_region: samples.unwrap_or(500),
            seed,
            ..SandwichConfig::default()
        })?);
    }
    for r in &reports {
        ctx.note(format!(
            "{} {}: {}/{} passes, worst ratio {:.4}, fitted constant {:.4}",
            if r.passed { "PASS" } else { "FAIL" },
            r.lemma,
            r.passes,
            r.samples,
            r.worst_ratio,
            r.fitted_constant
        ));
    }
    let passed = reports.iter().all(|r| r.passed);
    let table = if reports.len() == 1 {
        reports[0].table.clone()
    } else {
        let mut t = Table::new(&[
            "report",
            "samples",
            "passes",
            "worst_ratio",
            "fitted_constant",
            "passed",
        ]);
        for (i, r) in reports.iter().enumerate() {
            t.push(vec![
                i as f64,
                r.samples as f64,
                r.passes as f64,
                r.worst_ratio,
                r.fitted_constant,
                f64::from(u8::from(r.passed)),
            ]);
        }
        t
    };
    let report = json!({ "command": "verify", "config": cfg, "passed": passed, "reports": reports });
    ctx.emitter.emit(&report, &table)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed("a hard inequality failed".into()))
    }
}

fn scaling(ctx: &Ctx, ls: Vec<u64>) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    require_local_model(cfg, "scaling")?;
    let m = cfg
        .problem
        .m
        .ok_or_else(|| CliError::Config("scaling needs a finite lattice (problem.m)".into()))?;
    if ls.len() < 2 || ls.contains(&0) {
        return Err(CliError::Config("scaling needs at least two positive l values".into()));
    }
    let profile = cfg.profile()?;
    let consts = cache::constants(cfg.problem.n, cfg.problem.beta, profile.sum_a())?;
    let study = scaling_study(
        &ScalingConfig {
            profile,
            m,
            tau: cfg.problem.tau,
            ls,
            plan: sampling_plan(cfg),
        },
        &consts,
    )?;
    match study.slope {
        Some(s) => ctx.note(format!("slope {s:.4}, target {:.4}", study.target)),
        None => ctx.note("all norms vanish: exact-zero case, slope undefined"),
    }
    let report = json!({ "command": "scaling", "config": cfg, "study": study });
    ctx.emitter.emit(&report, &study.table())?;
    if study.slope.is_some() && !study.within_band {
        return Err(CliError::Failed(format!(
            "slope {:.4} outside [{:.4}, {:.4}]",
            study.slope.unwrap_or(f64::NAN),
            1.2 * study.target,
            0.8 * study.target
        )));
    }
    Ok(())
}

fn example(ctx: &Ctx, n: Option<usize>, k: Option<usize>, points: usize, h: f64) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let (n, k) = (n.unwrap_or(cfg.problem.n), k.unwrap_or(cfg.problem.k));
    let ex = ExactExample::new(n, k).map_err(|e| CliError::Config(e.to_string()))?;
    if h.is_nan() || h <= 0.0 || points == 0 {
        return Err(CliError::Config("need h > 0 and at least one point".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed);
    let mut table = Table::new(&["point", "z_norm", "laplacian", "rhs", "rel_err"]);
    let mut worst = 0.0f64;
    for i in 0..points {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let lap = fd_laplacian(|y| ex.u(y), &x, h);
        let rhs = -ex.k_value(&x) * ex.u(&x).powf(ex.exponent());
        let rel = ((lap - rhs) / rhs).abs();
        worst = worst.max(rel);
        let z = x[k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        table.push(vec![i as f64, z, lap, rhs, rel]);
    }
    let passed = worst <= 1e-5;
    ctx.note(format!("n = {n}, k = {k}: max relative error {worst:.3e} at h = {h}"));
    let report = json!({
        "command": "example",
        "config": cfg,
        "n": n,
        "k": k,
        "h": h,
        "points": points,
        "k_limit": ex.k_limit(),
        "max_rel_err": worst,
        "passed": passed,
    });
    ctx.emitter.emit(&report, &table)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed(format!("max relative error {worst:.3e} > 1e-5")))
    }
}

struct DecayArgs {
    target: Target,
    mode: Mode,
    r_min: Option<f64>,
    r_max: Option<f64>,
    count: usize,
    tau0: f64,
}

fn decay(ctx: &Ctx, args: DecayArgs) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let (n, k) = (cfg.problem.n, cfg.problem.k);
    let target = if cfg.profile.exact_example {
        Target::ExactExample
    } else {
        args.target
    };
    let radii = |lo: f64, hi: f64| -> Result<Vec<f64>, CliError> {
        let (lo, hi) = (args.r_min.unwrap_or(lo), args.r_max.unwrap_or(hi));
        if args.count < 4 || !(lo > 0.0 && hi > lo) {
            return Err(CliError::Config(
                "need 0 < r_min < r_max and at least four radii".into(),
            ));
        }
        Ok((0..args.count)
            .map(|i| lo * (hi / lo).powf(i as f64 / (args.count - 1) as f64))
            .collect())
    };
    let mode = |base: Vec<f64>| {
        let mut direction = vec![0.0; n];
        direction[k] = 1.0;
        match args.mode {
            Mode::Directional => DecayMode::Directional { base, direction },
            Mode::Spherical => DecayMode::Spherical { center: base, order: 8 },
        }
    };
    let profile = match target {
        Target::ExactExample => {
            let ex = ExactExample::new(n, k).map_err(|e| CliError::Config(e.to_string()))?;
            decay_exponent_fit(|x| ex.u(x), n, k, &radii(10.0, 1e4)?, &mode(vec![0.0; n]))?
        }
        Target::Ansatz => {
            let p = cfg.profile()?;
            let lat = build_lattice(&cfg.lattice_spec())?;
            let consts = cache::constants(n, cfg.problem.beta, p.sum_a())?;
            let sol = ReducedProblem::from_lattice(&lat, consts)?.solve(&newton(cfg))?;
            let ansatz = Ansatz::centered(lat.clone(), &sol.scales, AnsatzBounds::default())?;
            let reach = 10.0 * lat.spacing() * (lat.spec().side() + 1) as f64;
            let base = lat.point(lat.len() / 2).to_vec();
            decay_exponent_fit(|x| ansatz.w_plain(x), n, k, &radii(reach, 1e3 * reach)?, &mode(base))?
        }
    };
    let boot = bootstrap_exponents(n, k, args.tau0).map_err(|e| CliError::Config(e.to_string()))?;
    ctx.note(format!(
        "exponent {:.4} (log correction {}), thresholds {} and {}, verdict {:?}; bootstrap reaches {} in {} steps",
        profile.exponent,
        profile.log_correction,
        profile.upper_threshold,
        profile.claim_threshold,
        profile.verdict,
        boot.claim_exponent,
        boot.steps
    ));
    let mut table = Table::new(&["radius", "value"]);
    for (r, v) in profile.radii.iter().zip(&profile.values) {
        table.push(vec![*r, *v]);
    }
    let report = json!({
        "command": "decay",
        "config": cfg,
        "target": format!("{target:?}"),
        "profile": profile,
        "bootstrap": boot,
    });
    ctx.emitter.emit(&report, &table)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let default_format = match cli.command {
        Command::Scaling { .. } => Format::Csv,
        _ => Format::Json,
    };
    let ctx = resolve(&cli, default_format)?;
    match cli.command {
        Command::Construct => construct(&ctx),
        Command::Verify { lemma, samples } => verify(&ctx, lemma, samples),
        Command::Scaling { ls } => scaling(&ctx, ls),
        Command::Example { n, k, points, h } => example(&ctx, n, k, points, h),
        Command::Decay {
            target,
            mode,
            r_min,
            r_max,
            count,
            tau0,
        } => decay(
            &ctx,
            DecayArgs {
                target,
                mode,
                r_min,
                r_max,
                count,
                tau0,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
