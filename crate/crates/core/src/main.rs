//! Command-line front end: simulate point-process experiments, sweep
//! parameter grids, sample the area-interaction process, recompute
//! statistics from saved patterns, run oracle cross-checks, and run the
//! edge-effect study.
//!
//! Exit codes: 0 success, 2 precondition failure, 3 oracle mismatch.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use voronoi_proc::aipp::{self, AippParams};
use voronoi_proc::geometry::{build_tessellation, DomainKind};
use voronoi_proc::harness::{
    self, io as hio, EdgeStudyConfig, ExperimentPlan, HarnessError, ProcessSpec,
    StatsRequest, ORACLE_CHECKS,
};
use voronoi_proc::stats;

#[derive(Parser)]
#[command(name = "voronoi-proc", version, about = "Voronoi point-process simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment plan (from flags or a TOML plan file).
    Simulate(SimulateArgs),
    /// Run a volume-power alpha sweep and emit a combined CSV.
    Sweep(SweepArgs),
    /// Sample the area-interaction process (tunes beta when not given).
    Aipp(AippArgs),
    /// Recompute statistics from saved pattern files.
    Stats(StatsArgs),
    /// Run a named brute-force oracle check against the engine.
    Oracle(OracleArgs),
    /// Two-factor ANOVA of edge effects across processes and depth classes.
    EdgeStudy(EdgeStudyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProcessKind {
    V,
    N,
    Aipp,
    Csr,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct ProcessFlags {
    /// Process family.
    #[arg(long, value_enum, default_value = "csr")]
    process: ProcessKind,
    /// Volume-power exponent (v-process).
    #[arg(long)]
    alpha: Option<f64>,
    /// Named selection function (n-process): vanilla, anti-many, anti-few,
    /// anti-6, pro-6, pro-5, anti-5, ...
    #[arg(long)]
    selection: Option<String>,
    /// Interaction base parameter (area-interaction process).
    #[arg(long)]
    gamma1: Option<f64>,
    /// Fixed beta for the area-interaction process (tuned when omitted).
    #[arg(long)]
    beta: Option<f64>,
    /// Birth-death proposals of burn-in for the area-interaction process.
    #[arg(long, default_value_t = 2_000_000)]
    burnin: u64,
}

impl ProcessFlags {
    fn build(&self) -> Result<ProcessSpec, HarnessError> {
        let need = |opt: Option<f64>, flag: &str| {
            opt.ok_or_else(|| {
                HarnessError::Precondition(format!("--{flag} is required for this process"))
            })
        };
        Ok(match self.process {
            ProcessKind::V => ProcessSpec::V {
                alpha: need(self.alpha, "alpha")?,
            },
            ProcessKind::N => ProcessSpec::N {
                selection: self.selection.clone().ok_or_else(|| {
                    HarnessError::Precondition("--selection is required for -n processes".into())
                })?,
            },
            ProcessKind::Aipp => ProcessSpec::Aipp {
                gamma1: need(self.gamma1, "gamma1")?,
                beta: self.beta,
                burnin: self.burnin,
            },
            ProcessKind::Csr => ProcessSpec::Csr,
        })
    }
}

#[derive(Args)]
struct PlanFlags {
    #[command(flatten)]
    process: ProcessFlags,
    #[arg(long, default_value_t = 2000)]
    n_points: usize,
    /// Steps per point; total steps T = steps_per_point * n_points.
    #[arg(long, default_value_t = 12)]
    steps_per_point: u64,
    #[arg(long, default_value_t = 25)]
    replicates: usize,
    /// Seed root; every replicate seed derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "square")]
    domain: DomainArg,
    /// Minimum NN-depth for included cells on bounded domains.
    #[arg(long, default_value_t = 3)]
    depth_filter: u32,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DomainArg {
    Circle,
    Square,
    Torus,
}

impl From<DomainArg> for DomainKind {
    fn from(d: DomainArg) -> DomainKind {
        match d {
            DomainArg::Circle => DomainKind::Circle,
            DomainArg::Square => DomainKind::Square,
            DomainArg::Torus => DomainKind::Torus,
        }
    }
}

impl PlanFlags {
    fn build(&self, name: &str) -> Result<ExperimentPlan, HarnessError> {
        Ok(ExperimentPlan {
            name: name.into(),
            process: self.process.build()?,
            domain: self.domain.into(),
            n_points: self.n_points,
            steps_per_point: self.steps_per_point,
            replicates: self.replicates,
            seed_root: self.seed,
            stats: StatsRequest {
                depth_min: self.depth_filter,
                ..StatsRequest::default()
            },
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML plan file; overrides the individual flags.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Experiment name (artifact file prefix).
    #[arg(long, default_value = "run")]
    name: String,
    #[command(flatten)]
    flags: PlanFlags,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated alpha grid, e.g. "-2,-1.7,...,1".
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    alphas: Vec<f64>,
    #[arg(long, default_value = "sweep")]
    name: String,
    #[command(flatten)]
    flags: PlanFlags,
}

#[derive(Args)]
struct AippArgs {
    #[arg(long)]
    gamma1: f64,
    #[arg(long)]
    beta: Option<f64>,
    /// Target mean point count for beta tuning.
    #[arg(long, default_value_t = 2000)]
    n_points: usize,
    #[arg(long, default_value_t = 2_000_000)]
    burnin: u64,
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.02)]
    tune_tolerance: f64,
    #[arg(long, default_value_t = 3)]
    depth_filter: u32,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct StatsArgs {
    /// Pattern files to recompute statistics from.
    #[arg(long, required = true, num_args = 1..)]
    pattern: Vec<PathBuf>,
    #[arg(long, default_value_t = 3)]
    depth_filter: u32,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct OracleArgs {
    /// One of: cell-areas, adjacency, weights, anova, lens, all.
    #[arg(long, default_value = "all")]
    check: String,
    /// Instance size (point count) where applicable.
    #[arg(long, default_value_t = 32)]
    size: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct EdgeStudyArgs {
    /// Comma-separated named selection functions (n-processes).
    #[arg(long, value_delimiter = ',', default_value = "anti-few,anti-many")]
    selections: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    n_points: usize,
    #[arg(long, default_value_t = 8)]
    steps_per_point: u64,
    #[arg(long, default_value_t = 4)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn exit_code_for(err: &HarnessError) -> u8 {
    match err {
        HarnessError::Precondition(_) | HarnessError::Toml(_) => 2,
        HarnessError::OracleMismatch(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => sweep(args),
        Command::Aipp(args) => aipp_cmd(args),
        Command::Stats(args) => stats_cmd(args),
        Command::Oracle(args) => oracle_cmd(args),
        Command::EdgeStudy(args) => edge_study_cmd(args),
    }
}

fn print_record(record: &harness::ResultRecord, format: Format) -> Result<(), HarnessError> {
    match format {
        Format::Json => {
            let text =
                serde_json::to_string_pretty(record).map_err(HarnessError::Serialize)?;
            println!("{text}");
        }
        Format::Csv => {
            println!("name,seed_root,replicates,mean_r_star,sd_r_star,se_r_star");
            println!(
                "{},{},{},{:.6},{:.6},{:.6}",
                record.plan.name,
                record.plan.seed_root,
                record.replicates.len(),
                record.mean_r_star,
                record.sd_r_star,
                record.se_r_star
            );
        }
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), HarnessError> {
    let plan = match &args.plan {
        Some(path) => ExperimentPlan::from_toml_str(&std::fs::read_to_string(path)?)?,
        None => args.flags.build(&args.name)?,
    };
    let record = harness::run(&plan, args.flags.out_dir.as_deref())?;
    print_record(&record, args.flags.format)
}

fn sweep(args: SweepArgs) -> Result<(), HarnessError> {
    let mut template = args.flags.build(&args.name)?;
    // the sweep overwrites the process per grid point; seed the template with
    // a valid v-process so plan validation passes
    template.process = ProcessSpec::V { alpha: 0.0 };
    let points = harness::alpha_sweep_points(&template, &args.alphas);
    let result = harness::sweep(&points, args.flags.out_dir.as_deref())?;
    println!("alpha,mean_r_star,sd_r_star,se_r_star");
    for row in &result.rows {
        println!(
            "{},{:.6},{:.6},{:.6}",
            row.parameter, row.mean_r_star, row.sd_r_star, row.se_r_star
        );
    }
    for (alpha, error) in &result.failures {
        eprintln!("alpha {alpha}: failed: {error}");
    }
    Ok(())
}

fn aipp_cmd(args: AippArgs) -> Result<(), HarnessError> {
    let beta = match args.beta {
        Some(b) => b,
        None => {
            let mut params = AippParams::new(args.n_points as f64, args.gamma1);
            params.target_count = args.n_points as f64;
            let tuned = aipp::tune_beta(
                &params,
                args.tune_tolerance,
                hio::derive_seed(args.seed, 0, hio::ROLE_TUNE),
            )
            .map_err(|e| match e {
                aipp::AippError::InvalidParams(m) => HarnessError::Precondition(m.into()),
                other => HarnessError::Aipp(other.to_string()),
            })?;
            eprintln!(
                "tuned beta = {:.6} in {} rounds (seed {})",
                tuned.beta, tuned.rounds, args.seed
            );
            tuned.beta
        }
    };
    let plan = ExperimentPlan {
        name: "aipp".into(),
        process: ProcessSpec::Aipp {
            gamma1: args.gamma1,
            beta: Some(beta),
            burnin: args.burnin,
        },
        domain: DomainKind::Square,
        n_points: args.n_points,
        steps_per_point: 0,
        replicates: args.replicates,
        seed_root: args.seed,
        stats: StatsRequest {
            depth_min: args.depth_filter,
            ..StatsRequest::default()
        },
    };
    let record = harness::run(&plan, args.out_dir.as_deref())?;
    print_record(&record, args.format)
}

fn stats_cmd(args: StatsArgs) -> Result<(), HarnessError> {
    if args.format == Format::Csv {
        println!("file,seed,n_points,included,r_star");
    }
    for path in &args.pattern {
        let (config, seed) = hio::read_pattern(path)?;
        let tess = build_tessellation(&config)?;
        let ids = if tess.domain().has_boundary() && args.depth_filter > 0 {
            stats::depth_filter(&tess, args.depth_filter)
                .map_err(|e| HarnessError::Stats(e.to_string()))?
        } else {
            (0..tess.len() as u32).collect()
        };
        if ids.is_empty() {
            return Err(HarnessError::Precondition(format!(
                "{}: depth filter >= {} left no cells",
                path.display(),
                args.depth_filter
            )));
        }
        let areas: Vec<f64> = ids
            .iter()
            .map(|&id| tess.cells()[id as usize].area)
            .collect();
        let r_star =
            stats::thiel_redundancy(&areas).map_err(|e| HarnessError::Stats(e.to_string()))?;
        match args.format {
            Format::Csv => println!(
                "{},{},{},{},{:.6}",
                path.display(),
                seed.map(|s| s.to_string()).unwrap_or_default(),
                config.points.len(),
                ids.len(),
                r_star
            ),
            Format::Json => {
                let epmf = stats::nn_epmf(&tess, &ids)
                    .map_err(|e| HarnessError::Stats(e.to_string()))?;
                let value = serde_json::json!({
                    "file": path.display().to_string(),
                    "seed": seed,
                    "n_points": config.points.len(),
                    "included": ids.len(),
                    "r_star": r_star,
                    "epmf": epmf,
                });
                println!("{}", serde_json::to_string_pretty(&value).unwrap());
            }
        }
    }
    Ok(())
}

fn oracle_cmd(args: OracleArgs) -> Result<(), HarnessError> {
    let checks: Vec<&str> = if args.check == "all" {
        ORACLE_CHECKS.to_vec()
    } else {
        vec![args.check.as_str()]
    };
    let mut first_failure = None;
    for check in checks {
        let report = harness::oracle(check, args.size, args.seed)?;
        println!(
            "{}: {} ({})",
            report.check,
            if report.pass { "pass" } else { "FAIL" },
            report.detail
        );
        if !report.pass {
            if let Some(case) = &report.worst_case {
                eprintln!("worst case: {case}");
            }
            first_failure.get_or_insert(report);
        }
    }
    match first_failure {
        Some(report) => Err(HarnessError::OracleMismatch(Box::new(report))),
        None => Ok(()),
    }
}

fn edge_study_cmd(args: EdgeStudyArgs) -> Result<(), HarnessError> {
    let cfg = EdgeStudyConfig {
        processes: args
            .selections
            .iter()
            .map(|s| ProcessSpec::N {
                selection: s.clone(),
            })
            .collect(),
        depth_classes: harness::default_depth_classes(),
        n_points: args.n_points,
        steps_per_point: args.steps_per_point,
        replicates: args.replicates,
        seed_root: args.seed,
    };
    let result = harness::edge_study(&cfg)?;
    println!(
        "factor A (process): F = {:.3}, p = {:.4}{}",
        result.anova.f_a,
        result.anova.p_a,
        if result.significant.0 { " *" } else { "" }
    );
    println!(
        "factor B (depth):   F = {:.3}, p = {:.4}{}",
        result.anova.f_b,
        result.anova.p_b,
        if result.significant.1 { " *" } else { "" }
    );
    println!(
        "interaction:        F = {:.3}, p = {:.4}{}",
        result.anova.f_ab,
        result.anova.p_ab,
        if result.significant.2 { " *" } else { "" }
    );
    for (a, label) in result.process_labels.iter().enumerate() {
        for (b, class) in result.class_labels.iter().enumerate() {
            let xs = &result.responses[a][b];
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            println!("  {label} depth {class}: mean R* = {mean:.4}");
        }
    }
    if let Some(dir) = &args.out_dir {
        hio::write_json(&dir.join("edge_study.json"), &result)?;
    }
    Ok(())
}
