//! Experiment orchestration: declarative plans, replicate fan-out with
//! derived seeds, statistic collection, parameter sweeps, edge-effect
//! studies, and the brute-force oracle checks.

pub mod io;
mod oracle;

pub use oracle::{oracle, OracleReport, ORACLE_CHECKS};

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aipp::{self, AippParams};
use crate::dynamics::{self, NamedSelection, ProcessState, SelectionSpec};
use crate::geometry::{build_tessellation, Configuration, DomainKind, GeometryError, Point};
use crate::stats::{self, CurveData, Epmf};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization failed: {0}")]
    Serialize(serde_json::Error),
    #[error("plan parse failed: {0}")]
    Toml(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("dynamics failed: {0}")]
    Dynamics(String),
    #[error("statistics failed: {0}")]
    Stats(String),
    #[error("area-interaction sampler failed: {0}")]
    Aipp(String),
    #[error("oracle mismatch in check '{}': {}", .0.check, .0.detail)]
    OracleMismatch(Box<OracleReport>),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

fn default_burnin() -> u64 {
    2_000_000
}

/// What to simulate: weighted-culling dynamics (volume- or neighbour-based),
/// the area-interaction process, or the uniform CSR baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProcessSpec {
    /// Volume-power culling, weight = area^alpha.
    V { alpha: f64 },
    /// Neighbour-count culling with a named selection function.
    N { selection: String },
    /// Area-interaction process; beta is tuned to the target count when
    /// absent. `burnin` counts birth-death proposals.
    Aipp {
        gamma1: f64,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default = "default_burnin")]
        burnin: u64,
    },
    /// Uniform binomial pattern (complete spatial randomness).
    Csr,
}

impl ProcessSpec {
    pub fn label(&self) -> String {
        match self {
            ProcessSpec::V { alpha } => format!("v(alpha={alpha})"),
            ProcessSpec::N { selection } => format!("n({selection})"),
            ProcessSpec::Aipp { gamma1, .. } => format!("aipp(gamma1={gamma1})"),
            ProcessSpec::Csr => "csr".into(),
        }
    }

    fn selection_spec(&self) -> Result<Option<SelectionSpec>> {
        match self {
            ProcessSpec::V { alpha } => Ok(Some(SelectionSpec::VolumePower { alpha: *alpha })),
            ProcessSpec::N { selection } => {
                let named = NamedSelection::from_name(selection).ok_or_else(|| {
                    HarnessError::Precondition(format!(
                        "unknown selection function '{selection}'"
                    ))
                })?;
                Ok(Some(SelectionSpec::Neighbour(named)))
            }
            _ => Ok(None),
        }
    }
}

fn default_depth_min() -> u32 {
    3
}

fn default_true() -> bool {
    true
}

/// Which statistics to collect per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsRequest {
    /// Minimum NN-depth for included cells on bounded domains (edge-effect
    /// correction); ignored where there is no boundary.
    #[serde(default = "default_depth_min")]
    pub depth_min: u32,
    #[serde(default = "default_true")]
    pub epmf: bool,
    /// Estimate F/G/J curves and average them across replicates (2-D only).
    #[serde(default = "default_true")]
    pub curves: bool,
    /// Write one pattern file per replicate when an output directory is set.
    #[serde(default = "default_true")]
    pub save_patterns: bool,
}

impl Default for StatsRequest {
    fn default() -> Self {
        StatsRequest {
            depth_min: default_depth_min(),
            epmf: true,
            curves: true,
            save_patterns: true,
        }
    }
}

/// A declarative experiment: process, domain, size, run length (as steps per
/// point), replicate count and seed root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub name: String,
    pub process: ProcessSpec,
    pub domain: DomainKind,
    pub n_points: usize,
    /// Total culling steps T = steps_per_point * n_points.
    pub steps_per_point: u64,
    pub replicates: usize,
    pub seed_root: u64,
    #[serde(default)]
    pub stats: StatsRequest,
}

impl ExperimentPlan {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Toml(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| HarnessError::Toml(e.to_string()))
    }

    pub fn total_steps(&self) -> u64 {
        self.steps_per_point * self.n_points as u64
    }

    fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(HarnessError::Precondition(
                "replicate count must be at least 1".into(),
            ));
        }
        if self.n_points == 0 {
            return Err(HarnessError::Precondition(
                "n_points must be positive".into(),
            ));
        }
        if let ProcessSpec::Aipp { gamma1, .. } = &self.process {
            if !(*gamma1 > 0.0) {
                return Err(HarnessError::Precondition(
                    "gamma1 must be positive".into(),
                ));
            }
            if self.domain != DomainKind::Square {
                return Err(HarnessError::Precondition(
                    "the area-interaction process is defined on the square".into(),
                ));
            }
        }
        self.process.selection_spec()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub replicate: usize,
    pub seed: u64,
    pub n_points: usize,
    /// Cells passing the depth filter (equals n_points on boundaryless
    /// domains).
    pub included_cells: usize,
    pub r_star: f64,
    pub epmf: Option<Epmf>,
    pub pattern_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub plan: ExperimentPlan,
    pub plan_fingerprint: String,
    pub module_version: String,
    /// The beta actually used for an area-interaction run (tuned or given).
    pub aipp_beta: Option<f64>,
    pub replicates: Vec<ReplicateSummary>,
    pub failures: Vec<ReplicateFailure>,
    pub mean_r_star: f64,
    pub sd_r_star: f64,
    /// Standard error = sd / sqrt(successful replicates).
    pub se_r_star: f64,
    pub pooled_epmf: Option<Epmf>,
    /// F/G/J curves averaged across replicates on a shared radius grid.
    pub curves: Option<CurveData>,
}

fn mean_sd_se(xs: &[f64]) -> (f64, f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    let sd = var.sqrt();
    (mean, sd, sd / k.sqrt())
}

fn pool_epmfs(epmfs: &[&Epmf]) -> Option<Epmf> {
    if epmfs.is_empty() {
        return None;
    }
    let total: usize = epmfs.iter().map(|e| e.samples).sum();
    let mut freq = std::collections::BTreeMap::new();
    for e in epmfs {
        let w = e.samples as f64 / total as f64;
        for (&n, &f) in &e.freq {
            *freq.entry(n).or_insert(0.0) += w * f;
        }
    }
    Some(Epmf {
        freq,
        samples: total,
    })
}

/// Generate one replicate's final configuration.
fn simulate_replicate(
    plan: &ExperimentPlan,
    aipp_beta: Option<f64>,
    replicate: usize,
) -> std::result::Result<(Configuration, u64), String> {
    let seed = io::derive_seed(plan.seed_root, replicate as u64, io::ROLE_CHAIN);
    match &plan.process {
        ProcessSpec::Csr => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let points = match plan.domain {
                DomainKind::Circle => (0..plan.n_points)
                    .map(|_| Point::new(rng.gen::<f64>(), 0.0))
                    .collect(),
                _ => (0..plan.n_points)
                    .map(|_| Point::new(rng.gen::<f64>(), rng.gen::<f64>()))
                    .collect(),
            };
            Ok((Configuration::new(plan.domain, points), seed))
        }
        ProcessSpec::Aipp {
            gamma1,
            burnin,
            beta,
        } => {
            let resolved = aipp_beta
                .or(*beta)
                .ok_or_else(|| "beta neither given nor tuned".to_string())?;
            let mut params = AippParams::new(resolved, *gamma1);
            params.target_count = plan.n_points as f64;
            let out = aipp::sample(&params, *burnin, seed).map_err(|e| e.to_string())?;
            Ok((out.configuration, seed))
        }
        _ => {
            let spec = plan
                .process
                .selection_spec()
                .map_err(|e| e.to_string())?
                .expect("v/n process has a selection spec");
            let mut state =
                ProcessState::init_uniform(plan.n_points, plan.domain, spec, seed)
                    .map_err(|e| e.to_string())?;
            dynamics::evolve(&mut state, plan.total_steps(), &mut [])
                .map_err(|(e, _)| e.to_string())?;
            Ok((state.tessellation().configuration(), seed))
        }
    }
}

/// Labels of the cells a statistic should run over: depth-filtered on
/// bounded domains, everything elsewhere.
fn included_ids(
    tess: &crate::geometry::Tessellation,
    depth_min: u32,
) -> std::result::Result<Vec<u32>, String> {
    if tess.domain().has_boundary() && depth_min > 0 {
        stats::depth_filter(tess, depth_min).map_err(|e| e.to_string())
    } else {
        Ok((0..tess.len() as u32).collect())
    }
}

fn replicate_statistics(
    plan: &ExperimentPlan,
    config: &Configuration,
    seed: u64,
    replicate: usize,
    out_dir: Option<&Path>,
    fingerprint: &str,
) -> std::result::Result<ReplicateSummary, String> {
    let tess = build_tessellation(config).map_err(|e| e.to_string())?;
    let ids = included_ids(&tess, plan.stats.depth_min)?;
    if ids.is_empty() {
        return Err(format!(
            "depth filter >= {} left no cells",
            plan.stats.depth_min
        ));
    }
    let areas: Vec<f64> = ids
        .iter()
        .map(|&id| tess.cells()[id as usize].area)
        .collect();
    let r_star = stats::thiel_redundancy(&areas).map_err(|e| e.to_string())?;
    let epmf = if plan.stats.epmf {
        Some(stats::nn_epmf(&tess, &ids).map_err(|e| e.to_string())?)
    } else {
        None
    };
    let pattern_file = if plan.stats.save_patterns {
        if let Some(dir) = out_dir {
            let file = format!("{}_rep{replicate:03}.pts", plan.name);
            io::write_pattern(&dir.join(&file), config, seed, fingerprint)
                .map_err(|e| e.to_string())?;
            Some(file)
        } else {
            None
        }
    } else {
        None
    };
    Ok(ReplicateSummary {
        replicate,
        seed,
        n_points: config.points.len(),
        included_cells: ids.len(),
        r_star,
        epmf,
        pattern_file,
    })
}

/// Per-replicate F/G/J estimation on a shared radius grid.
fn replicate_curves(
    plan: &ExperimentPlan,
    config: &Configuration,
    r_grid: &[f64],
) -> std::result::Result<CurveData, String> {
    let tess = build_tessellation(config).map_err(|e| e.to_string())?;
    let ids = included_ids(&tess, plan.stats.depth_min)?;
    let f = stats::empty_space_f(&config.points, r_grid, plan.domain)
        .map_err(|e| e.to_string())?;
    let g = stats::nn_distance_g(&config.points, r_grid, plan.domain, &ids)
        .map_err(|e| e.to_string())?;
    stats::j_estimate(r_grid, &f, &g).map_err(|e| e.to_string())
}

/// Execute a plan: fan replicates out over the worker pool, collect the
/// requested statistics, aggregate, and (optionally) write every artifact
/// under `out_dir` atomically.
pub fn run(plan: &ExperimentPlan, out_dir: Option<&Path>) -> Result<ResultRecord> {
    plan.validate()?;
    let fingerprint = io::fingerprint(plan)?;

    // resolve beta once for area-interaction runs; all replicates share it
    let aipp_beta = match &plan.process {
        ProcessSpec::Aipp { beta: Some(b), .. } => Some(*b),
        ProcessSpec::Aipp { gamma1, beta: None, .. } => {
            let mut params = AippParams::new(plan.n_points as f64, *gamma1);
            params.target_count = plan.n_points as f64;
            let tuned = aipp::tune_beta(
                &params,
                0.02,
                io::derive_seed(plan.seed_root, 0, io::ROLE_TUNE),
            )
            .map_err(|e| HarnessError::Aipp(e.to_string()))?;
            Some(tuned.beta)
        }
        _ => None,
    };

    // phase 1: simulate final configurations in parallel
    let sims: Vec<std::result::Result<(Configuration, u64), String>> = (0..plan.replicates)
        .into_par_iter()
        .map(|rep| simulate_replicate(plan, aipp_beta, rep))
        .collect();

    // phase 2: per-replicate statistics
    let stats_out: Vec<std::result::Result<ReplicateSummary, String>> = sims
        .par_iter()
        .enumerate()
        .map(|(rep, sim)| match sim {
            Ok((config, seed)) => {
                replicate_statistics(plan, config, *seed, rep, out_dir, &fingerprint)
            }
            Err(e) => Err(e.clone()),
        })
        .collect();

    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    for (rep, item) in stats_out.into_iter().enumerate() {
        match item {
            Ok(summary) => replicates.push(summary),
            Err(error) => failures.push(ReplicateFailure {
                replicate: rep,
                error,
            }),
        }
    }
    if replicates.is_empty() {
        return Err(HarnessError::Dynamics(format!(
            "all {} replicates failed; first error: {}",
            plan.replicates,
            failures
                .first()
                .map(|f| f.error.as_str())
                .unwrap_or("unknown")
        )));
    }

    // phase 3: curves on a grid derived from the first successful replicate
    let curves = if plan.stats.curves && plan.domain.dimension() == 2 {
        let first_ok = replicates[0].replicate;
        let (first_config, _) = sims[first_ok].as_ref().expect("first success exists");
        let r_grid = stats::default_r_grid(&first_config.points, plan.domain)
            .map_err(|e| HarnessError::Stats(e.to_string()))?;
        let per_rep: Vec<std::result::Result<CurveData, String>> = replicates
            .par_iter()
            .map(|summary| {
                let (config, _) = sims[summary.replicate].as_ref().expect("simulated");
                replicate_curves(plan, config, &r_grid)
            })
            .collect();
        let mut curve_list = Vec::new();
        for (summary, item) in replicates.iter().zip(per_rep) {
            match item {
                Ok(c) => curve_list.push(c),
                Err(error) => failures.push(ReplicateFailure {
                    replicate: summary.replicate,
                    error: format!("curve estimation: {error}"),
                }),
            }
        }
        if curve_list.is_empty() {
            None
        } else {
            Some(
                stats::average_curves(&curve_list)
                    .map_err(|e| HarnessError::Stats(e.to_string()))?,
            )
        }
    } else {
        None
    };

    let r_stars: Vec<f64> = replicates.iter().map(|r| r.r_star).collect();
    let (mean_r_star, sd_r_star, se_r_star) = mean_sd_se(&r_stars);
    let epmfs: Vec<&Epmf> = replicates.iter().filter_map(|r| r.epmf.as_ref()).collect();
    let record = ResultRecord {
        plan: plan.clone(),
        plan_fingerprint: fingerprint.clone(),
        module_version: env!("CARGO_PKG_VERSION").into(),
        aipp_beta,
        pooled_epmf: pool_epmfs(&epmfs),
        replicates,
        failures,
        mean_r_star,
        sd_r_star,
        se_r_star,
        curves,
    };

    if let Some(dir) = out_dir {
        io::write_json(&dir.join(format!("{}_record.json", plan.name)), &record)?;
        if let Some(curves) = &record.curves {
            io::write_curves_csv(
                &dir.join(format!("{}_curves.csv", plan.name)),
                curves,
                &fingerprint,
            )?;
        }
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: f64,
    pub plan: ExperimentPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: f64,
    pub mean_r_star: f64,
    pub sd_r_star: f64,
    pub se_r_star: f64,
    pub record: ResultRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<(f64, String)>,
}

/// Instantiate a volume-power sweep from a template plan.
pub fn alpha_sweep_points(template: &ExperimentPlan, alphas: &[f64]) -> Vec<SweepPoint> {
    alphas
        .iter()
        .map(|&alpha| {
            let mut plan = template.clone();
            plan.process = ProcessSpec::V { alpha };
            plan.name = format!("{}_alpha{alpha:+.2}", template.name);
            SweepPoint {
                parameter: alpha,
                plan,
            }
        })
        .collect()
}

/// One run per grid point plus a combined CSV; failures at one point do not
/// abort the others.
pub fn sweep(points: &[SweepPoint], out_dir: Option<&Path>) -> Result<SweepResult> {
    if points.is_empty() {
        return Err(HarnessError::Precondition(
            "sweep needs a nonempty parameter grid".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for point in points {
        match run(&point.plan, out_dir) {
            Ok(record) => rows.push(SweepRow {
                parameter: point.parameter,
                mean_r_star: record.mean_r_star,
                sd_r_star: record.sd_r_star,
                se_r_star: record.se_r_star,
                record,
            }),
            Err(e) => failures.push((point.parameter, e.to_string())),
        }
    }
    if let Some(dir) = out_dir {
        let mut csv = String::from("parameter,mean_r_star,sd_r_star,se_r_star\n");
        for row in &rows {
            csv.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                row.parameter, row.mean_r_star, row.sd_r_star, row.se_r_star
            ));
        }
        io::atomic_write(&dir.join("sweep.csv"), csv.as_bytes())?;
    }
    Ok(SweepResult { rows, failures })
}

/// A half-open NN-depth class [min, max] (max = None means unbounded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthClass {
    pub min: u32,
    pub max: Option<u32>,
}

impl DepthClass {
    pub fn contains(&self, depth: u32) -> bool {
        depth >= self.min && self.max.is_none_or(|m| depth <= m)
    }

    pub fn label(&self) -> String {
        match self.max {
            Some(m) if m == self.min => format!("{}", self.min),
            Some(m) => format!("{}-{m}", self.min),
            None => format!("{}+", self.min),
        }
    }
}

/// The default classes: boundary layer, second layer, third layer, interior.
pub fn default_depth_classes() -> Vec<DepthClass> {
    vec![
        DepthClass { min: 1, max: Some(1) },
        DepthClass { min: 2, max: Some(2) },
        DepthClass { min: 3, max: Some(3) },
        DepthClass { min: 4, max: None },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeStudyConfig {
    pub processes: Vec<ProcessSpec>,
    pub depth_classes: Vec<DepthClass>,
    pub n_points: usize,
    pub steps_per_point: u64,
    pub replicates: usize,
    pub seed_root: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeStudyResult {
    pub anova: stats::AnovaTable,
    pub process_labels: Vec<String>,
    pub class_labels: Vec<String>,
    /// responses[process][class][replicate] = within-class redundancy R*.
    pub responses: Vec<Vec<Vec<f64>>>,
    /// (process, depth class, interaction) significance at the 5% level.
    pub significant: (bool, bool, bool),
}

/// Balanced two-factor study of edge effects: factor A is the process,
/// factor B the NN-depth class, response the redundancy of the cell areas
/// within the class on the final pattern.
pub fn edge_study(cfg: &EdgeStudyConfig) -> Result<EdgeStudyResult> {
    if cfg.processes.len() < 2 {
        return Err(HarnessError::Precondition(
            "edge study needs at least two processes".into(),
        ));
    }
    if cfg.depth_classes.len() < 2 {
        return Err(HarnessError::Precondition(
            "edge study needs at least two depth classes".into(),
        ));
    }
    if cfg.replicates < 2 {
        return Err(HarnessError::Precondition(
            "edge study needs at least two replicates".into(),
        ));
    }
    if cfg
        .processes
        .iter()
        .any(|p| matches!(p, ProcessSpec::Aipp { beta: None, .. }))
    {
        return Err(HarnessError::Precondition(
            "edge study requires an explicit beta for area-interaction processes".into(),
        ));
    }
    let jobs: Vec<(usize, usize)> = (0..cfg.processes.len())
        .flat_map(|a| (0..cfg.replicates).map(move |k| (a, k)))
        .collect();
    let cells: Vec<Result<Vec<f64>>> = jobs
        .par_iter()
        .map(|&(a, k)| {
            let plan = ExperimentPlan {
                name: format!("edge_{a}_{k}"),
                process: cfg.processes[a].clone(),
                domain: DomainKind::Square,
                n_points: cfg.n_points,
                steps_per_point: cfg.steps_per_point,
                replicates: 1,
                seed_root: io::derive_seed(cfg.seed_root, (a * cfg.replicates + k) as u64, 0),
                stats: StatsRequest::default(),
            };
            let (config, _) = simulate_replicate(&plan, None, k)
                .map_err(HarnessError::Dynamics)?;
            let tess = build_tessellation(&config)?;
            let depths = tess
                .nn_depths()
                .map_err(HarnessError::Geometry)?;
            cfg.depth_classes
                .iter()
                .map(|class| {
                    let areas: Vec<f64> = tess
                        .cells()
                        .iter()
                        .zip(&depths)
                        .filter(|(_, &d)| class.contains(d))
                        .map(|(c, _)| c.area)
                        .collect();
                    if areas.is_empty() {
                        return Err(HarnessError::Precondition(format!(
                            "depth class {} is empty at N = {}; increase n_points",
                            class.label(),
                            cfg.n_points
                        )));
                    }
                    stats::thiel_redundancy(&areas)
                        .map_err(|e| HarnessError::Stats(e.to_string()))
                })
                .collect()
        })
        .collect();

    let mut responses =
        vec![vec![vec![0.0; cfg.replicates]; cfg.depth_classes.len()]; cfg.processes.len()];
    for ((a, k), item) in jobs.into_iter().zip(cells) {
        let per_class = item?;
        for (b, value) in per_class.into_iter().enumerate() {
            responses[a][b][k] = value;
        }
    }
    let anova =
        stats::edge_effect_anova(&responses).map_err(|e| HarnessError::Stats(e.to_string()))?;
    let significant = anova.significant_at(0.05);
    Ok(EdgeStudyResult {
        significant,
        process_labels: cfg.processes.iter().map(|p| p.label()).collect(),
        class_labels: cfg.depth_classes.iter().map(|c| c.label()).collect(),
        responses,
        anova,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csr_plan(n: usize, reps: usize) -> ExperimentPlan {
        ExperimentPlan {
            name: "test_csr".into(),
            process: ProcessSpec::Csr,
            domain: DomainKind::Square,
            n_points: n,
            steps_per_point: 0,
            replicates: reps,
            seed_root: 2024,
            stats: StatsRequest {
                depth_min: 1,
                epmf: true,
                curves: false,
                save_patterns: false,
            },
        }
    }

    #[test]
    fn plan_toml_round_trip() {
        let plan = ExperimentPlan {
            name: "vanilla".into(),
            process: ProcessSpec::N {
                selection: "vanilla".into(),
            },
            domain: DomainKind::Square,
            n_points: 2000,
            steps_per_point: 12,
            replicates: 25,
            seed_root: 7,
            stats: StatsRequest::default(),
        };
        let text = plan.to_toml_string().unwrap();
        let back = ExperimentPlan::from_toml_str(&text).unwrap();
        assert_eq!(plan, back);
    }

    #[test]
    fn plan_parses_minimal_toml() {
        let text = r#"
            name = "quick"
            n_points = 100
            steps_per_point = 2
            replicates = 3
            seed_root = 5
            domain = "square"

            [process]
            kind = "v"
            alpha = 0.5
        "#;
        let plan = ExperimentPlan::from_toml_str(text).unwrap();
        assert_eq!(plan.process, ProcessSpec::V { alpha: 0.5 });
        assert_eq!(plan.stats, StatsRequest::default());
    }

    #[test]
    fn csr_single_replicate_runs() {
        let record = run(&csr_plan(200, 1), None).unwrap();
        assert_eq!(record.replicates.len(), 1);
        assert!(record.failures.is_empty());
        assert!(record.mean_r_star > 0.0);
        assert_eq!(record.sd_r_star, 0.0);
        assert!(record.pooled_epmf.is_some());
    }

    #[test]
    fn run_is_deterministic() {
        let a = run(&csr_plan(150, 3), None).unwrap();
        let b = run(&csr_plan(150, 3), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn se_is_sd_over_sqrt_k() {
        let record = run(&csr_plan(150, 4), None).unwrap();
        assert_eq!(record.se_r_star, record.sd_r_star / 2.0);
    }

    #[test]
    fn invalid_plans_rejected() {
        let mut plan = csr_plan(100, 0);
        assert!(matches!(
            run(&plan, None),
            Err(HarnessError::Precondition(_))
        ));
        plan.replicates = 1;
        plan.process = ProcessSpec::N {
            selection: "bogus".into(),
        };
        assert!(matches!(
            run(&plan, None),
            Err(HarnessError::Precondition(_))
        ));
    }

    #[test]
    fn sweep_rejects_empty_grid() {
        assert!(matches!(
            sweep(&[], None),
            Err(HarnessError::Precondition(_))
        ));
    }

    #[test]
    fn sweep_produces_rows_and_csv() {
        let template = ExperimentPlan {
            name: "mini".into(),
            process: ProcessSpec::V { alpha: 0.0 },
            domain: DomainKind::Circle,
            n_points: 64,
            steps_per_point: 2,
            replicates: 2,
            seed_root: 11,
            stats: StatsRequest {
                depth_min: 0,
                epmf: false,
                curves: false,
                save_patterns: false,
            },
        };
        let points = alpha_sweep_points(&template, &[-0.5, 0.0, 0.5]);
        let dir = tempfile::tempdir().unwrap();
        let result = sweep(&points, Some(dir.path())).unwrap();
        assert_eq!(result.rows.len(), 3);
        assert!(result.failures.is_empty());
        let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn run_writes_artifacts() {
        let mut plan = csr_plan(200, 2);
        plan.stats.save_patterns = true;
        plan.stats.curves = true;
        let dir = tempfile::tempdir().unwrap();
        let record = run(&plan, Some(dir.path())).unwrap();
        assert!(dir.path().join("test_csr_record.json").exists());
        assert!(dir.path().join("test_csr_curves.csv").exists());
        for rep in &record.replicates {
            let file = rep.pattern_file.as_ref().unwrap();
            let (config, seed) = io::read_pattern(&dir.path().join(file)).unwrap();
            assert_eq!(config.points.len(), 200);
            assert_eq!(seed, Some(rep.seed));
        }
        assert!(record.curves.is_some());
    }

    #[test]
    fn depth_class_membership() {
        let classes = default_depth_classes();
        assert!(classes[0].contains(1) && !classes[0].contains(2));
        assert!(classes[3].contains(4) && classes[3].contains(17));
        assert_eq!(classes[3].label(), "4+");
    }

    #[test]
    fn edge_study_preconditions() {
        let cfg = EdgeStudyConfig {
            processes: vec![ProcessSpec::Csr],
            depth_classes: default_depth_classes(),
            n_points: 100,
            steps_per_point: 1,
            replicates: 3,
            seed_root: 1,
        };
        assert!(matches!(
            edge_study(&cfg),
            Err(HarnessError::Precondition(_))
        ));
    }

    #[test]
    fn edge_study_identical_processes_nothing_significant() {
        // two CSR "processes" differ only by seed stream: no real effects
        let cfg = EdgeStudyConfig {
            processes: vec![ProcessSpec::Csr, ProcessSpec::Csr],
            depth_classes: vec![
                DepthClass { min: 1, max: Some(1) },
                DepthClass { min: 2, max: None },
            ],
            n_points: 400,
            steps_per_point: 0,
            replicates: 4,
            seed_root: 99,
        };
        let result = edge_study(&cfg).unwrap();
        // factor A (the process) is pure noise here
        assert!(!result.significant.0, "p_a = {}", result.anova.p_a);
    }
}
