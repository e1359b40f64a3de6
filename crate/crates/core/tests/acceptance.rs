//! The acceptance gate: one pass/fail line per criterion. Criteria 1-6 are
//! statistical with pinned tolerances; criterion 7 is deterministic;
//! criterion 8 checks the rare-neighbour-count tail. Everything runs from
//! fixed seeds, so the whole suite is reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use voronoi_proc::aipp::{self, AippParams};
use voronoi_proc::dynamics::{evolve, NamedSelection, ProcessState, SelectionSpec};
use voronoi_proc::geometry::{build_tessellation, Configuration, DomainKind, Point};
use voronoi_proc::harness::{
    self, io as hio, ExperimentPlan, ProcessSpec, ResultRecord, StatsRequest,
};
use voronoi_proc::stats::{self, CurveData};

struct Criterion {
    index: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn record_for(
    name: &str,
    process: ProcessSpec,
    domain: DomainKind,
    n_points: usize,
    steps_per_point: u64,
    replicates: usize,
    seed_root: u64,
    depth_min: u32,
    out_dir: Option<&std::path::Path>,
) -> ResultRecord {
    let plan = ExperimentPlan {
        name: name.into(),
        process,
        domain,
        n_points,
        steps_per_point,
        replicates,
        seed_root,
        stats: StatsRequest {
            depth_min,
            epmf: true,
            curves: false,
            save_patterns: out_dir.is_some(),
        },
    };
    harness::run(&plan, out_dir).expect("experiment plan must run")
}

/// Load the saved final patterns of a run back from disk.
fn load_patterns(record: &ResultRecord, dir: &std::path::Path) -> Vec<Configuration> {
    record
        .replicates
        .iter()
        .map(|rep| {
            let file = rep.pattern_file.as_ref().expect("patterns saved");
            hio::read_pattern(&dir.join(file)).expect("pattern readable").0
        })
        .collect()
}

fn averaged_curves(patterns: &[Configuration], r_grid: &[f64], depth_min: u32) -> CurveData {
    let per_rep: Vec<CurveData> = patterns
        .iter()
        .map(|config| {
            let tess = build_tessellation(config).unwrap();
            let ids = stats::depth_filter(&tess, depth_min).unwrap();
            let f = stats::empty_space_f(&config.points, r_grid, config.domain).unwrap();
            let g = stats::nn_distance_g(&config.points, r_grid, config.domain, &ids).unwrap();
            stats::j_estimate(r_grid, &f, &g).unwrap()
        })
        .collect();
    stats::average_curves(&per_rep).unwrap()
}

/// Mean circle-process R* and the pooled widths over independent replicates.
fn circle_runs(
    alpha: f64,
    n: usize,
    steps: u64,
    replicates: usize,
    seed_root: u64,
) -> (f64, Vec<f64>) {
    let mut r_stars = Vec::new();
    let mut widths = Vec::new();
    for rep in 0..replicates {
        let seed = hio::derive_seed(seed_root, rep as u64, 0);
        let mut state = ProcessState::init_uniform(
            n,
            DomainKind::Circle,
            SelectionSpec::VolumePower { alpha },
            seed,
        )
        .unwrap();
        evolve(&mut state, steps, &mut []).map_err(|(e, _)| e).unwrap();
        let areas: Vec<f64> = state.tessellation().cells().iter().map(|c| c.area).collect();
        r_stars.push(stats::thiel_redundancy(&areas).unwrap());
        widths.extend(areas);
    }
    (
        r_stars.iter().sum::<f64>() / replicates as f64,
        widths,
    )
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<Criterion> = Vec::new();
    let dir = tempfile::tempdir().unwrap();

    // ---- criteria 1 and 8: the seven neighbour-count processes ----
    eprintln!("[acceptance] running the seven n-processes (N=2000, T=12N, 25 reps)...");
    let table: &[(&str, f64)] = &[
        ("vanilla", 0.1450),
        ("anti-many", 0.1548),
        ("anti-few", 0.1074),
        ("pro-6", 0.1615),
        ("anti-6", 0.1524),
        ("pro-5", 0.1479),
        ("anti-5", 0.1255),
    ];
    let mut c1_pass = true;
    let mut c1_detail = String::new();
    let mut c8_pass = true;
    let mut c8_detail = String::new();
    for (i, (selection, reference)) in table.iter().enumerate() {
        // run boundary-free (torus): edge effects propagate during the
        // evolution on the bounded square, which a post-hoc depth filter
        // cannot fully undo for the 6-centred selectors
        let record = record_for(
            &format!("n_{selection}"),
            ProcessSpec::N {
                selection: (*selection).into(),
            },
            DomainKind::Torus,
            2000,
            12,
            25,
            6000 + i as u64,
            0,
            None,
        );
        // two-sample consistency bound: each mean within 3 s.e. of the common
        // value implies |gap| <= 3 (reported s.e. + our s.e.)
        let tol = 3.0 * (0.0015 + record.se_r_star);
        let gap = (record.mean_r_star - reference).abs();
        let ok = gap <= tol;
        c1_pass &= ok;
        c1_detail.push_str(&format!(
            "{selection}: {:.4} (ref {reference:.4}, |gap| {gap:.4} vs tol {tol:.4}){} ",
            record.mean_r_star,
            if ok { "" } else { " <-- FAIL" },
        ));
        let tail = record
            .pooled_epmf
            .as_ref()
            .expect("epmf collected")
            .tail_above(13);
        let tail_ok = tail < 1e-3;
        c8_pass &= tail_ok;
        c8_detail.push_str(&format!(
            "{selection}: P(n>13) = {tail:.2e}{} ",
            if tail_ok { "" } else { " <-- FAIL" }
        ));
        eprintln!(
            "[acceptance]   {selection}: mean R* = {:.4} +- {:.4}",
            record.mean_r_star, record.se_r_star
        );
    }
    results.push(Criterion {
        index: 1,
        name: "Table-1 reproduction (7 n-processes)",
        pass: c1_pass,
        detail: c1_detail,
    });

    // ---- criterion 2: CSR baseline ----
    eprintln!("[acceptance] CSR baseline...");
    let csr = record_for(
        "csr",
        ProcessSpec::Csr,
        DomainKind::Square,
        2000,
        0,
        25,
        7100,
        3,
        Some(dir.path()),
    );
    let c2_gap = (csr.mean_r_star - 0.135).abs();
    results.push(Criterion {
        index: 2,
        name: "CSR baseline R* = 0.135 +- 0.010",
        pass: c2_gap <= 0.010,
        detail: format!(
            "mean R* = {:.4} +- {:.4} over 25 draws (|gap| = {c2_gap:.4})",
            csr.mean_r_star, csr.se_r_star
        ),
    });

    // ---- criterion 3: 1-D Gamma shape ----
    eprintln!("[acceptance] 1-D gamma shapes...");
    let (_, w_neg) = circle_runs(-1.0, 1000, 10_000, 25, 7200);
    let (_, w_zero) = circle_runs(0.0, 1000, 10_000, 25, 7201);
    let (_, w_pos) = circle_runs(0.5, 1000, 10_000, 25, 7202);
    let k_neg = stats::gamma_shape_mle(&w_neg).unwrap();
    let k_zero = stats::gamma_shape_mle(&w_zero).unwrap();
    let k_pos = stats::gamma_shape_mle(&w_pos).unwrap();
    let c3_pass = (1.85..=2.15).contains(&k_zero) && k_neg > k_zero && k_zero > k_pos;
    results.push(Criterion {
        index: 3,
        name: "1-D gamma shape 2 at alpha=0, decreasing in alpha",
        pass: c3_pass,
        detail: format!(
            "shape(-1) = {k_neg:.3}, shape(0) = {k_zero:.3}, shape(0.5) = {k_pos:.3}"
        ),
    });

    // ---- criterion 4: 1-D phase change ----
    eprintln!("[acceptance] 1-D phase change and alpha sweep...");
    let (r_15, _) = circle_runs(1.5, 128, 4096, 25, 7300);
    let (r_05, _) = circle_runs(0.5, 128, 4096, 25, 7301);
    let mut sweep_means = Vec::new();
    for k in 0..=10 {
        let alpha = -2.0 + 0.3 * k as f64;
        let (mean, _) = circle_runs(alpha, 128, 4096, 25, 7310 + k as u64);
        sweep_means.push((alpha, mean));
    }
    let increasing = sweep_means.windows(2).all(|w| w[1].1 > w[0].1);
    let c4_pass = r_15 > 3.0 * r_05 && increasing;
    results.push(Criterion {
        index: 4,
        name: "1-D phase change and monotone alpha sweep",
        pass: c4_pass,
        detail: format!(
            "R*(1.5) = {r_15:.4} vs 3x R*(0.5) = {:.4}; sweep {}: {}",
            3.0 * r_05,
            if increasing {
                "strictly increasing"
            } else {
                "NOT monotone"
            },
            sweep_means
                .iter()
                .map(|(a, m)| format!("{a:+.1}:{m:.3}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    });

    // ---- criteria 5 and 6 share the attractive v-process ----
    eprintln!("[acceptance] v-process alpha=0.5 (N=2000, T=12N, 25 reps)...");
    let v05 = record_for(
        "v05",
        ProcessSpec::V { alpha: 0.5 },
        DomainKind::Square,
        2000,
        12,
        25,
        7400,
        3,
        Some(dir.path()),
    );
    eprintln!("[acceptance] v-process alpha=-3 (repulsive)...");
    let vrep = record_for(
        "vrep",
        ProcessSpec::V { alpha: -3.0 },
        DomainKind::Square,
        2000,
        12,
        25,
        7500,
        3,
        Some(dir.path()),
    );

    let csr_patterns = load_patterns(&csr, dir.path());
    let v05_patterns = load_patterns(&v05, dir.path());
    let vrep_patterns = load_patterns(&vrep, dir.path());
    // a single radius grid keeps every J comparison on a common mask
    let r_grid = stats::default_r_grid(&csr_patterns[0].points, DomainKind::Square).unwrap();
    let csr_curves = averaged_curves(&csr_patterns, &r_grid, 3);
    let v05_curves = averaged_curves(&v05_patterns, &r_grid, 3);
    let vrep_curves = averaged_curves(&vrep_patterns, &r_grid, 3);

    let csr_max_lnj = csr_curves
        .ln_j
        .iter()
        .flatten()
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    // sign checks at small r: the first half of the reliable mask
    let masked: Vec<usize> = (0..r_grid.len())
        .filter(|&i| v05_curves.ln_j[i].is_some() && vrep_curves.ln_j[i].is_some())
        .collect();
    let small = &masked[..(masked.len() / 2).max(1)];
    let v05_small_min = small
        .iter()
        .filter_map(|&i| v05_curves.ln_j[i])
        .fold(f64::INFINITY, f64::min);
    let vrep_small_max = small
        .iter()
        .filter_map(|&i| vrep_curves.ln_j[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let c5_pass = csr_max_lnj <= 0.1 && v05_small_min < 0.0 && vrep_small_max > 0.0;
    results.push(Criterion {
        index: 5,
        name: "J calibration: CSR flat, attractive < 0, repulsive > 0",
        pass: c5_pass,
        detail: format!(
            "CSR max |ln J| = {csr_max_lnj:.4}; attractive min ln J = {v05_small_min:.3}; \
             repulsive max ln J = {vrep_small_max:.3}"
        ),
    });

    // ---- criterion 6: cross-model match ----
    eprintln!("[acceptance] tuning the area-interaction process (gamma1=1.5)...");
    let mut aipp_params = AippParams::new(2000.0, 1.5);
    aipp_params.target_count = 2000.0;
    let tuned = aipp::tune_beta(&aipp_params, 0.02, hio::derive_seed(7600, 0, hio::ROLE_TUNE))
        .expect("beta tuning converges");
    eprintln!(
        "[acceptance] tuned beta = {:.1} in {} rounds; sampling 25 replicates...",
        tuned.beta, tuned.rounds
    );
    let aipp_record = record_for(
        "aipp15",
        ProcessSpec::Aipp {
            gamma1: 1.5,
            beta: Some(tuned.beta),
            burnin: 600_000,
        },
        DomainKind::Square,
        2000,
        0,
        25,
        7600,
        3,
        Some(dir.path()),
    );
    let counts: Vec<f64> = aipp_record
        .replicates
        .iter()
        .map(|r| r.n_points as f64)
        .collect();
    let mean_count = counts.iter().sum::<f64>() / counts.len() as f64;
    let count_sd = (counts
        .iter()
        .map(|c| (c - mean_count) * (c - mean_count))
        .sum::<f64>()
        / (counts.len() - 1) as f64)
        .sqrt();
    let count_se = count_sd / (counts.len() as f64).sqrt();
    let count_ok = (mean_count - 2000.0).abs() <= 0.02 * 2000.0 + 3.0 * count_se;
    let aipp_patterns = load_patterns(&aipp_record, dir.path());
    let aipp_curves = averaged_curves(&aipp_patterns, &r_grid, 3);
    let v05_ok = (v05.mean_r_star - 0.20).abs() <= 0.02;
    let aipp_ok = (aipp_record.mean_r_star - 0.20).abs() <= 0.02;
    // largest standardised gap between the two ln J curves on the common mask
    let mut max_z = 0.0f64;
    for i in 0..r_grid.len() {
        if let (Some(a), Some(b), Some(sa), Some(sb)) = (
            v05_curves.ln_j[i],
            aipp_curves.ln_j[i],
            v05_curves.sd_j[i],
            aipp_curves.sd_j[i],
        ) {
            let pooled = (sa * sa + sb * sb).sqrt();
            if pooled > 0.0 {
                max_z = max_z.max((a - b).abs() / pooled);
            }
        }
    }
    let c6_pass = count_ok && v05_ok && aipp_ok && max_z > 2.0;
    results.push(Criterion {
        index: 6,
        name: "cross-model match: v(0.5) vs area-interaction gamma1=1.5",
        pass: c6_pass,
        detail: format!(
            "mean count = {mean_count:.0} (target 2000, ok={count_ok}); \
             v R* = {:.4} (ok={v05_ok}); aipp R* = {:.4} (ok={aipp_ok}); \
             max |Delta ln J| / pooled sd = {max_z:.2}",
            v05.mean_r_star, aipp_record.mean_r_star
        ),
    });

    // ---- criterion 7: deterministic property suite ----
    eprintln!("[acceptance] deterministic property suite...");
    let mut c7_fails: Vec<&str> = Vec::new();

    let areas_report = harness::oracle("cell-areas", 32, 81).unwrap();
    if !areas_report.pass {
        c7_fails.push("cell-areas oracle");
    }
    let adj_report = harness::oracle("adjacency", 64, 82).unwrap();
    if !adj_report.pass {
        c7_fails.push("adjacency oracle");
    }

    // incremental = batch over 1e4 replacements
    {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let n = 128;
        let config = Configuration::new(
            DomainKind::Square,
            (0..n)
                .map(|_| Point::new(rng.gen::<f64>(), rng.gen::<f64>()))
                .collect(),
        );
        let mut tess = build_tessellation(&config).unwrap();
        for _ in 0..10_000 {
            let id = rng.gen_range(0..n) as u32;
            tess.replace_point(id, Point::new(rng.gen::<f64>(), rng.gen::<f64>()))
                .unwrap();
        }
        let batch = build_tessellation(&tess.configuration()).unwrap();
        let ok = tess.cells().iter().zip(batch.cells()).all(|(a, b)| {
            (a.area - b.area).abs() <= 1e-9 && a.neighbor_ids == b.neighbor_ids
        });
        if !ok {
            c7_fails.push("incremental-equals-batch");
        }
    }

    // torus mean degree exactly six
    {
        let mut rng = ChaCha8Rng::seed_from_u64(84);
        let config = Configuration::new(
            DomainKind::Torus,
            (0..150)
                .map(|_| Point::new(rng.gen::<f64>(), rng.gen::<f64>()))
                .collect(),
        );
        let tess = build_tessellation(&config).unwrap();
        let degree_sum: usize = tess.cells().iter().map(|c| c.neighbor_ids.len()).sum();
        if degree_sum != 6 * 150 {
            c7_fails.push("torus mean degree");
        }
    }

    // culling-law chi-square on a frozen state
    {
        let n = 64;
        let mut state = ProcessState::init_uniform(
            n,
            DomainKind::Square,
            SelectionSpec::VolumePower { alpha: 1.0 },
            85,
        )
        .unwrap();
        let expected = state.cull_distribution().unwrap();
        let mut observed = vec![0u64; n];
        const DRAWS: usize = 1_000_000;
        for _ in 0..DRAWS {
            observed[state.sample_cull().unwrap() as usize] += 1;
        }
        let stat: f64 = (0..n)
            .map(|j| {
                let e = expected[j] * DRAWS as f64;
                let d = observed[j] as f64 - e;
                d * d / e
            })
            .sum();
        let p = 1.0 - ChiSquared::new((n - 1) as f64).unwrap().cdf(stat);
        if p <= 0.001 {
            c7_fails.push("culling chi-square");
        }
    }

    // area-interaction gamma = 1 Poisson dispersion
    {
        let params = AippParams::new(50.0, 1.0);
        let mut state = aipp::AippState::new(params, 86).unwrap();
        state.run(10_000);
        // the sample s.e. of the dispersion index is ~sqrt(2/k); k = 4000
        // puts the [0.9, 1.1] window at more than four sigma
        let mut counts = Vec::new();
        for _ in 0..4_000 {
            state.run(250);
            counts.push(state.n() as f64);
        }
        let m = counts.iter().sum::<f64>() / counts.len() as f64;
        let v = counts.iter().map(|c| (c - m) * (c - m)).sum::<f64>()
            / (counts.len() - 1) as f64;
        if !(0.9..=1.1).contains(&(v / m)) {
            c7_fails.push("Poisson dispersion");
        }
    }

    // ANOVA partition identity to 1e-9
    {
        let mut rng = ChaCha8Rng::seed_from_u64(87);
        let data: Vec<Vec<Vec<f64>>> = (0..3)
            .map(|_| {
                (0..4)
                    .map(|_| (0..5).map(|_| rng.gen::<f64>()).collect())
                    .collect()
            })
            .collect();
        let t = stats::edge_effect_anova(&data).unwrap();
        if ((t.ss_a + t.ss_b + t.ss_ab + t.ss_error) - t.ss_total).abs() > 1e-9 {
            c7_fails.push("ANOVA partition identity");
        }
    }

    // weighted cubic regression exact recovery
    {
        let xs: Vec<f64> = (0..24).map(|i| i as f64 / 23.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| 0.7 + 1.1 * x - 2.2 * x * x + 0.9 * x * x * x)
            .collect();
        let ws: Vec<f64> = (0..24).map(|i| 1.0 + (i % 5) as f64).collect();
        let fit = stats::weighted_poly_regression(&xs, &ys, &ws, 3).unwrap();
        let ok = fit
            .coefficients
            .iter()
            .zip([0.7, 1.1, -2.2, 0.9])
            .all(|(got, want)| (got - want).abs() < 1e-9);
        if !ok {
            c7_fails.push("cubic regression recovery");
        }
    }

    results.push(Criterion {
        index: 7,
        name: "deterministic property suite",
        pass: c7_fails.is_empty(),
        detail: if c7_fails.is_empty() {
            "all seven checks pass".into()
        } else {
            format!("failed: {}", c7_fails.join(", "))
        },
    });

    results.push(Criterion {
        index: 8,
        name: "rare neighbour counts: P(n > 13) < 1e-3",
        pass: c8_pass,
        detail: c8_detail,
    });

    // ---- report ----
    results.sort_by_key(|c| c.index);
    let mut all_pass = true;
    for c in &results {
        let line = format!(
            "criterion {}: {} - {} [{}]",
            c.index,
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        println!("{line}");
        eprintln!("{line}");
        all_pass &= c.pass;
    }
    assert!(all_pass, "at least one acceptance criterion failed");
}
