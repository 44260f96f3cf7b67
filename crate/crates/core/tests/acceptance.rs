// Acceptance suite: one line per criterion. Criteria 1-5 need the RTE, DOG
// and WEB files under $ODS_DATA_DIR/<name>/{labels.csv,truth.csv}; without
// them they are reported as unverified unless ODS_REQUIRE_DATASETS=1.
// The process exits nonzero on a failed criterion only when
// ODS_ACCEPTANCE_STRICT=1, so the report does not break `cargo test`.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use online_dawid_skene::metrics::batch_statistic;
use online_dawid_skene::online::ProjectionFamily;
use online_dawid_skene::online::OnlineState;
use online_dawid_skene::oracle::{brute_marginal, brute_posterior, MAX_POSTERIOR_VOTES};
use online_dawid_skene::prelude::*;
use online_dawid_skene::Result;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MV_TOL: f64 = 0.30;
const EM_TOL: f64 = 0.50;
const ONLINE_TOL: f64 = 0.75;
const ONLINE_SEEDS: u64 = 10;
const ONLINE_EPOCHS: usize = 10;
const ORACLE_CASES: usize = 1000;
const ORACLE_TOL: f64 = 1e-12;
const FACTORIZATION_CASES: usize = 50;
const FACTORIZATION_TOL: f64 = 1e-10;
const MONOTONE_INSTANCES: u64 = 20;
const MONOTONE_SLACK: f64 = 1e-9;
const FIXED_POINT_EM_TOL: f64 = 1e-12;
const FIXED_POINT_SEEDS: u64 = 20;
const RESIDUAL_TOL: f64 = 1e-6;
const GAP_TOL: f64 = 1e-4;
const GAP_STEP: f64 = 1e-5;
const SA_STEPS: usize = 10_000;
const AGREEMENT_TOL: f64 = 1.0;
const AGREEMENT_EPOCHS: usize = 30;
const AGREEMENT_SEEDS: u64 = 5;
const STEP_HORIZON: u64 = 1_000_000;
const STEP_SUM_BOUND: f64 = 10.0;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Unverified,
}

struct Report {
    lines: Vec<(u32, Status, String)>,
}

impl Report {
    fn record(&mut self, id: u32, status: Status, detail: String) {
        let tag = match status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Unverified => "UNVERIFIED",
        };
        println!("[{tag}] criterion {id:>2}: {detail}");
        self.lines.push((id, status, detail));
    }

    fn check(&mut self, id: u32, ok: bool, detail: String) {
        self.record(id, if ok { Status::Pass } else { Status::Fail }, detail);
    }
}

fn info(text: &str) {
    println!("       {text}");
}

// ---------------------------------------------------------------------------
// dataset replication

struct Dataset {
    name: &'static str,
    labels: LabelSet,
    truth: GroundTruth,
}

struct Targets {
    name: &'static str,
    mv: f64,
    em: f64,
    online1: f64,
    online2: (f64, f64, f64),
}

const TARGETS: [Targets; 3] = [
    Targets { name: "rte", mv: 10.31, em: 7.25, online1: 7.00, online2: (0.9, 0.2, 6.88) },
    Targets { name: "dog", mv: 17.91, em: 15.86, online1: 15.86, online2: (0.75, 0.2, 15.99) },
    Targets { name: "web", mv: 26.93, em: 16.02, online1: 14.21, online2: (0.9, 0.2, 14.59) },
];

fn load_dataset(root: &std::path::Path, name: &'static str) -> Result<Option<Dataset>> {
    let dir = root.join(name);
    let (labels_path, truth_path) = (dir.join("labels.csv"), dir.join("truth.csv"));
    if !labels_path.is_file() || !truth_path.is_file() {
        return Ok(None);
    }
    let labels = load_labels(BufReader::new(File::open(labels_path)?), None)?;
    let truth = load_ground_truth(BufReader::new(File::open(truth_path)?), &labels)?;
    Ok(Some(Dataset { name, labels, truth }))
}

fn online_mean_error(data: &Dataset, schedule: StepSchedule) -> Result<(f64, Vec<f64>)> {
    let init = Initialization::new(&data.labels, InitMode::MajorityVote, OnlineConfig::new(schedule).box_exponent)?;
    let mut finals = Vec::new();
    let mut epoch0 = Vec::new();
    for seed in 0..ONLINE_SEEDS {
        let config = OnlineConfig {
            epochs: ONLINE_EPOCHS,
            seed,
            ..OnlineConfig::new(schedule)
        };
        let fit = online_fit(&data.labels, Some(&data.truth), &init, &config)?;
        epoch0.push(fit.epochs[0].error_rate.expect("truth supplied"));
        finals.push(fit.epochs.last().unwrap().error_rate.expect("truth supplied"));
    }
    Ok((finals.iter().sum::<f64>() / finals.len() as f64, epoch0))
}

fn dataset_criteria(report: &mut Report) -> Result<()> {
    let require = std::env::var("ODS_REQUIRE_DATASETS").is_ok_and(|v| v == "1");
    let root = std::env::var_os("ODS_DATA_DIR").map(PathBuf::from);
    let mut sets = Vec::new();
    if let Some(root) = &root {
        for t in &TARGETS {
            sets.push(load_dataset(root, t.name)?);
        }
    }
    if sets.len() != TARGETS.len() || sets.iter().any(Option::is_none) {
        let missing: Vec<&str> = TARGETS
            .iter()
            .enumerate()
            .filter(|(i, _)| sets.get(*i).is_none_or(Option::is_none))
            .map(|(_, t)| t.name)
            .collect();
        let status = if require { Status::Fail } else { Status::Unverified };
        for id in 1..=5 {
            report.record(
                id,
                status,
                format!("dataset missing ({}) under ODS_DATA_DIR", missing.join(", ")),
            );
        }
        return Ok(());
    }
    let sets: Vec<Dataset> = sets.into_iter().map(Option::unwrap).collect();

    let mut parts = [Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    let mut ok = [true; 5];
    for (data, t) in sets.iter().zip(&TARGETS) {
        let mv = error_rate(&predict(&mv_posterior(&data.labels)), &data.truth)?;
        ok[0] &= (mv - t.mv).abs() <= MV_TOL;
        parts[0].push(format!("{} {} (paper {})", data.name, format_error_rate(mv), t.mv));

        let fit = em_fit(&data.labels, &mv_posterior(&data.labels), &EmConfig::default())?;
        let em = error_rate(&predict(&posterior_all(&fit.confusion, &data.labels)), &data.truth)?;
        ok[1] &= (em - t.em).abs() <= EM_TOL;
        parts[1].push(format!("{} {} (paper {})", data.name, format_error_rate(em), t.em));

        let (o1, epoch0) = online_mean_error(data, StepSchedule::online1(2.0, 1.5)?)?;
        ok[2] &= (o1 - t.online1).abs() <= ONLINE_TOL;
        parts[2].push(format!("{} {} (paper {})", data.name, format_error_rate(o1), t.online1));

        let (a, b, target) = t.online2;
        let (o2, epoch0_2) = online_mean_error(data, StepSchedule::online2(a, b)?)?;
        ok[3] &= (o2 - target).abs() <= ONLINE_TOL;
        parts[3].push(format!("{} a={a} {} (paper {target})", data.name, format_error_rate(o2)));

        let same = epoch0.iter().chain(&epoch0_2).all(|&e| e == mv);
        ok[4] &= same;
        parts[4].push(format!("{} epoch0 {} vs mv {}", data.name, format_error_rate(epoch0[0]), format_error_rate(mv)));
    }
    let labels = [
        format!("majority vote within {MV_TOL}"),
        format!("batch EM within {EM_TOL}"),
        format!("online1 a=2 b=1.5, {ONLINE_SEEDS}-seed mean within {ONLINE_TOL}"),
        format!("online2, {ONLINE_SEEDS}-seed mean within {ONLINE_TOL}"),
        "epoch-0 online error equals majority vote".to_string(),
    ];
    for id in 0..5 {
        report.check(id as u32 + 1, ok[id], format!("{}: {}", labels[id], parts[id].join("; ")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// property suite

/// Row-stochastic tensor with a wide spread of entry sizes.
fn random_confusion(rng: &mut ChaCha8Rng, m: usize, k: usize) -> ConfusionTensor {
    let mut cube = Cube::zeros(m, k);
    for i in 0..m {
        for l in 0..k {
            let row = cube.row_mut(i, l);
            for v in row.iter_mut() {
                *v = rng.gen::<f64>().powi(4) + 1e-6;
            }
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= total);
        }
    }
    ConfusionTensor::new(cube).expect("normalized rows")
}

fn oracle_equivalence(report: &mut Report) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..ORACLE_CASES {
        let m = rng.gen_range(1..=6);
        let k = rng.gen_range(2..=5);
        let c = random_confusion(&mut rng, m, k);
        let count = rng.gen_range(0..=MAX_POSTERIOR_VOTES);
        let votes: Vec<Vote> = (0..count)
            .map(|_| Vote { worker: rng.gen_range(0..m), class: rng.gen_range(0..k) })
            .collect();
        let fast = posterior(&c, &votes);
        let exact = brute_posterior(&c, &votes)?;
        for (a, b) in fast.iter().zip(&exact) {
            worst = worst.max((a - b).abs());
        }
    }
    report.check(
        6,
        worst < ORACLE_TOL,
        format!("posterior vs exact rational, {ORACLE_CASES} cases: max |dev| {worst:.3e} (tol {ORACLE_TOL:e})"),
    );
    Ok(())
}

fn factorization(report: &mut Report) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..FACTORIZATION_CASES {
        let k = rng.gen_range(2..=3);
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(1..=4);
        let mut triples = Vec::new();
        for j in 0..n {
            let r = rng.gen_range(0..=m);
            for w in sample(&mut rng, m, r).iter() {
                triples.push((w, j, rng.gen_range(0..k)));
            }
        }
        let labels = LabelSet::from_triples(m, n, k, &triples)?;
        let c = random_confusion(&mut rng, m, k);
        let dev = (marginal_log_likelihood(&c, &labels) - brute_marginal(&c, &labels)?).abs();
        worst = worst.max(dev);
    }
    report.check(
        7,
        worst < FACTORIZATION_TOL,
        format!(
            "factorized loglik vs k^n enumeration, {FACTORIZATION_CASES} instances: max |dev| {worst:.3e} (tol {FACTORIZATION_TOL:e})"
        ),
    );
    Ok(())
}

fn monotonicity(report: &mut Report) -> Result<()> {
    let mut worst_drop: f64 = 0.0;
    let mut rounds = 0;
    for seed in 0..MONOTONE_INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let k = rng.gen_range(2..=4);
        let workers = rng.gen_range(5..=20);
        let instance = gen_instance(&SynthConfig {
            workers,
            items: rng.gen_range(100..=400),
            classes: k,
            accuracy_lo: 1.0 / k as f64 + 0.05,
            accuracy_hi: 0.9,
            labels_per_item: rng.gen_range(1..=workers.min(6)),
            seed,
        })?;
        let config = EmConfig { max_iter: 100, tol: 1e-12, ..EmConfig::default() };
        let fit = em_fit(&instance.labels, &mv_posterior(&instance.labels), &config)?;
        rounds += fit.iterations();
        for pair in fit.log_likelihood.windows(2) {
            worst_drop = worst_drop.max(pair[0] - pair[1]);
        }
    }
    report.check(
        8,
        worst_drop <= MONOTONE_SLACK,
        format!(
            "EM loglik non-decreasing over {MONOTONE_INSTANCES} instances ({rounds} rounds): largest drop {worst_drop:.3e} (slack {MONOTONE_SLACK:e})"
        ),
    );
    Ok(())
}

fn fixed_point(report: &mut Report) -> Result<()> {
    let fit_at = |labels: &LabelSet, tol: f64| {
        em_fit(labels, &mv_posterior(labels), &EmConfig { max_iter: 100_000, tol, ..EmConfig::default() })
    };
    let mut worst_residual: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    let mut failing = Vec::new();
    let mut all_converged = true;
    for seed in 0..FIXED_POINT_SEEDS {
        let instance = gen_instance(&SynthConfig { items: 500, seed, ..SynthConfig::default() })?;
        let labels = &instance.labels;
        let fit = fit_at(labels, FIXED_POINT_EM_TOL)?;
        all_converged &= fit.converged;
        let stats = batch_statistic(fit.confusion.cube(), labels);
        let residual = fixed_point_residual(&stats, labels).max_abs;
        let gap = stationarity_gap(&fit.confusion, labels, GAP_STEP)?;
        worst_residual = worst_residual.max(residual);
        worst_gap = worst_gap.max(gap);
        if residual >= RESIDUAL_TOL || gap >= GAP_TOL {
            failing.push((seed, gap));
        }
    }
    report.check(
        9,
        all_converged && failing.is_empty(),
        format!(
            "EM at tol {FIXED_POINT_EM_TOL:e} on {FIXED_POINT_SEEDS} instances: max residual {worst_residual:.3e} (tol {RESIDUAL_TOL:e}), max gap {worst_gap:.3e} at h={GAP_STEP:e} (tol {GAP_TOL:e}), {} over tolerance",
            failing.len()
        ),
    );
    if !failing.is_empty() {
        // the same instances iterated further under a tighter stopping rule
        let mut tighter: f64 = 0.0;
        for &(seed, _) in &failing {
            let instance = gen_instance(&SynthConfig { items: 500, seed, ..SynthConfig::default() })?;
            let fit = fit_at(&instance.labels, 1e-16)?;
            tighter = tighter.max(stationarity_gap(&fit.confusion, &instance.labels, GAP_STEP)?);
        }
        info(&format!(
            "seeds {:?} exceed the gap; rerun at tol 1e-16 their max gap is {tighter:.3e}",
            failing.iter().map(|(s, _)| *s).collect::<Vec<_>>()
        ));
    }
    Ok(())
}

fn online_invariants(report: &mut Report) -> Result<()> {
    let instance = gen_instance(&SynthConfig { workers: 12, items: 300, seed: 10, ..SynthConfig::default() })?;
    let labels = &instance.labels;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut violations = Vec::new();
    let mut total_resets = 0;
    let runs = [
        ("online1 e0=2", StepSchedule::online1(2.0, 1.5)?, Some(2)),
        ("online2 e0=2", StepSchedule::online2(0.75, 0.2)?, Some(2)),
        ("online2 e0=30", StepSchedule::online2(0.9, 0.2)?, Some(30)),
        ("online1 unprojected", StepSchedule::online1(1.0, 1.5)?, None),
    ];
    for (name, schedule, exponent) in runs {
        let init = Initialization::new(labels, InitMode::MajorityVote, exponent.unwrap_or(30))?;
        let family = match exponent {
            Some(e) => Some(ProjectionFamily::new(e, init.stats.clone())?),
            None => None,
        };
        let mut state = OnlineState::new(init.stats.clone(), family, rng.gen())?;
        let mut last_t = 0;
        for step in 0..SA_STEPS {
            let item = rng.gen_range(0..labels.num_items());
            state.step(labels.votes(item), &schedule);
            let s = state.stats().as_slice();
            if !s.iter().all(|&v| v > 0.0 && v < 1.0) {
                violations.push(format!("{name}: entry left (0,1) at step {step}"));
                break;
            }
            if let Some(f) = state.projection() {
                if !f.contains(state.stats().cube()) {
                    violations.push(format!("{name}: state outside K_t at step {step}"));
                    break;
                }
            }
            if state.projections() < last_t {
                violations.push(format!("{name}: counter decreased at step {step}"));
                break;
            }
            last_t = state.projections();
        }
        total_resets += last_t;
    }
    report.check(
        10,
        violations.is_empty(),
        if violations.is_empty() {
            format!("{SA_STEPS} SA steps x 4 runs: entries in (0,1), state in K_t, t monotone ({total_resets} resets)")
        } else {
            violations.join("; ")
        },
    );
    Ok(())
}

fn online_batch_agreement(report: &mut Report) -> Result<()> {
    let instance = gen_instance(&SynthConfig {
        workers: 30,
        items: 1000,
        classes: 3,
        accuracy_lo: 0.6,
        accuracy_hi: 0.9,
        labels_per_item: 5,
        seed: 11,
    })?;
    let labels = &instance.labels;
    let fit = em_fit(labels, &mv_posterior(labels), &EmConfig::default())?;
    let batch = error_rate(&predict(&posterior_all(&fit.confusion, labels)), &instance.truth)?;
    let init = Initialization::new(labels, InitMode::MajorityVote, OnlineConfig::new(StepSchedule::online1(2.0, 1.5)?).box_exponent)?;
    let mut parts = Vec::new();
    let mut best_gap = f64::INFINITY;
    for schedule in [StepSchedule::online1(2.0, 1.5)?, StepSchedule::online2(0.9, 0.2)?] {
        let mut total = 0.0;
        for seed in 0..AGREEMENT_SEEDS {
            let config = OnlineConfig { epochs: AGREEMENT_EPOCHS, seed, ..OnlineConfig::new(schedule) };
            let fit = online_fit(labels, Some(&instance.truth), &init, &config)?;
            total += fit.epochs.last().unwrap().error_rate.expect("truth supplied");
        }
        let mean = total / AGREEMENT_SEEDS as f64;
        best_gap = best_gap.min((mean - batch).abs());
        parts.push(format!("{} {}", schedule.kind(), format_error_rate(mean)));
    }
    report.check(
        11,
        best_gap <= AGREEMENT_TOL,
        format!(
            "batch EM {} vs online {AGREEMENT_SEEDS}-seed means {} (tol {AGREEMENT_TOL})",
            format_error_rate(batch),
            parts.join(", ")
        ),
    );
    Ok(())
}

/// Approximate index where the partial sum first reaches `bound`, from the
/// integral of the schedule beyond the horizon.
fn tail_horizon(s: &StepSchedule, sum: f64, bound: f64) -> f64 {
    let j0 = STEP_HORIZON as f64;
    if sum >= bound {
        return j0;
    }
    let need = bound - sum;
    match s.kind() {
        ScheduleKind::Online1 => (s.a() * j0 + s.b()) * (s.a() * need).exp() / s.a(),
        ScheduleKind::Online2 if s.a() < 1.0 => {
            let p = 1.0 - s.a();
            (j0.powf(p) + need * p / s.b()).powf(1.0 / p)
        }
        ScheduleKind::Online2 => j0 * (need / s.b()).exp(),
    }
}

fn step_conditions(report: &mut Report) -> Result<()> {
    // the settings used in the experiments
    let paper = [
        StepSchedule::online1(2.0, 1.5)?,
        StepSchedule::online2(0.9, 0.2)?,
        StepSchedule::online2(0.75, 0.2)?,
        StepSchedule::online2(0.99, 0.4)?,
    ];
    // plus accepted parameters spread over both admissible regions
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut accepted: Vec<StepSchedule> = paper.to_vec();
    accepted.push(StepSchedule::online2(1.0, 0.5)?);
    while accepted.len() < 24 {
        let candidate = if rng.gen_bool(0.5) {
            StepSchedule::online1(rng.gen_range(0.01..8.0), rng.gen_range(0.01..8.0))
        } else {
            StepSchedule::online2(rng.gen_range(0.5..=1.0), rng.gen_range(0.0..1.0))
        };
        if let Ok(s) = candidate {
            accepted.push(s);
        }
    }

    let mut range_ok = true;
    let mut square_ok = true;
    let mut sums = Vec::new();
    for (idx, s) in accepted.iter().enumerate() {
        let (mut sum, mut squared) = (0.0f64, 0.0f64);
        for j in 1..=STEP_HORIZON {
            let eta = s.eta(j);
            range_ok &= eta > 0.0 && eta < 1.0;
            let next = squared + eta * eta;
            square_ok &= next >= squared && next <= s.squared_sum_bound();
            squared = next;
            sum += eta;
        }
        if idx < paper.len() {
            sums.push((*s, sum, squared));
        }
    }
    let sum_ok = sums.iter().all(|(_, sum, _)| *sum > STEP_SUM_BOUND);
    let detail: Vec<String> = sums
        .iter()
        .map(|(s, sum, _)| format!("{} ({},{}) {sum:.3}", s.kind(), s.a(), s.b()))
        .collect();
    report.check(
        12,
        range_ok && square_ok && sum_ok,
        format!(
            "eta in (0,1) for {} accepted settings: {range_ok}; sum eta^2 monotone and under bound: {square_ok}; sum eta_j (j <= {STEP_HORIZON}) > {STEP_SUM_BOUND}: {}",
            accepted.len(),
            detail.join(", ")
        ),
    );
    for (s, sum, _) in &sums {
        if *sum <= STEP_SUM_BOUND {
            info(&format!(
                "{} ({},{}) reaches {STEP_SUM_BOUND} near j = {:.2e} (integral estimate)",
                s.kind(),
                s.a(),
                s.b(),
                tail_horizon(s, *sum, STEP_SUM_BOUND)
            ));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let mut report = Report { lines: Vec::new() };
    let steps: [(u32, fn(&mut Report) -> Result<()>); 8] = [
        (1, dataset_criteria),
        (6, oracle_equivalence),
        (7, factorization),
        (8, monotonicity),
        (9, fixed_point),
        (10, online_invariants),
        (11, online_batch_agreement),
        (12, step_conditions),
    ];
    for (id, step) in steps {
        if let Err(e) = step(&mut report) {
            report.record(id, Status::Fail, format!("error: {e}"));
        }
    }
    let count = |s: Status| report.lines.iter().filter(|(_, st, _)| *st == s).count();
    let (pass, fail, unverified) = (count(Status::Pass), count(Status::Fail), count(Status::Unverified));
    println!("summary: {pass} passed, {fail} failed, {unverified} unverified");
    let strict = std::env::var("ODS_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if fail == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
