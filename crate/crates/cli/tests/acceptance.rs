//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use contsched::fixtures::{random_scenario, RandomSpec};
use contsched::timeline::score;
use contsched::{
    baselines, brute_force, estimate_dsa_throughput, evaluate, group_layers, interval_overlap, objective_value,
    optimize, optimize_anytime, parse_scenario, slowdown, ContentionModel, GroupRef, Incumbent, RawLayer,
    Scenario, Schedule, SearchConfig, SlowdownGrid,
};

const ORACLE_SEEDS: u64 = 200;
const ORACLE_TIME_LIMIT_S: f64 = 60.0;
const GOOGLENET_GPU_SUM_MS: f64 = 2.32;
const GOOGLENET_REL_TOL: f64 = 1e-9;
const ZERO_CONTENTION_REL_TOL: f64 = 1e-9;
const FIXED_POINT_MS: f64 = 20.0;
const CROSSED_MIN_GAIN: f64 = 0.10;
const GRID_COUNT: usize = 1000;
const ESTIMATE_REL_TOL: f64 = 1e-12;
const INTERVAL_PAIRS: usize = 10_000;
const GROUPING_CASES: usize = 1000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn load(name: &str) -> Scenario {
    parse_scenario(&std::fs::read_to_string(fixture_dir().join(name)).unwrap()).unwrap()
}

fn load_schedule(name: &str) -> Schedule {
    Schedule::from_json(&std::fs::read_to_string(fixture_dir().join(name)).unwrap()).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs()
}

fn oracle_scenarios() -> Vec<Scenario> {
    let spec = RandomSpec::default();
    (0..ORACLE_SEEDS).map(|seed| random_scenario(seed, &spec)).collect()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut feasible = 0;
    for (seed, s) in oracle_scenarios().iter().enumerate() {
        if s.total_groups() > 12 || s.accelerators().len() != 2 || !(2..=3).contains(&s.dnns().len()) {
            return Err(format!("seed {seed} outside the scenario envelope"));
        }
        match (optimize(s, &SearchConfig::default()), brute_force(s, 1)) {
            (Ok(o), Ok(b)) if o.objective == b.objective => feasible += 1,
            (Err(a), Err(b)) if a == b => {}
            (o, b) => {
                return Err(format!(
                    "seed {seed}: optimize {:?} vs brute force {:?}",
                    o.map(|r| r.objective),
                    b.map(|r| r.objective)
                ))
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= ORACLE_TIME_LIMIT_S {
        return Err(format!("took {secs:.1} s"));
    }
    Ok(format!("{ORACLE_SEEDS} scenarios ({feasible} feasible) agree exactly in {secs:.2} s"))
}

fn googlenet_arithmetic() -> Outcome {
    let s = load("googlenet_xavier.json");
    let gpu = evaluate(&s, &load_schedule("googlenet_gpu_only.json")).map_err(|e| e.to_string())?;
    let t = gpu.dnns[0].latency_ms;
    if !rel_close(t, GOOGLENET_GPU_SUM_MS, GOOGLENET_REL_TOL) {
        return Err(format!("GPU-only T = {t}"));
    }
    let g0 = s.group(GroupRef::new(0, 0));
    let g1 = s.group(GroupRef::new(0, 1));
    let expect = GOOGLENET_GPU_SUM_MS - g0.exec_time[&0] + g0.exec_time[&1] + g0.tau_out_ms(1, 0) + g1.tau_in_ms(1, 0);
    let one = evaluate(&s, &load_schedule("googlenet_one_transition.json")).map_err(|e| e.to_string())?;
    let t1 = one.dnns[0].latency_ms;
    if !rel_close(t1, expect, GOOGLENET_REL_TOL) {
        return Err(format!("one-transition T = {t1}, expected {expect}"));
    }
    Ok(format!("GPU-only {t:.12} ms, one transition {t1:.12} ms (expected {expect:.12})"))
}

fn closed_form(s: &Scenario, sched: &Schedule) -> Vec<f64> {
    (0..s.dnns().len())
        .map(|n| {
            let mut total = 0.0;
            let mut prev: Option<(GroupRef, usize)> = None;
            for i in 0..s.group_count(n) {
                let g = GroupRef::new(n, i);
                let a = sched.get(g).unwrap();
                total += s.group(g).exec_time[&a];
                if let Some((pg, pa)) = prev {
                    if pa != a {
                        total += s.group(pg).tau_out_ms(pa, a) + s.group(g).tau_in_ms(pa, a);
                    }
                }
                prev = Some((g, a));
            }
            total
        })
        .collect()
}

fn plain_schedules(s: &Scenario, limit: usize, rng: &mut ChaCha8Rng) -> Vec<Schedule> {
    (0..limit)
        .map(|_| {
            let flat: Vec<usize> = s
                .group_refs()
                .map(|g| {
                    let options: Vec<usize> = s.group(g).exec_time.keys().copied().collect();
                    options[rng.random_range(0..options.len())]
                })
                .collect();
            Schedule::from_flat(s, &flat)
        })
        .collect()
}

fn zero_contention_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut scenarios: Vec<(String, Scenario)> = [
        "googlenet_xavier.json",
        "crossed.json",
        "contention_pair.json",
        "same_accel_overlap.json",
        "infeasible.json",
        "minimal.json",
    ]
    .iter()
    .map(|n| (n.to_string(), load(n)))
    .collect();
    let spec = RandomSpec {
        dependency: 0.0,
        ..RandomSpec::default()
    };
    scenarios.extend((0..100).map(|seed| (format!("random seed {seed}"), random_scenario(seed, &spec))));
    let mut checked = 0;
    for (name, s) in scenarios {
        let n = s.accelerators().len();
        let s = s.with_contention(ContentionModel::identity(n)).unwrap();
        for sched in plain_schedules(&s, 32, &mut rng) {
            let t = evaluate(&s, &sched).map_err(|e| format!("{name}: {e}"))?;
            for (got, want) in t.latencies().iter().zip(closed_form(&s, &sched)) {
                if !rel_close(*got, want, ZERO_CONTENTION_REL_TOL) {
                    return Err(format!("{name}: T = {got}, closed form {want}"));
                }
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} schedules match the closed form"))
}

fn contention_fixed_point() -> Outcome {
    let s = load("contention_pair.json");
    let t = evaluate(&s, &load_schedule("contention_pair_schedule.json")).map_err(|e| e.to_string())?;
    let done: Vec<f64> = t.dnns.iter().map(|d| d.completion_ms).collect();
    if done == [FIXED_POINT_MS, FIXED_POINT_MS] {
        Ok(format!("both groups finish at {:?} ms", done))
    } else {
        Err(format!("finish times {done:?}"))
    }
}

fn never_worse_than_baseline() -> Outcome {
    let mut compared = 0;
    for (seed, s) in oracle_scenarios().iter().enumerate() {
        let Ok(r) = optimize(s, &SearchConfig::default()) else {
            continue;
        };
        let mine = score(s.objective(), r.objective);
        for (label, b) in baselines(s) {
            let t = evaluate(s, &b).map_err(|e| e.to_string())?;
            if let Ok(v) = objective_value(&t, s.objective()) {
                if mine > score(s.objective(), v) {
                    return Err(format!("seed {seed}: {label} gives {v}, optimum {}", r.objective));
                }
                compared += 1;
            }
        }
    }

    let s = load("crossed.json");
    let best = brute_force(&s, 1).map_err(|e| e.to_string())?;
    let opt = optimize(&s, &SearchConfig::default()).map_err(|e| e.to_string())?;
    if opt.objective != best.objective {
        return Err(format!("crossed: optimize {} vs brute force {}", opt.objective, best.objective));
    }
    let mut worst_gain = f64::INFINITY;
    for (label, b) in baselines(&s) {
        let v = objective_value(&evaluate(&s, &b).unwrap(), s.objective()).map_err(|e| format!("{label}: {e}"))?;
        // Relative improvement in the objective's own direction.
        let gain = (score(s.objective(), v) - score(s.objective(), best.objective)) / v.abs();
        worst_gain = worst_gain.min(gain);
    }
    if worst_gain < CROSSED_MIN_GAIN {
        return Err(format!("crossed gain over best baseline only {:.1}%", worst_gain * 100.0));
    }
    Ok(format!(
        "{compared} feasible baselines never beat the optimum; crossed fixture beats every whole-DNN mapping by {:.1}%",
        worst_gain * 100.0
    ))
}

fn anytime_contract() -> Outcome {
    let mut runs = 0;
    let mut with_baseline = 0;
    for (seed, s) in oracle_scenarios().iter().enumerate() {
        let cfg = SearchConfig::default();
        let mut trace: Vec<Incumbent> = Vec::new();
        let r = optimize_anytime(s, &cfg, |i| trace.push(i.clone()));
        let batch = optimize(s, &cfg);
        match (r, batch) {
            (Ok(r), Ok(batch)) => {
                let scores: Vec<f64> = trace.iter().map(|i| score(s.objective(), i.objective)).collect();
                if !scores.windows(2).all(|w| w[1] < w[0]) {
                    return Err(format!("seed {seed}: incumbents not strictly improving"));
                }
                if trace.last().map(|i| &i.schedule) != Some(&batch.schedule) || r.schedule != batch.schedule {
                    return Err(format!("seed {seed}: final incumbent differs from batch optimum"));
                }
                runs += 1;
                // Without a whole-DNN mapping there is no baseline to start from.
                if baselines(s).is_empty() {
                    continue;
                }
                if !baselines(s).iter().any(|(_, b)| *b == trace[0].schedule) {
                    return Err(format!("seed {seed}: first incumbent is not a baseline"));
                }
                let mut zero = Vec::new();
                let z = optimize_anytime(s, &cfg.with_budget_ms(Some(0)), |i| zero.push(i.clone()))
                    .map_err(|e| e.to_string())?;
                if zero.len() != 1 || z.schedule != trace[0].schedule || z.proven_optimal {
                    return Err(format!("seed {seed}: budget 0 did not return only the baseline"));
                }
                with_baseline += 1;
            }
            (Err(a), Err(b)) if a == b && trace.is_empty() => {}
            _ => return Err(format!("seed {seed}: anytime and batch disagree")),
        }
    }
    Ok(format!(
        "{runs} feasible scenarios strictly improving with final equal to batch; \
         {with_baseline} start from a baseline and return it at budget 0"
    ))
}

fn random_valid_grid(rng: &mut ChaCha8Rng) -> SlowdownGrid {
    let axis = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(1..=5);
        let mut v = vec![0.0];
        for _ in 1..n {
            let last = *v.last().unwrap();
            v.push(last + rng.random_range(1.0..50.0));
        }
        v
    };
    let req = axis(rng);
    let mut ext = axis(rng);
    if ext.len() == 1 {
        ext.push(rng.random_range(1.0..50.0));
    }
    let factor = req
        .iter()
        .map(|_| {
            let mut row = vec![1.0];
            for _ in 1..ext.len() {
                let last: f64 = *row.last().unwrap();
                row.push(last + rng.random_range(0.0..1.0));
            }
            row
        })
        .collect();
    SlowdownGrid::new(req, ext, factor).expect("generator produces valid grids")
}

fn contention_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..GRID_COUNT {
        let grid = random_valid_grid(&mut rng);
        let model = ContentionModel::uniform(1, grid);
        for _ in 0..50 {
            let req = rng.random_range(0.0..250.0);
            if slowdown(&model, 0, req, 0.0).unwrap() != 1.0 {
                return Err(format!("grid {i}: slowdown at zero external demand is not 1"));
            }
            let mut exts: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..250.0)).collect();
            exts.sort_by(f64::total_cmp);
            let values: Vec<f64> = exts.iter().map(|&e| slowdown(&model, 0, req, e).unwrap()).collect();
            if values.windows(2).any(|w| w[1] < w[0]) || values.iter().any(|&v| v < 1.0) {
                return Err(format!("grid {i}: not monotone at req {req}: {values:?}"));
            }
        }
    }
    for _ in 0..GRID_COUNT {
        let thr = rng.random_range(0.01..200.0);
        let ug = rng.random_range(0.01..=1.0);
        let ud = rng.random_range(0.01..=1.0);
        let got = estimate_dsa_throughput(thr, ug, ud).map_err(|e| e.to_string())?;
        let want = thr * ud / ug;
        if !rel_close(got, want, ESTIMATE_REL_TOL) {
            return Err(format!("estimate({thr}, {ug}, {ud}) = {got}, want {want}"));
        }
    }
    Ok(format!("{GRID_COUNT} grids monotone with unit factor at zero demand; estimate within {ESTIMATE_REL_TOL:e}"))
}

/// Intersection length by case analysis on endpoint order.
fn overlap_oracle(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (first, second) = if a.0 <= b.0 { (a, b) } else { (b, a) };
    if second.0 >= first.1 {
        0.0
    } else if second.1 <= first.1 {
        second.1 - second.0
    } else {
        first.1 - second.0
    }
}

fn interval_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let interval = |rng: &mut ChaCha8Rng, grid: bool| {
        let (x, y) = if grid {
            (rng.random_range(0..8) as f64, rng.random_range(0..8) as f64)
        } else {
            (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0))
        };
        if x <= y { (x, y) } else { (y, x) }
    };
    let mut degenerate = 0;
    for i in 0..INTERVAL_PAIRS {
        // Small integer endpoints make touching, nested and zero-length
        // intervals common.
        let grid = i % 2 == 0;
        let a = interval(&mut rng, grid);
        let b = interval(&mut rng, grid);
        let got = interval_overlap(a, b);
        let want = overlap_oracle(a, b);
        if got != want {
            return Err(format!("{a:?} {b:?}: {got} vs {want}"));
        }
        if a.1 == b.0 || b.1 == a.0 || (a.0 <= b.0 && b.1 <= a.1) || (b.0 <= a.0 && a.1 <= b.1) || got == 0.0 {
            degenerate += 1;
        }
    }
    Ok(format!("{INTERVAL_PAIRS} pairs exact ({degenerate} touching, nested or disjoint)"))
}

fn grouping_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let supports: [&[usize]; 8] = [&[0], &[1], &[0, 1], &[0, 1], &[0, 1], &[0, 1], &[0, 1, 2], &[0, 1, 2]];
    let mut ok = 0;
    let mut empty = 0;
    for case in 0..GROUPING_CASES {
        let len = rng.random_range(1..40);
        let layers: Vec<RawLayer> = (0..len)
            .map(|i| RawLayer {
                index: i,
                kind: "conv".into(),
                fusible_with_next: rng.random_bool(0.3),
                reformat_on_exit: rng.random_bool(0.1),
                transition_allowed_after: rng.random_bool(0.85),
                supported_accelerators: supports[rng.random_range(0..supports.len())].iter().copied().collect(),
            })
            .collect();
        let intersect = |lo: usize, hi: usize| -> BTreeSet<usize> {
            layers[lo..=hi]
                .iter()
                .map(|l| l.supported_accelerators.clone())
                .reduce(|a, b| a.intersection(&b).copied().collect())
                .unwrap()
        };
        match group_layers(&layers) {
            Ok(groups) => {
                let covered: Vec<usize> = groups.iter().flat_map(|g| g.start_index..=g.end_index).collect();
                if covered != (0..len).collect::<Vec<_>>() {
                    return Err(format!("case {case}: not a partition"));
                }
                for (k, g) in groups.iter().enumerate() {
                    let inner_ok = layers[g.start_index..g.end_index]
                        .iter()
                        .all(|l| l.fusible_with_next || l.reformat_on_exit || !l.transition_allowed_after);
                    let end = &layers[g.end_index];
                    let closes = k + 1 == groups.len()
                        || (!end.fusible_with_next && !end.reformat_on_exit && end.transition_allowed_after);
                    if !inner_ok || !closes || g.supported_accelerators != intersect(g.start_index, g.end_index) {
                        return Err(format!("case {case}: group {k} breaks the boundary rule"));
                    }
                }
                let regrouped: Vec<RawLayer> = groups
                    .iter()
                    .enumerate()
                    .map(|(i, g)| RawLayer::permissive(i, g.supported_accelerators.iter().copied()))
                    .collect();
                let again = group_layers(&regrouped).map_err(|e| e.to_string())?;
                let identity = again.len() == groups.len()
                    && again.iter().enumerate().all(|(i, g)| {
                        g.start_index == i
                            && g.end_index == i
                            && g.supported_accelerators == groups[i].supported_accelerators
                    });
                if !identity {
                    return Err(format!("case {case}: regrouping is not the identity"));
                }
                ok += 1;
            }
            Err(contsched::grouping::GroupingError::EmptySupport { start, end }) => {
                if !intersect(start, end).is_empty() {
                    return Err(format!("case {case}: spurious empty support"));
                }
                empty += 1;
            }
            Err(e) => return Err(format!("case {case}: {e}")),
        }
    }
    Ok(format!("{GROUPING_CASES} cases ({ok} grouped, {empty} rejected for empty support)"))
}

fn run_optimize(scenario: &std::path::Path, workers: usize) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_contsched"))
        .args(["optimize", "--scenario"])
        .arg(scenario)
        .args(["--workers", &workers.to_string()])
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{} exited with {}: {}",
            scenario.display(),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files: Vec<PathBuf> = ["googlenet_xavier.json", "crossed.json", "contention_pair.json"]
        .iter()
        .map(|n| fixture_dir().join(n))
        .collect();
    let spec = RandomSpec::default();
    let mut seed = 0;
    while files.len() < 8 {
        let s = random_scenario(seed, &spec);
        seed += 1;
        if s.total_groups() >= 10 && optimize(&s, &SearchConfig::default()).is_ok() {
            let p = dir.path().join(format!("random_{seed}.json"));
            std::fs::write(&p, s.to_json()).map_err(|e| e.to_string())?;
            files.push(p);
        }
    }
    let mut runs = 0;
    for f in &files {
        let reference = run_optimize(f, 1)?;
        for workers in [1, 2, 3, 4, 8, 16] {
            if run_optimize(f, workers)? != reference {
                return Err(format!("{}: stdout differs with --workers {workers}", f.display()));
            }
            runs += 1;
        }
    }
    Ok(format!("{} scenarios, {runs} runs across --workers 1..16 byte-identical", files.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("googlenet fixture arithmetic", googlenet_arithmetic),
        ("zero-contention equivalence", zero_contention_equivalence),
        ("two-layer contention fixed point", contention_fixed_point),
        ("never worse than baseline", never_worse_than_baseline),
        ("anytime contract", anytime_contract),
        ("contention model properties", contention_properties),
        ("interval algebra", interval_algebra),
        ("grouping properties", grouping_properties),
        ("cli determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.2} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.2} s]");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
