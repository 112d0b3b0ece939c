//! Acceptance suite. Runs every criterion at its stated scale and prints one
//! PASS/FAIL line each; exits non-zero if any criterion fails.
//!
//! Non-flag arguments act as substring filters on criterion names.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use imitate_core::analysis::{decompose, exact_round_expectation, is_imitation_stable, is_nash, martingale_test};
use imitate_core::dynamics::{MigrationVector, Protocol, ProtocolParams, RoundEngine};
use imitate_core::game::GameKind;
use imitate_core::generators::{build_overshoot_pair, random_singleton, random_state};
use imitate_core::{CongestionGame, ElasticityBounds, GameState, LatencyFunction};
use imitate_dyn::commands::{cmd_extinction, cmd_lowerbound, cmd_poi, cmd_run, cmd_sweep, SweepAxis};
use imitate_dyn::config::{with_threads, ExperimentConfig, GameSource, StopKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gen_config(spec: &str) -> ExperimentConfig {
    ExperimentConfig::new(GameSource::Generator(spec.parse().expect("generator spec")))
}

// Oracles computed straight from the latency functions, without the
// game's lookup tables.

fn congestion_of(m: usize, strategies: &[Vec<usize>], counts: &[usize]) -> Vec<usize> {
    let mut c = vec![0; m];
    for (s, &k) in strategies.iter().zip(counts) {
        for &e in s {
            c[e] += k;
        }
    }
    c
}

fn potential_oracle(g: &CongestionGame, counts: &[usize]) -> f64 {
    let c = congestion_of(g.edge_count(), g.strategies(), counts);
    g.edges()
        .iter()
        .zip(&c)
        .map(|(f, &x)| (1..=x).map(|i| f.eval_unchecked(i)).sum::<f64>())
        .sum()
}

fn latency_oracle(g: &CongestionGame, counts: &[usize], p: usize) -> f64 {
    let c = congestion_of(g.edge_count(), g.strategies(), counts);
    g.strategies()[p].iter().map(|&e| g.edges()[e].eval_unchecked(c[e])).sum()
}

fn random_latency(rng: &mut ChaCha8Rng, n: usize) -> LatencyFunction {
    if rng.gen_bool(0.7) {
        let degree = rng.gen_range(0..=3);
        let mut c: Vec<f64> = (0..=degree).map(|_| rng.gen_range(0.0..4.0)).collect();
        c[0] += rng.gen_range(0.1..2.0);
        LatencyFunction::polynomial(c).unwrap()
    } else {
        let mut v = vec![0.0];
        let mut acc = rng.gen_range(0.1..3.0);
        for _ in 1..=n {
            v.push(acc);
            acc += rng.gen_range(0.0..3.0);
        }
        LatencyFunction::table(v).unwrap()
    }
}

/// Symmetric game with `m` edges and random edge subsets as strategies.
fn random_game(rng: &mut ChaCha8Rng, max_m: usize, max_n: usize) -> CongestionGame {
    let m = rng.gen_range(1..=max_m);
    let n = rng.gen_range(1..=max_n);
    let edges = (0..m).map(|_| random_latency(rng, n)).collect();
    let k = rng.gen_range(1..=6);
    let strategies = (0..k)
        .map(|_| {
            let mut s: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.4)).collect();
            if s.is_empty() {
                s.push(rng.gen_range(0..m));
            }
            s
        })
        .collect();
    CongestionGame::new(edges, strategies, n, GameKind::Explicit).unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let g = random_game(&mut rng, 6, 12);
        let x = random_state(&g, &mut rng).unwrap();
        let used: Vec<usize> = x.support().collect();
        let p = used[rng.gen_range(0..used.len())];
        let q = rng.gen_range(0..g.strategy_count());
        let mut y = x.clone();
        y.move_player(&g, p, q).unwrap();
        let delta_phi = g.potential(&y) - g.potential(&x);
        let mover = latency_oracle(&g, y.counts(), q) - latency_oracle(&g, x.counts(), p);
        let oracle_phi = potential_oracle(&g, y.counts()) - potential_oracle(&g, x.counts());
        let scale = potential_oracle(&g, x.counts()).abs().max(1.0);
        worst = worst
            .max((delta_phi - mover).abs() / scale)
            .max((oracle_phi - mover).abs() / scale);
    }
    check(worst <= 1e-9, format!("1000 single moves, worst relative error {worst:.2e}"))
}

fn error_oracle(g: &CongestionGame, before: &[usize], delta: &[i64]) -> f64 {
    let mut total = 0.0;
    for (e, f) in g.edges().iter().enumerate() {
        let x = before[e];
        let d = delta[e];
        if d > 0 {
            for u in x + 1..=x + d as usize {
                total += f.eval_unchecked(u) - f.eval_unchecked(x + 1);
            }
        } else if d < 0 {
            for u in x + 1 - (-d) as usize..=x {
                total += f.eval_unchecked(x) - f.eval_unchecked(u);
            }
        }
    }
    total
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut violations = 0;
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let g = random_game(&mut rng, 10, 50);
        let x = random_state(&g, &mut rng).unwrap();
        let mut mv = MigrationVector::new();
        for p in x.support().collect::<Vec<_>>() {
            let leaving = rng.gen_range(0..=x.count(p));
            for _ in 0..leaving {
                mv.add(p, rng.gen_range(0..g.strategy_count()), 1);
            }
        }
        let y = mv.apply(&g, &x).unwrap();
        let true_gain = potential_oracle(&g, y.counts()) - potential_oracle(&g, x.counts());
        let virtual_gain: f64 = mv
            .iter()
            .map(|(p, q, k)| {
                let mut single = x.clone();
                single.move_player(&g, p, q).unwrap();
                k as f64 * (latency_oracle(&g, single.counts(), q) - latency_oracle(&g, x.counts(), p))
            })
            .sum();
        let before = congestion_of(g.edge_count(), g.strategies(), x.counts());
        let after = congestion_of(g.edge_count(), g.strategies(), y.counts());
        let delta: Vec<i64> = before.iter().zip(&after).map(|(&b, &a)| a as i64 - b as i64).collect();
        let errors = error_oracle(&g, &before, &delta);
        let tol = 1e-9 * potential_oracle(&g, x.counts()).abs().max(1.0);
        if true_gain > virtual_gain + errors + tol {
            violations += 1;
        }
        match decompose(&g, &x, &mv) {
            Ok(d) => {
                let close = |a: f64, b: f64| (a - b).abs() <= tol;
                if !(close(d.true_gain, true_gain) && close(d.virtual_gain, virtual_gain) && close(d.error_sum, errors)) {
                    mismatches += 1;
                }
            }
            Err(_) => violations += 1,
        }
    }
    check(
        violations == 0 && mismatches == 0,
        format!("10000 migration vectors, {violations} violations, {mismatches} oracle mismatches"),
    )
}

fn criterion_3() -> Outcome {
    let (game, _) = random_singleton(4, 200, (1.0, 3.0), 2, 303).unwrap();
    let bounds = ElasticityBounds::compute(&game).unwrap();
    let params = ProtocolParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(304);
    let mut states = 0;
    let mut failures = Vec::new();
    let mut worst_margin = f64::NEG_INFINITY;
    while states < 20 {
        let x = random_state(&game, &mut rng).unwrap();
        if is_imitation_stable(&game, &x, bounds.nu) {
            continue;
        }
        let r = martingale_test(&game, &bounds, &x, &params.with_seed(states as u64), 10_000).unwrap();
        worst_margin = worst_margin.max((r.mean_delta_phi + 3.0 * r.stderr_delta_phi) / r.stderr_delta_phi.max(1e-300));
        if !(r.mean_delta_phi + 3.0 * r.stderr_delta_phi < 0.0 && r.half_gain_bound) {
            failures.push(x.counts().to_vec());
        }
        states += 1;
    }
    check(
        failures.is_empty(),
        format!("20 states x 10000 replays, failing states {failures:?}, worst (mean+3se)/se {worst_margin:.2}"),
    )
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn criterion_4() -> Outcome {
    let game = CongestionGame::new(
        vec![LatencyFunction::linear(2.0).unwrap(), LatencyFunction::linear(1.0).unwrap()],
        vec![vec![0], vec![1]],
        4,
        GameKind::Singleton,
    )
    .unwrap();
    let bounds = ElasticityBounds::compute(&game).unwrap();
    let x = GameState::new(&game, vec![3, 1]).unwrap();
    let params = ProtocolParams {
        lambda: 0.5,
        ..Default::default()
    };
    let exact = exact_round_expectation(&game, &bounds, &x, &params, Protocol::Imitation).unwrap();
    // link-1 players sample the link-2 player w.p. 1/4 and move w.p. (1/2)(6-2)/6
    let p: f64 = 0.25 * 0.5 * (6.0 - 2.0) / 6.0;
    let phi = |a: f64, b: f64| a * (a + 1.0) + b * (b + 1.0) / 2.0;
    let hand: f64 = (0..=3u64)
        .map(|k| {
            let kf = k as f64;
            binomial(3, k) * p.powi(k as i32) * (1.0 - p).powi(3 - k as i32) * (phi(3.0 - kf, 1.0 + kf) - phi(3.0, 1.0))
        })
        .sum();
    let mc = martingale_test(&game, &bounds, &x, &params.with_seed(404), 100_000).unwrap();
    let z = (mc.mean_delta_phi - exact.delta_phi) / mc.stderr_delta_phi;
    check(
        (exact.delta_phi - hand).abs() < 1e-12 && z.abs() <= 3.0,
        format!(
            "exact {:.6}, hand {:.6}, Monte-Carlo {:.6} +- {:.6} (z = {z:.2})",
            exact.delta_phi, hand, mc.mean_delta_phi, mc.stderr_delta_phi
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut cfg = gen_config("linear:a=1/2/3/4/5/6/7/8,n=1024");
    cfg.stop = StopKind::Approx;
    cfg.delta = 0.1;
    cfg.epsilon = 0.1;
    cfg.replicates = 10;
    cfg.params.seed = 5000;
    let values: Vec<f64> = (10..=16).map(|k| (1u64 << k) as f64).collect();
    let report = cmd_sweep(&cfg, SweepAxis::N, &values).unwrap();
    let pts: Vec<(f64, f64)> = report.rows[..6].iter().map(|r| (r.value.ln(), r.median)).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let c1 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let c2 = my - c1 * mx;
    let last = report.rows.last().unwrap();
    let predicted = c1 * last.value.ln() + c2;
    let unconverged: usize = report.rows.iter().map(|r| r.replicates - r.converged).sum();
    let medians: Vec<f64> = report.rows.iter().map(|r| r.median).collect();
    check(
        last.median <= 2.0 * predicted && unconverged == 0,
        format!(
            "medians {medians:?}, fit {c1:.1}*ln n + {c2:.1}, n=2^16 median {} vs prediction {predicted:.1}, unconverged {unconverged}",
            last.median
        ),
    )
}

fn criterion_6() -> Outcome {
    let (c, d, n, x2) = (100.0, 4usize, 10_000usize, 10usize);
    let (game, x) = match build_overshoot_pair(c, d, n, x2) {
        Ok(v) => v,
        Err(e) => return Err(format!("instance c=100, d=4, n=10^4, x2=10 cannot be built: {e}")),
    };
    let b = c - (x2 as f64).powi(d as i32);
    let bounds = ElasticityBounds::compute(&game).unwrap();
    let base = game.edge_latency(1, x.count(1));
    let mean_increase = |damping: bool| {
        let params = ProtocolParams {
            elasticity_damping: damping,
            ..Default::default()
        };
        let engine = RoundEngine::new(&game, &bounds, &params).unwrap();
        let total: f64 = (1..=10_000u64)
            .map(|r| {
                let y = engine.step(&x, Protocol::Imitation, r).unwrap().0;
                game.edge_latency(1, y.count(1)) - base
            })
            .sum();
        total / 10_000.0
    };
    let lambda = ProtocolParams::default().lambda;
    let damped = mean_increase(true);
    let undamped = mean_increase(false);
    check(
        damped <= 2.0 * lambda * b && undamped >= d as f64 / 2.0 * lambda * b && undamped >= 2.0 * damped,
        format!("damped {damped:.4}, undamped {undamped:.4}, lambda*b {:.4}", lambda * b),
    )
}

fn criterion_7() -> Outcome {
    let mut cfg = gen_config("scaled:a=1/1.5/2/3,n=10000,degree=1");
    cfg.replicates = 20;
    cfg.params.round_limit = 100_000;
    cfg.params.seed = 7000;
    let r = cmd_extinction(&cfg).unwrap();
    check(
        r.extinct_runs == 0 && r.below_threshold_runs == 0 && r.thresholds.is_some(),
        format!(
            "20 runs x 100000 rounds, emptied {}, below threshold {}, min loads {:?} vs thresholds {:?}",
            r.extinct_runs,
            r.below_threshold_runs,
            r.min_congestion,
            r.thresholds.unwrap_or_default()
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut cfg = gen_config("linear:a=1/2/4,n=1000");
    cfg.replicates = 50;
    cfg.params.round_limit = 1_000_000;
    cfg.params.seed = 8000;
    let r = cmd_poi(&cfg).unwrap();
    let checked = r.runs.iter().filter(|run| run.bounds_hold.is_some()).count();
    let all_used_unchecked = r.runs.iter().filter(|run| run.all_used && run.bounds_hold.is_none()).count();
    check(
        r.bound_violations == 0 && all_used_unchecked == 0 && r.unconverged_runs == 0 && r.mean_ratio <= 3.1,
        format!(
            "50 runs, {checked} checked, {} violations, {} emptied, mean ratio {:.6}, max {:.6}",
            r.bound_violations, r.emptied_runs, r.mean_ratio, r.max_ratio
        ),
    )
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two-links.game");
    std::fs::write(&path, "[edges]\npoly 0 2\npoly 0 1\n[strategies]\n0\n1\n[players]\n4\n[state]\n4 0\n").unwrap();
    let mut cfg = ExperimentConfig::new(GameSource::File(path));
    cfg.stop = StopKind::Nash;
    cfg.replicates = 20;
    cfg.params.round_limit = 100_000;
    cfg.params.seed = 9000;
    let mut details = Vec::new();
    let mut ok = true;
    for protocol in [Protocol::Exploration, Protocol::Combined] {
        cfg.params.protocol = protocol;
        let r = cmd_run(&cfg).unwrap();
        let worst = r.runs.iter().map(|run| run.rounds).max().unwrap();
        let nash = r.runs.iter().all(|run| run.converged && run.final_counts == [1, 3]);
        ok &= nash;
        details.push(format!("{protocol:?}: all Nash {nash}, max rounds {worst}"));
    }
    cfg.params.protocol = Protocol::Imitation;
    let r = cmd_run(&cfg).unwrap();
    let never = r.runs.iter().all(|run| !run.converged && run.final_counts == [4, 0]);
    let game = cfg.source.load().unwrap().game;
    let start = GameState::new(&game, vec![4, 0]).unwrap();
    let stable = is_imitation_stable(&game, &start, 0.0) && !is_nash(&game, &start);
    ok &= never && stable;
    details.push(format!("Imitation: stable at start {stable}, never Nash {never}"));
    check(ok, details.join("; "))
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut runs = 0;
    let mut violations = 0;
    let mut unstable = 0;
    let mut max_steps = 0;
    for n_base in 2..=6 {
        let mut cfg = gen_config(&format!("threshold:n={n_base},wmax=10,tripled=true,seed={}", rng.gen::<u32>()));
        cfg.replicates = 200;
        cfg.params.seed = rng.gen();
        let r = cmd_lowerbound(&cfg).unwrap();
        runs += r.runs.len();
        violations += r.runs.iter().filter(|run| !run.violations.is_empty()).count();
        unstable += r.runs.iter().filter(|run| !run.stable).count();
        max_steps = max_steps.max(r.max_steps);
    }
    check(
        runs == 1000 && violations == 0,
        format!("{runs} runs, {violations} with a violation, {unstable} unfinished, longest {max_steps} steps"),
    )
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    for protocol in [Protocol::Imitation, Protocol::Combined] {
        let mut traces = Vec::new();
        for threads in [1, 2, 8] {
            let mut cfg = gen_config("singleton:m=5,n=100000,lo=1,hi=4,seed=11");
            cfg.stop = StopKind::Limit;
            cfg.params.round_limit = 25;
            cfg.params.seed = 1100;
            cfg.params.lambda = 0.05;
            cfg.params.protocol = protocol;
            cfg.threads = Some(threads);
            let out = dir.path().join(format!("{protocol:?}-{threads}.csv"));
            cfg.out = Some(out.clone());
            with_threads(cfg.threads, || cmd_run(&cfg)).unwrap().unwrap();
            traces.push(std::fs::read(&out).unwrap());
        }
        let same = traces.windows(2).all(|w| w[0] == w[1]);
        ok &= same;
        details.push(format!("{protocol:?}: identical across 1/2/8 threads {same} ({} bytes)", traces[0].len()));
    }
    check(ok, details.join("; "))
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("criterion_01_rosenthal_identity", criterion_1),
        ("criterion_02_potential_decomposition", criterion_2),
        ("criterion_03_supermartingale", criterion_3),
        ("criterion_04_exact_expectation", criterion_4),
        ("criterion_05_logarithmic_convergence", criterion_5),
        ("criterion_06_overshooting_control", criterion_6),
        ("criterion_07_non_extinction", criterion_7),
        ("criterion_08_price_of_imitation", criterion_8),
        ("criterion_09_exploration_reaches_nash", criterion_9),
        ("criterion_10_threshold_invariant", criterion_10),
        ("criterion_11_thread_determinism", criterion_11),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        if !filters.is_empty() && !filters.iter().any(|flt| name.contains(flt.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
