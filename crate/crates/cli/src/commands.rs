//! Experiment commands. Each returns a serializable report; replicates run
//! in parallel and replicate `r` uses seed `seed + r`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use imitate_core::analysis::{
    exact_round_expectation, fractional_optimum, is_imitation_stable, martingale_test,
    social_cost, stable_cost_bounds_check, MartingaleReport, RoundExpectation,
};
use imitate_core::dynamics::{
    run, sequential_imitation_step, Protocol, RoundEngine, RunOptions, Trace,
};
use imitate_core::generators::random_state;
use imitate_core::{CongestionGame, ElasticityBounds, GameState};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, GameSource, StopKind};
use crate::genspec::Instance;
use crate::trace::write_trace;

/// Start of replicate `r`: the instance's fixed state, or a uniformly
/// random assignment drawn from the replicate seed.
pub fn initial_state(inst: &Instance, cfg: &ExperimentConfig, r: usize) -> Result<GameState> {
    match &inst.initial {
        Some(x) => Ok(x.clone()),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.replicate_seed(r));
            Ok(random_state(&inst.game, &mut rng)?)
        }
    }
}

/// `out` for a single replicate, otherwise `stem-r.ext`.
pub fn replicate_path(out: &Path, r: usize, replicates: usize) -> PathBuf {
    if replicates == 1 {
        return out.to_path_buf();
    }
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let name = match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}-{r}.{ext}"),
        None => format!("{stem}-{r}"),
    };
    out.with_file_name(name)
}

fn source_label(source: &GameSource) -> String {
    match source {
        GameSource::File(p) => p.display().to_string(),
        GameSource::Generator(g) => g.to_string(),
    }
}

fn run_replicate(inst: &Instance, bounds: &ElasticityBounds, cfg: &ExperimentConfig, r: usize) -> Result<Trace> {
    let x0 = initial_state(inst, cfg, r)?;
    let options = RunOptions::new(cfg.stop_condition(bounds)?, cfg.equilibrium(bounds)?);
    let params = cfg.params.with_seed(cfg.replicate_seed(r));
    Ok(run(&inst.game, bounds, &x0, &params, &options)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub replicate: usize,
    pub seed: u64,
    pub converged: bool,
    pub rounds: usize,
    pub final_potential: f64,
    pub final_social_cost: Option<f64>,
    pub final_counts: Vec<usize>,
    pub trace_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub game: String,
    pub protocol: Protocol,
    pub lambda: f64,
    pub runs: Vec<RunSummary>,
    pub all_converged: bool,
}

pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let inst = cfg.source.load()?;
    let bounds = ElasticityBounds::compute(&inst.game)?;
    let runs = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let trace = run_replicate(&inst, &bounds, cfg, r)?;
            let trace_file = match cfg.out_path() {
                Some(out) => {
                    let path = replicate_path(out, r, cfg.replicates);
                    let file = std::fs::File::create(&path)
                        .with_context(|| format!("creating {}", path.display()))?;
                    write_trace(&trace.rows, std::io::BufWriter::new(file))?;
                    Some(path)
                }
                None => None,
            };
            info!("replicate {r}: {} rounds, converged {}", trace.rounds, trace.converged);
            Ok(RunSummary {
                replicate: r,
                seed: cfg.replicate_seed(r),
                converged: trace.converged,
                rounds: trace.rounds,
                final_potential: inst.game.potential(&trace.final_state),
                final_social_cost: social_cost(&inst.game, &trace.final_state).ok(),
                final_counts: trace.final_state.counts().to_vec(),
                trace_file,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunReport {
        game: source_label(&cfg.source),
        protocol: cfg.params.protocol,
        lambda: cfg.params.lambda,
        all_converged: runs.iter().all(|r| r.converged),
        runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    N,
    Lambda,
    Epsilon,
    Delta,
}

impl std::str::FromStr for SweepAxis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(SweepAxis::N),
            "lambda" => Ok(SweepAxis::Lambda),
            "epsilon" => Ok(SweepAxis::Epsilon),
            "delta" => Ok(SweepAxis::Delta),
            other => bail!("unknown sweep axis '{other}' (n, lambda, epsilon, delta)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub replicates: usize,
    pub converged: usize,
    pub median: f64,
    pub mean: f64,
    /// 95% normal-approximation interval for the mean.
    pub ci_low: f64,
    pub ci_high: f64,
    pub rounds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub game: String,
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Mean and half-width of the 95% normal interval.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, 1.96 * (var / k).sqrt())
}

/// Rounds until the stop condition for every axis value and replicate.
/// Runs that hit the round limit count with the limit.
pub fn cmd_sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepReport> {
    if values.is_empty() {
        bail!("no sweep values given");
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut c = cfg.clone();
        match axis {
            SweepAxis::N => match &cfg.source {
                GameSource::Generator(g) => {
                    if value < 1.0 || value.fract() != 0.0 {
                        bail!("n = {value} is not a positive integer");
                    }
                    c.source = GameSource::Generator(g.with_arg("n", value as usize));
                }
                GameSource::File(_) => bail!("an n sweep needs a generator (--gen)"),
            },
            SweepAxis::Lambda => c.params.lambda = value,
            SweepAxis::Epsilon => c.epsilon = value,
            SweepAxis::Delta => c.delta = value,
        }
        c.params.validate()?;
        let inst = c.source.load()?;
        let bounds = ElasticityBounds::compute(&inst.game)?;
        let traces = (0..c.replicates)
            .into_par_iter()
            .map(|r| run_replicate(&inst, &bounds, &c, r))
            .collect::<Result<Vec<_>>>()?;
        let rounds: Vec<usize> = traces.iter().map(|t| t.rounds).collect();
        let as_f64: Vec<f64> = rounds.iter().map(|&r| r as f64).collect();
        let (mean, half) = mean_ci(&as_f64);
        info!("{axis:?} = {value}: median {} rounds", median(&as_f64));
        rows.push(SweepRow {
            value,
            replicates: c.replicates,
            converged: traces.iter().filter(|t| t.converged).count(),
            median: median(&as_f64),
            mean,
            ci_low: mean - half,
            ci_high: mean + half,
            rounds,
        });
    }
    let report = SweepReport {
        game: source_label(&cfg.source),
        axis,
        rows,
    };
    if let Some(out) = cfg.out_path() {
        let mut w = csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
        w.write_record(["value", "replicates", "converged", "median", "mean", "ci_low", "ci_high"])?;
        for r in &report.rows {
            w.write_record([
                r.value.to_string(),
                r.replicates.to_string(),
                r.converged.to_string(),
                r.median.to_string(),
                r.mean.to_string(),
                r.ci_low.to_string(),
                r.ci_high.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionRun {
    pub replicate: usize,
    pub seed: u64,
    pub rounds: usize,
    /// First round count after which the state was imitation-stable.
    pub absorbed_at: Option<usize>,
    pub min_congestion: Vec<usize>,
    pub emptied: bool,
    pub below_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionReport {
    pub game: String,
    pub round_limit: usize,
    /// Half the fractional-optimum load per resource, when defined.
    pub thresholds: Option<Vec<f64>>,
    pub min_congestion: Vec<usize>,
    pub extinct_runs: usize,
    pub below_threshold_runs: usize,
    pub runs: Vec<ExtinctionRun>,
    pub passed: bool,
}

/// Runs every replicate for the round limit and tracks the smallest load
/// seen on each resource.
pub fn cmd_extinction(cfg: &ExperimentConfig) -> Result<ExtinctionReport> {
    let inst = cfg.source.load()?;
    let game = &inst.game;
    if !game.is_singleton() {
        bail!("extinction experiments need a singleton game");
    }
    if cfg.params.protocol == Protocol::Sequential {
        bail!("extinction experiments need a concurrent protocol");
    }
    let bounds = ElasticityBounds::compute(game)?;
    let thresholds = fractional_optimum(game)
        .ok()
        .map(|opt| opt.loads.iter().map(|l| l / 2.0).collect::<Vec<f64>>());
    let guard = if cfg.params.use_nu_threshold { bounds.nu } else { 0.0 };

    let runs = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.replicate_seed(r);
            let params = cfg.params.with_seed(seed);
            let engine = RoundEngine::new(game, &bounds, &params)?;
            let mut x = initial_state(&inst, cfg, r)?;
            let mut mins = x.congestion().to_vec();
            let mut absorbed_at = None;
            for round in 1..=cfg.params.round_limit {
                if absorbed_at.is_none()
                    && cfg.params.protocol == Protocol::Imitation
                    && is_imitation_stable(game, &x, guard)
                {
                    absorbed_at = Some(round - 1);
                }
                let mv = engine.round(&x, cfg.params.protocol, round as u64)?;
                x = mv.apply(game, &x)?;
                for (m, &c) in mins.iter_mut().zip(x.congestion()) {
                    *m = (*m).min(c);
                }
            }
            let below_threshold = thresholds
                .as_ref()
                .is_some_and(|t| mins.iter().zip(t).any(|(&m, &y)| (m as f64) <= y));
            Ok(ExtinctionRun {
                replicate: r,
                seed,
                rounds: cfg.params.round_limit,
                absorbed_at,
                emptied: mins.contains(&0),
                min_congestion: mins,
                below_threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let min_congestion = (0..game.edge_count())
        .map(|e| runs.iter().map(|r| r.min_congestion[e]).min().unwrap_or(0))
        .collect();
    let extinct_runs = runs.iter().filter(|r| r.emptied).count();
    let below_threshold_runs = runs.iter().filter(|r| r.below_threshold).count();
    Ok(ExtinctionReport {
        game: source_label(&cfg.source),
        round_limit: cfg.params.round_limit,
        thresholds,
        min_congestion,
        extinct_runs,
        below_threshold_runs,
        passed: extinct_runs == 0 && below_threshold_runs == 0,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoiRun {
    pub replicate: usize,
    pub seed: u64,
    pub converged: bool,
    pub rounds: usize,
    pub social_cost: f64,
    pub ratio: f64,
    pub all_used: bool,
    /// Outcome of the cost-bounds check; `None` where it does not apply.
    pub bounds_hold: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoiReport {
    pub game: String,
    /// `n / A_Γ`
    pub optimum: f64,
    pub useless: Vec<usize>,
    /// Smallest fractional-optimum load, to compare with `ln n`.
    pub min_fractional_load: f64,
    pub ln_n: f64,
    pub mean_ratio: f64,
    pub ci_half_width: f64,
    pub max_ratio: f64,
    pub unconverged_runs: usize,
    pub emptied_runs: usize,
    pub bound_violations: usize,
    pub runs: Vec<PoiRun>,
    pub passed: bool,
}

/// Runs each replicate to an imitation-stable state and compares its
/// social cost to the fractional optimum.
pub fn cmd_poi(cfg: &ExperimentConfig) -> Result<PoiReport> {
    let inst = cfg.source.load()?;
    let game = &inst.game;
    let opt = fractional_optimum(game).context("price of imitation needs linear parallel links")?;
    if !opt.useless.is_empty() {
        warn!("useless resources present: {:?}", opt.useless);
    }
    let bounds = ElasticityBounds::compute(game)?;
    let mut c = cfg.clone();
    c.stop = StopKind::Stable;
    let runs = (0..c.replicates)
        .into_par_iter()
        .map(|r| {
            let trace = run_replicate(&inst, &bounds, &c, r)?;
            let x = &trace.final_state;
            let sc = social_cost(game, x)?;
            let all_used = x.congestion().iter().all(|&k| k > 0);
            let bounds_hold = if trace.converged && all_used && opt.useless.is_empty() {
                stable_cost_bounds_check(game, x).ok().map(|b| b.holds)
            } else {
                None
            };
            Ok(PoiRun {
                replicate: r,
                seed: c.replicate_seed(r),
                converged: trace.converged,
                rounds: trace.rounds,
                social_cost: sc,
                ratio: sc / opt.latency,
                all_used,
                bounds_hold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = runs.iter().map(|r| r.ratio).collect();
    let (mean_ratio, ci_half_width) = mean_ci(&ratios);
    let bound_violations = runs.iter().filter(|r| r.bounds_hold == Some(false)).count();
    let unconverged_runs = runs.iter().filter(|r| !r.converged).count();
    Ok(PoiReport {
        game: source_label(&cfg.source),
        optimum: opt.latency,
        min_fractional_load: opt.loads.iter().copied().fold(f64::INFINITY, f64::min),
        ln_n: (game.n() as f64).ln(),
        useless: opt.useless,
        mean_ratio,
        ci_half_width,
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        unconverged_runs,
        emptied_runs: runs.iter().filter(|r| !r.all_used).count(),
        bound_violations,
        passed: bound_violations == 0 && unconverged_runs == 0,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerboundRun {
    pub replicate: usize,
    pub seed: u64,
    pub steps: usize,
    pub stable: bool,
    /// Steps (0 = start) at which some base player had all copies on one side.
    pub violations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerboundReport {
    pub game: String,
    pub runs: Vec<LowerboundRun>,
    pub max_steps: usize,
    pub invariant_holds: bool,
    pub all_stable: bool,
}

/// Sequential imitation on threshold games from the canonical start,
/// checking the tripled-player invariant after every step. With a
/// `threshold` generator, replicate `r` also offsets the weight seed by `r`.
pub fn cmd_lowerbound(cfg: &ExperimentConfig) -> Result<LowerboundReport> {
    let runs = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let inst = match &cfg.source {
                GameSource::Generator(g) if g.name == "threshold" => {
                    let base: u64 = match g.args.get("seed") {
                        Some(s) => s.parse().context("threshold seed")?,
                        None => 0,
                    };
                    g.with_arg("seed", base.wrapping_add(r as u64)).build()?
                }
                other => other.load()?,
            };
            let Some(t) = inst.threshold else {
                bail!("lowerbound needs a threshold game (--gen threshold:...)");
            };
            let seed = cfg.replicate_seed(r);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = t.initial_state.clone();
            let mut violations = Vec::new();
            if !t.invariant_violations(&x).is_empty() {
                violations.push(0);
            }
            let mut steps = 0;
            let mut stable = false;
            while steps < cfg.params.round_limit {
                if sequential_imitation_step(&t.game, &mut x, &mut rng).is_none() {
                    stable = true;
                    break;
                }
                steps += 1;
                if !t.invariant_violations(&x).is_empty() {
                    violations.push(steps);
                }
            }
            Ok(LowerboundRun {
                replicate: r,
                seed,
                steps,
                stable,
                violations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LowerboundReport {
        game: source_label(&cfg.source),
        max_steps: runs.iter().map(|r| r.steps).max().unwrap_or(0),
        invariant_holds: runs.iter().all(|r| r.violations.is_empty()),
        all_stable: runs.iter().all(|r| r.stable),
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub replicate: usize,
    pub seed: u64,
    pub counts: Vec<usize>,
    pub martingale: MartingaleReport,
    /// Exact one-round expectation, for instances small enough to enumerate.
    pub exact: Option<RoundExpectation>,
    /// Monte-Carlo mean within three standard errors of the exact value.
    pub exact_agrees: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub game: String,
    pub replays: usize,
    pub entries: Vec<AuditEntry>,
    pub passed: bool,
}

const STATE_DRAWS: usize = 10_000;

/// Replays one imitation round many times from each audited state. States
/// are the instance's fixed start or random states that are not
/// imitation-stable.
pub fn cmd_audit(cfg: &ExperimentConfig, replays: usize) -> Result<AuditReport> {
    let inst = cfg.source.load()?;
    let game = &inst.game;
    let bounds = ElasticityBounds::compute(game)?;
    let guard = if cfg.params.use_nu_threshold { bounds.nu } else { 0.0 };
    let mut entries = Vec::with_capacity(cfg.replicates);
    for r in 0..cfg.replicates {
        let seed = cfg.replicate_seed(r);
        let x = match &inst.initial {
            Some(x) => x.clone(),
            None => unstable_state(game, guard, seed)?,
        };
        let params = cfg.params.with_seed(seed);
        let martingale = martingale_test(game, &bounds, &x, &params, replays)?;
        let exact = exact_round_expectation(game, &bounds, &x, &params, Protocol::Imitation).ok();
        let exact_agrees = exact.map(|e| {
            (martingale.mean_delta_phi - e.delta_phi).abs() <= 3.0 * martingale.stderr_delta_phi + 1e-12
        });
        entries.push(AuditEntry {
            replicate: r,
            seed,
            counts: x.counts().to_vec(),
            martingale,
            exact,
            exact_agrees,
        });
    }
    Ok(AuditReport {
        game: source_label(&cfg.source),
        replays,
        passed: entries
            .iter()
            .all(|e| e.martingale.passed() && e.exact_agrees != Some(false)),
        entries,
    })
}

fn unstable_state(game: &CongestionGame, guard: f64, seed: u64) -> Result<GameState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..STATE_DRAWS {
        let x = random_state(game, &mut rng)?;
        if !is_imitation_stable(game, &x, guard) {
            return Ok(x);
        }
    }
    bail!("no state that is not imitation-stable found in {STATE_DRAWS} random draws")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(spec: &str) -> ExperimentConfig {
        ExperimentConfig::new(GameSource::Generator(spec.parse().unwrap()))
    }

    #[test]
    fn statistics_helpers() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let (m, h) = mean_ci(&[1.0, 1.0, 1.0]);
        assert_eq!((m, h), (1.0, 0.0));
    }

    #[test]
    fn replicate_paths() {
        assert_eq!(replicate_path(Path::new("t.csv"), 0, 1), PathBuf::from("t.csv"));
        assert_eq!(replicate_path(Path::new("d/t.csv"), 3, 5), PathBuf::from("d/t-3.csv"));
    }

    #[test]
    fn single_link_converges_at_once() {
        let report = cmd_run(&gen("linear:a=1,n=5")).unwrap();
        assert!(report.all_converged);
        assert_eq!(report.runs[0].rounds, 0);
    }

    #[test]
    fn lowerbound_reports_tiny_instances() {
        let mut cfg = gen("threshold:n=2,seed=1");
        cfg.replicates = 5;
        let report = cmd_lowerbound(&cfg).unwrap();
        assert!(report.invariant_holds);
        assert!(report.all_stable);
    }

    #[test]
    fn lowerbound_needs_threshold_game() {
        assert!(cmd_lowerbound(&gen("linear:a=1/2,n=4")).is_err());
    }

    #[test]
    fn extinction_needs_singleton() {
        assert!(cmd_extinction(&gen("threshold:n=3")).is_err());
    }

    #[test]
    fn single_resource_never_empties() {
        let mut cfg = gen("scaled:a=1,n=10");
        cfg.params.round_limit = 100;
        cfg.replicates = 3;
        let report = cmd_extinction(&cfg).unwrap();
        assert_eq!(report.extinct_runs, 0);
    }
}
