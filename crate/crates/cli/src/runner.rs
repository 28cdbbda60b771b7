//! Dispatch from a validated config to the owning module, one task per seed.

use crate::config::{config_hash, ClusterResolved, Diagnostic, Kind, Materialized};
use crate::output::{fmt_f64, OutputSet, RunManifest, Table};
use dilemma_core::dynamics::{
    cooperative_volume, detect_limit_cycle, field_raster, integrate_flow, sensitivity_sweep, uniform_simplex_point,
    CycleReport, DynamicsError,
};
use dilemma_core::geometry::{plot_coordinates, ternary_to_planar, winding_turns, BaryPoint, CartPoint2};
use dilemma_core::reinforce::{count_oscillations, train_population};
use dilemma_core::schelling::schelling_curves;
use dilemma_core::{GameError, GameSpec, PolicyProfile};
use dilemma_ssd::marl::{EpisodeMetrics, TrainError, Trainer};
use dilemma_ssd::xmeans::{same_partition, synthetic_behaviour_groups, xmeans};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};
use thiserror::Error;

pub const TOOL: &str = "dilemma-lab";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Runs every seed of `m`, writes outputs under `out_dir` and returns the
/// manifest. On error no output of this run is left on disk.
pub fn run(m: &Materialized, out_dir: &Path, jobs: Option<usize>) -> Result<(PathBuf, RunManifest), RunError> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    let hash = config_hash(m);
    let out = OutputSet::new(out_dir, m.kind, &hash)?;
    let seeds: Vec<u64> = if m.kind.seedless() { m.seeds[..1].to_vec() } else { m.seeds.clone() };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    pool.install(|| seeds.par_iter().try_for_each(|&seed| run_seed(m, &out, seed)))?;
    let manifest = RunManifest {
        tool: TOOL.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        kind: m.kind,
        config_hash: hash,
        config: m.clone(),
        started_unix_seconds: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        outputs: Vec::new(),
    };
    Ok(out.commit(manifest)?)
}

fn run_seed(m: &Materialized, out: &OutputSet, seed: u64) -> Result<(), RunError> {
    match m.kind {
        Kind::Field => field(m, out, seed),
        Kind::Flow => flow(m, out, seed),
        Kind::Volume => volume(m, out, seed),
        Kind::Sensitivity => sensitivity(m, out, seed),
        Kind::Schelling => schelling(m, out, seed),
        Kind::Reinforce => reinforce(m, out, seed),
        Kind::SsdTrain => ssd_train(m, out, seed),
        Kind::SsdEval => ssd_eval(m, out, seed),
        Kind::ClusterDebug => cluster_debug(m.cluster.as_ref().expect("cluster section"), out, seed),
    }
}

fn strategy_columns(spec: &GameSpec, prefix: &str) -> Vec<String> {
    spec.variant.strategies().iter().map(|s| format!("{prefix}{s}")).collect()
}

fn plot_columns(arity: usize) -> Vec<String> {
    let axes: &[&str] = if arity == 3 { &["plot_x", "plot_y"] } else { &["plot_x", "plot_y", "plot_z"] };
    axes.iter().map(|s| s.to_string()).collect()
}

fn floats(xs: &[f64]) -> impl Iterator<Item = String> + '_ {
    xs.iter().map(|&x| fmt_f64(x))
}

fn plot(point: &[f64]) -> Vec<f64> {
    // Points produced by the flow are on the simplex up to rounding.
    plot_coordinates(point).unwrap_or_else(|_| vec![f64::NAN; if point.len() == 3 { 2 } else { 3 }])
}

fn field(m: &Materialized, out: &OutputSet, seed: u64) -> Result<(), RunError> {
    let spec = m.game();
    let raster = field_raster(spec, m.field.as_ref().expect("field section").resolution, m.flow().beta)?;
    let mut header = strategy_columns(spec, "x_");
    header.extend(strategy_columns(spec, "rate_"));
    header.extend(strategy_columns(spec, "dir_"));
    header.extend(plot_columns(spec.arity()));
    let mut t = Table::new(header);
    for p in &raster {
        let mut row: Vec<String> = floats(&p.point).collect();
        row.extend(floats(&p.rate));
        row.extend(floats(&p.direction));
        row.extend(floats(&plot(&p.point)));
        t.push(row);
    }
    out.write_csv(seed, "field", &t)?;
    Ok(())
}

#[derive(Serialize)]
struct FlowSummary {
    start: Vec<f64>,
    final_point: Vec<f64>,
    snapshots: usize,
    cycle: Option<CycleReport>,
}

fn flow(m: &Materialized, out: &OutputSet, seed: u64) -> Result<(), RunError> {
    let spec = m.game();
    let t = m.trajectory.as_ref().expect("trajectory section");
    let start = match (&t.rows, &t.start) {
        (Some(rows), _) => PolicyProfile::new(rows)?,
        (None, Some(row)) => PolicyProfile::symmetric(spec.n, row)?,
        (None, None) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            PolicyProfile::symmetric(spec.n, &uniform_simplex_point(&mut rng, spec.arity()))?
        }
    };
    let traj = integrate_flow(spec, &start, m.flow(), t.steps, t.thin)?;
    let transient = (traj.len() as f64 * t.transient_fraction) as usize;
    let mut header = vec!["step".to_string()];
    header.extend(strategy_columns(spec, "x_"));
    header.extend(plot_columns(spec.arity()));
    let mut table = Table::new(header);
    for (step, p) in traj.steps.iter().zip(&traj.points) {
        let mut row = vec![step.to_string()];
        row.extend(floats(p));
        row.extend(floats(&plot(p)));
        table.push(row);
    }
    out.write_csv(seed, "trajectory", &table)?;
    let summary = FlowSummary {
        start: start.population_point(),
        final_point: traj.points.last().cloned().unwrap_or_default(),
        snapshots: traj.len(),
        cycle: detect_limit_cycle(&traj, t.cycle_eps, transient),
    };
    out.write_json(seed, "summary", &summary)?;
    Ok(())
}

fn volume(m: &Materialized, out: &OutputSet, seed: u64) -> Result<(), RunError> {
    let samples = m.volume.as_ref().expect("volume section").samples;
    let report = cooperative_volume(m.game(), samples, seed, m.flow())?;
    let mut t = Table::new(["value", "stderr", "hits", "samples", "seed"]);
    t.push(vec![fmt_f64(report.value), fmt_f64(report.stderr), report.hits.to_string(), report.samples.to_string(), seed.to_string()]);
    out.write_csv(seed, "volume", &t)?;
    out.write_json(seed, "report", &report)?;
    Ok(())
}

fn sensitivity(m: &Materialized, out: &OutputSet, seed: u64) -> Result<(), RunError> {
    let s = m.sensitivity.as_ref().expect("sensitivity section");
    let rows = sensitivity_sweep(m.game(), s.delta, s.samples, seed, m.flow())?;
    let mut t = Table::new(["parameter", "low_value", "high_value", "low_volume", "high_volume", "low_stderr", "high_stderr"]);
    for r in &rows {
        t.push(vec![
            r.parameter.clone(),
            fmt_f64(r.low_value),
            fmt_f64(r.high_value),
            fmt_f64(r.low_volume),
            fmt_f64(r.high_volume),
            fmt_f64(r.low_stderr),
            fmt_f64(r.high_stderr),
        ]);
    }
    out.write_csv(seed, "tornado", &t)?;
    Ok(())
}

fn schelling(m: &Materialized, out: &OutputSet, seed: u64) -> Result<(), RunError> {
    let s = m.schelling.as_ref().expect("schelling section");
    let spec = m.game();
    let curves = schelling_curves(spec, s.focal, s.fixed.as_deref().unwrap_or_default())?;
    let mut header = strategy_columns(spec, "fixed_");
    header.extend(["others_first", "payoff_first", "payoff_second"].map(String::from));
    let mut t = Table::new(header);
    for ((o, a), b) in curves.others.iter().zip(&curves.payoff_a).zip(&curves.payoff_b) {
        let mut row: Vec<String> = curves.fixed.iter().map(usize::to_string).collect();
        row.extend([o.to_string(), fmt_f64(*a), fmt_f64(*b)]);
        t.push(row);
    }
    out.write_csv(seed, "schelling", &t)?;
    Ok(())
}

#[derive(Serialize)]
struct ReinforceSummary {
    oscillations: usize,
    /// Net counterclockwise turns around the ternary centroid; three-strategy games only.
    winding_turns: Option<f64>,
    final_profile: PolicyProfile,
}

/// Thresholds for counting a swing of the cooperation level.
const SWING_HIGH: f64 = 0.3;
const SWING_LOW: f64 = 0.05;

fn reinforce(m: &Materialized, out: &OutputSet, seed: u64) -> Result<(), RunError> {
    let spec = m.game();
    let cfg = dilemma_core::reinforce::LearnerConfig { seed, ..m.reinforce.clone().expect("reinforce section") };
    let record = train_population(spec, &cfg)?;
    let mut header = vec!["update".to_string(), "cooperation".into(), "mean_reward".into()];
    header.extend(strategy_columns(spec, "x_"));
    let mut t = Table::new(header);
    for ((step, p), (c, r)) in record.trajectory.steps.iter().zip(&record.trajectory.points).zip(record.cooperation.iter().zip(&record.mean_reward)) {
        let mut row = vec![step.to_string(), fmt_f64(*c), r.map(fmt_f64).unwrap_or_default()];
        row.extend(floats(p));
        t.push(row);
    }
    out.write_csv(seed, "learning", &t)?;
    let winding = (spec.arity() == 3).then(|| {
        let planar: Vec<CartPoint2> = record
            .trajectory
            .points
            .iter()
            .filter_map(|p| BaryPoint::new(p).ok().map(|b| ternary_to_planar(&b)))
            .collect();
        winding_turns(&planar, CartPoint2 { x: 0.0, y: 3f64.sqrt() / 6.0 })
    });
    let summary = ReinforceSummary {
        oscillations: count_oscillations(&record.cooperation, SWING_HIGH, SWING_LOW),
        winding_turns: winding,
        final_profile: record.final_profile,
    };
    out.write_json(seed, "summary", &summary)?;
    Ok(())
}

fn episode_table(n: usize, episodes: &[EpisodeMetrics]) -> Table {
    let mut header: Vec<String> = ["episode", "env_steps", "epsilon", "collective_return", "incentives_positive", "incentives_zero", "incentives_negative", "cleaner_received"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..n).map(|i| format!("return_{i}")));
    header.extend((0..n).map(|i| format!("received_{i}")));
    let mut t = Table::new(header);
    for e in episodes {
        // Incentive kinds are stored as negative, zero, positive.
        let mut row = vec![
            e.episode.to_string(),
            e.env_steps.to_string(),
            fmt_f64(e.epsilon),
            fmt_f64(e.collective_return),
            e.incentives_given[2].to_string(),
            e.incentives_given[1].to_string(),
            e.incentives_given[0].to_string(),
            e.cleaner_received.map(fmt_f64).unwrap_or_default(),
        ];
        row.extend(floats(&e.returns));
        row.extend(floats(&e.received));
        t.push(row);
    }
    t
}

fn ssd_train(m: &Materialized, out: &OutputSet, seed: u64) -> Result<(), RunError> {
    let train = m.train.as_ref().expect("train section");
    let cfg = dilemma_ssd::marl::TrainConfig { seed, ..train.learner.clone() };
    let mut trainer = Trainer::new(m.env(), &cfg)?;
    let summary = trainer.run(train.budget)?;
    out.write_csv(seed, "episodes", &episode_table(m.env().n_agents, &summary.episodes))?;
    let mut t = Table::new(["update", "env_steps", "loss_env", "loss_inc", "loss_homo"]);
    for it in &summary.iterations {
        t.push(vec![it.update.to_string(), it.env_steps.to_string(), fmt_f64(it.loss_env), fmt_f64(it.loss_inc), fmt_f64(it.loss_homo)]);
    }
    out.write_csv(seed, "iterations", &t)?;
    out.write(seed, "checkpoint", "bin", &trainer.checkpoint_bytes())?;
    Ok(())
}

fn ssd_eval(m: &Materialized, out: &OutputSet, seed: u64) -> Result<(), RunError> {
    let train = m.train.as_ref().expect("train section");
    let eval = m.eval.as_ref().expect("eval section");
    let cfg = dilemma_ssd::marl::TrainConfig { seed, ..train.learner.clone() };
    let mut trainer = Trainer::new(m.env(), &cfg)?;
    if let Some(path) = &eval.checkpoint {
        trainer.load_checkpoint(&std::fs::read(path)?)?;
    }
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
    env_rng.set_stream(10);
    let mut act_rng = ChaCha8Rng::seed_from_u64(seed);
    act_rng.set_stream(11);
    let episodes = (0..eval.episodes)
        .map(|_| trainer.evaluate_episode(eval.epsilon, env_rng.gen(), &mut act_rng))
        .collect::<Result<Vec<_>, _>>()?;
    out.write_csv(seed, "evaluation", &episode_table(m.env().n_agents, &episodes))?;
    Ok(())
}

#[derive(Serialize)]
struct ClusterSummary {
    k: usize,
    bic: f64,
    centers: Vec<Vec<f64>>,
    /// Whether the labels match the generating groups exactly; synthetic data only.
    exact_partition: Option<bool>,
}

fn cluster_debug(c: &ClusterResolved, out: &OutputSet, seed: u64) -> Result<(), RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (data, truth) = match &c.features {
        Some(rows) => (rows.clone(), None),
        None => {
            let (d, t) = synthetic_behaviour_groups(c.group_size, c.separation, &mut rng);
            (d, Some(t))
        }
    };
    let clustering = xmeans(&data, c.k_min, c.k_max, &mut rng);
    let width = data[0].len();
    let mut header: Vec<String> = (0..width).map(|d| format!("feature_{d}")).collect();
    header.push("group".into());
    header.push("label".into());
    let mut t = Table::new(header);
    for (i, row) in data.iter().enumerate() {
        let mut r: Vec<String> = floats(row).collect();
        r.push(truth.as_ref().map(|t| t[i].to_string()).unwrap_or_default());
        r.push(clustering.labels[i].to_string());
        t.push(r);
    }
    out.write_csv(seed, "labels", &t)?;
    let summary = ClusterSummary {
        k: clustering.k(),
        bic: clustering.bic,
        exact_partition: truth.as_ref().map(|t| same_partition(t, &clustering.labels)),
        centers: clustering.centers,
    };
    out.write_json(seed, "summary", &summary)?;
    Ok(())
}
