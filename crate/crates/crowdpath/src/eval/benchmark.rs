//! The benchmark runner: leave-one-scene-out evaluation of every method
//! over every valid window of every pedestrian, per horizon.

use std::fmt;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::eval::baselines::{linear_baseline, sim_k_baseline};
use crate::eval::metrics::{ade, fde, Metrics};
use crate::geom::{Trajectory, Vec2};
use crate::ingest::{extract_structures, CrowdDatabase, Scene};
use crate::matching::{build_index, select_representatives};
use crate::planner::{predict, PersonalityObservation};
use crate::structure::{canonicalize, DatabaseStructure, SourceId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Full,
    NoPersonality,
    Linear,
    Sim1,
    SimK,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::NoPersonality => "nopers",
            Method::Linear => "linear",
            Method::Sim1 => "sim1",
            Method::SimK => "simk",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "full" => Ok(Method::Full),
            "nopers" => Ok(Method::NoPersonality),
            "linear" => Ok(Method::Linear),
            "sim1" => Ok(Method::Sim1),
            "simk" => Ok(Method::SimK),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected full, nopers, linear, sim1, simk)"
            ))),
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(Method::parse)
            .collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One evaluation window: the canonical structure (query + ground truth),
/// the exact scene-frame observation and future, and the long-term
/// observations backing trait extraction.
#[derive(Debug, Clone)]
pub struct EvalSample {
    pub structure: DatabaseStructure,
    pub obs_scene: Trajectory,
    pub gt_scene: Trajectory,
    pub pobs: PersonalityObservation,
}

/// All valid evaluation windows of a scene under the given parameters.
pub fn collect_samples(scene: &Scene, cfg: &Config) -> Result<Vec<EvalSample>> {
    let window = cfg.window();
    let f_obs = cfg.f_obs;
    let p_pred = cfg.p_pred;
    let mut samples = Vec::new();

    for (&ped, traj) in &scene.trajectories {
        let len = traj.len();
        if len < f_obs + p_pred {
            continue;
        }
        // Co-present neighbor positions per step of this pedestrian.
        let neighbor_positions: Vec<Vec<Vec2>> = (0..len)
            .map(|step| {
                let frame = scene.frame_of_step(ped, step);
                scene
                    .trajectories
                    .iter()
                    .filter(|(id, _)| **id != ped)
                    .filter_map(|(id, t)| {
                        scene.step_of_frame(*id, frame).map(|s| t.at(s).pos)
                    })
                    .collect()
            })
            .collect();

        let mut e = f_obs - 1;
        while e + p_pred < len {
            let t0 = e + 1 - f_obs;
            let history = traj.slice_time(t0, e).expect("window in range");
            let neighbor_slices = scene.aligned_neighbor_slices(ped, t0, e);
            let sid = SourceId::new(scene.name.clone(), ped, scene.frame_of_step(ped, e));
            let (observed, transform) = canonicalize(
                &history,
                &neighbor_slices,
                &scene.obstacles,
                &window,
                f_obs,
                sid,
            )?;
            let gt_scene = traj.slice_time(e + 1, e + p_pred).expect("future in range");
            let future = gt_scene
                .map_positions(|p| transform.apply(p))
                .reindexed(f_obs);
            let pobs = PersonalityObservation {
                history: traj.slice_time(0, e).expect("history prefix"),
                neighbor_positions: neighbor_positions[..=e].to_vec(),
            };
            samples.push(EvalSample {
                structure: DatabaseStructure { observed, future },
                obs_scene: history,
                gt_scene,
                pobs,
            });
            e += cfg.stride;
        }
    }
    Ok(samples)
}

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub method: Method,
    pub scene: String,
    pub horizon_s: f64,
    pub metrics: Metrics,
    pub success_rate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IndexStatsRow {
    pub scene: String,
    pub horizon_s: f64,
    pub db_size: usize,
    pub mean_visited: f64,
    pub visited_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct AverageRow {
    pub method: Method,
    pub horizon_s: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Default)]
pub struct BenchmarkReport {
    /// One row per method x scene x horizon, in run order.
    pub rows: Vec<ReportRow>,
    /// Mean of the per-scene values, per method x horizon.
    pub averages: Vec<AverageRow>,
    pub index_stats: Vec<IndexStatsRow>,
    pub skipped_scenes: Vec<String>,
}

impl BenchmarkReport {
    pub fn average_ade(&self, method: Method, horizon_s: f64) -> Option<f64> {
        self.averages
            .iter()
            .find(|a| a.method == method && a.horizon_s == horizon_s)
            .map(|a| a.metrics.ade)
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub methods: Vec<Method>,
    /// Horizons in seconds; steps are derived by rounding against dt.
    pub horizons: Vec<f64>,
    /// Keep the evaluated scene's own records in the retrieval database
    /// (self-retrieval diagnostics only).
    pub leakage: bool,
    pub success_threshold: Option<f64>,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            methods: vec![
                Method::Full,
                Method::NoPersonality,
                Method::Linear,
                Method::Sim1,
                Method::SimK,
            ],
            horizons: vec![3.2, 4.8],
            leakage: false,
            success_threshold: None,
        }
    }
}

/// Run every requested method over every scene and horizon.
///
/// For each evaluated scene the retrieval database is built from the other
/// scenes' records (leave-one-scene-out) unless leakage is requested.
/// Scenes producing no samples or facing an empty database are skipped and
/// reported as such. Deterministic for a fixed seed.
pub fn run_benchmark(
    scenes: &[Scene],
    cfg: &Config,
    opts: &BenchmarkOptions,
) -> Result<BenchmarkReport> {
    let mut report = BenchmarkReport::default();
    if scenes.is_empty() {
        return Ok(report);
    }

    for &horizon_s in &opts.horizons {
        let steps = (horizon_s / cfg.dt).round() as usize;
        if steps < 1 {
            return Err(Error::Config(format!("horizon {horizon_s}s is below one step")));
        }
        let mut cfg_h = cfg.clone();
        cfg_h.p_pred = steps;

        // Per-scene record extraction, reused across leave-one-out splits.
        let per_scene: Vec<Vec<DatabaseStructure>> = scenes
            .iter()
            .map(|s| extract_structures(s, &cfg_h))
            .collect::<Result<_>>()?;

        for (si, scene) in scenes.iter().enumerate() {
            let samples = collect_samples(scene, &cfg_h)?;
            if samples.is_empty() {
                report.skipped_scenes.push(format!("{} ({horizon_s}s): no samples", scene.name));
                continue;
            }
            let mut structures: Vec<DatabaseStructure> = Vec::new();
            for (sj, batch) in per_scene.iter().enumerate() {
                if sj != si || opts.leakage {
                    structures.extend(batch.iter().cloned());
                }
            }
            if structures.is_empty() {
                report
                    .skipped_scenes
                    .push(format!("{} ({horizon_s}s): empty retrieval database", scene.name));
                continue;
            }
            let db = CrowdDatabase { structures, params: cfg_h.clone() };
            let m_rep = cfg_h.m_rep.min(db.structures.len());
            let reps = select_representatives(&db, m_rep, cfg_h.seed)?;
            let index = build_index(&db, &reps, cfg_h.seed)?;

            let mut visited_sum = 0usize;
            let mut visited_queries = 0usize;

            for &method in &opts.methods {
                let mut ade_sum = 0.0;
                let mut fde_sum = 0.0;
                let mut successes = 0usize;
                let mut n = 0usize;
                for sample in &samples {
                    let q = &sample.structure.observed;
                    let pred = match method {
                        Method::Full => {
                            let r = predict(q, &index, &db, Some(&sample.pobs), &cfg_h)?;
                            visited_sum += r.stats.visited;
                            visited_queries += 1;
                            r.trajectory
                        }
                        Method::NoPersonality => {
                            predict(q, &index, &db, None, &cfg_h)?.trajectory
                        }
                        Method::Linear => linear_baseline(&sample.obs_scene, cfg_h.p_pred)?,
                        Method::Sim1 => sim_k_baseline(q, &index, &db, 1, &cfg_h)?,
                        Method::SimK => sim_k_baseline(q, &index, &db, cfg_h.k, &cfg_h)?,
                    };
                    let a = ade(&pred, &sample.gt_scene)?;
                    let f = fde(&pred, &sample.gt_scene)?;
                    ade_sum += a;
                    fde_sum += f;
                    if let Some(threshold) = opts.success_threshold {
                        if a < threshold {
                            successes += 1;
                        }
                    }
                    n += 1;
                }
                report.rows.push(ReportRow {
                    method,
                    scene: scene.name.clone(),
                    horizon_s,
                    metrics: Metrics {
                        ade: ade_sum / n as f64,
                        fde: fde_sum / n as f64,
                        n,
                    },
                    success_rate: opts
                        .success_threshold
                        .map(|_| successes as f64 / n as f64),
                });
            }

            if visited_queries > 0 {
                let mean_visited = visited_sum as f64 / visited_queries as f64;
                report.index_stats.push(IndexStatsRow {
                    scene: scene.name.clone(),
                    horizon_s,
                    db_size: db.structures.len(),
                    mean_visited,
                    visited_fraction: mean_visited / db.structures.len() as f64,
                });
            }
        }

        // Averages over the scenes that produced rows.
        for &method in &opts.methods {
            let rows: Vec<&ReportRow> = report
                .rows
                .iter()
                .filter(|r| r.method == method && r.horizon_s == horizon_s)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let k = rows.len() as f64;
            report.averages.push(AverageRow {
                method,
                horizon_s,
                metrics: Metrics {
                    ade: rows.iter().map(|r| r.metrics.ade).sum::<f64>() / k,
                    fde: rows.iter().map(|r| r.metrics.fde).sum::<f64>() / k,
                    n: rows.iter().map(|r| r.metrics.n).sum(),
                },
            });
        }
    }
    Ok(report)
}
