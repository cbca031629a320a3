//! Reference predictors: a least-squares linear extrapolator and
//! retrieval-only predictors that return (blends of) retrieved futures.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geom::{TrackPoint, Trajectory, Vec2};
use crate::ingest::CrowdDatabase;
use crate::matching::{query_top_k, MatchIndex};
use crate::structure::QueryStructure;

/// Least-squares linear fit of x(t) and y(t) over the observed steps,
/// extrapolated for `p_pred` further steps.
pub fn linear_baseline(history: &Trajectory, p_pred: usize) -> Result<Trajectory> {
    let pts = history.points();
    if pts.len() < 2 {
        return Err(Error::InsufficientHistory { needed: 2, got: pts.len() });
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.t as f64).sum::<f64>() / n;
    let mean_x = pts.iter().map(|p| p.pos.x).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.pos.y).sum::<f64>() / n;
    let var_t: f64 = pts.iter().map(|p| (p.t as f64 - mean_t).powi(2)).sum();
    let (slope_x, slope_y) = if var_t > 0.0 {
        let cov_x: f64 = pts
            .iter()
            .map(|p| (p.t as f64 - mean_t) * (p.pos.x - mean_x))
            .sum();
        let cov_y: f64 = pts
            .iter()
            .map(|p| (p.t as f64 - mean_t) * (p.pos.y - mean_y))
            .sum();
        (cov_x / var_t, cov_y / var_t)
    } else {
        (0.0, 0.0)
    };

    let last_t = pts[pts.len() - 1].t;
    let points = (1..=p_pred)
        .map(|k| {
            let t = last_t + k;
            let dt_rel = t as f64 - mean_t;
            TrackPoint {
                t,
                pos: Vec2::new(mean_x + slope_x * dt_rel, mean_y + slope_y * dt_rel),
            }
        })
        .collect();
    Trajectory::new(points, history.dt())
}

/// Rank-weighted average of the top-k retrieved futures, mapped back to the
/// scene frame. `k = 1` returns the best match's future unchanged. Weights
/// reuse the candidate rank bonuses, normalized over the ranks present;
/// ranks beyond the third carry no weight.
pub fn sim_k_baseline(
    q: &QueryStructure,
    index: &MatchIndex,
    db: &CrowdDatabase,
    k: usize,
    cfg: &Config,
) -> Result<Trajectory> {
    let (candidates, _) = query_top_k(index, db, q, k, cfg.delta, cfg)?;
    if candidates.is_empty() {
        return Err(Error::Prediction("retrieval returned no candidates".into()));
    }
    let rank_weights = [cfg.alpha, cfg.beta, cfg.gamma];
    let used = candidates.len().min(3);
    let total: f64 = rank_weights[..used].iter().sum();
    let p_pred = cfg.p_pred;

    let mut sums = vec![Vec2::ZERO; p_pred];
    for (rank, cand) in candidates.iter().take(used).enumerate() {
        let future = &db.structures[cand.index].future;
        let steps = future.len().min(p_pred);
        let w = rank_weights[rank] / total;
        for (s, slot) in sums.iter_mut().enumerate() {
            // Futures shorter than the horizon hold their final position.
            let p = future.at(s.min(steps - 1)).pos;
            *slot = *slot + p * w;
        }
    }

    let f_obs = q.central_history.len();
    let points = sums
        .into_iter()
        .enumerate()
        .map(|(s, pos)| TrackPoint {
            t: f_obs + s,
            pos: q.transform.apply_inverse(pos),
        })
        .collect();
    Trajectory::new(points, cfg.dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{build_index, select_representatives};
    use crate::structure::{canonicalize, DatabaseStructure, SourceId};
    use approx::assert_relative_eq;

    fn traj(points: &[(f64, f64)], t0: usize) -> Trajectory {
        let pts = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| TrackPoint::new(t0 + i, x, y))
            .collect();
        Trajectory::new(pts, 0.4).unwrap()
    }

    #[test]
    fn constant_velocity_extrapolates_exactly() {
        let h = traj(&[(0.0, 0.0), (0.5, 0.1), (1.0, 0.2), (1.5, 0.3)], 0);
        let pred = linear_baseline(&h, 3).unwrap();
        for (k, p) in pred.points().iter().enumerate() {
            assert_relative_eq!(p.pos.x, 1.5 + 0.5 * (k + 1) as f64, epsilon = 1e-9);
            assert_relative_eq!(p.pos.y, 0.3 + 0.1 * (k + 1) as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn stationary_history_stays_put() {
        let h = traj(&[(2.0, 3.0), (2.0, 3.0), (2.0, 3.0)], 0);
        let pred = linear_baseline(&h, 4).unwrap();
        for p in pred.points() {
            assert_relative_eq!(p.pos.x, 2.0, epsilon = 1e-9);
            assert_relative_eq!(p.pos.y, 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn regression_example_steps_one_to_four() {
        // Steps 1..4 at x = 0..3: the fit continues to (4, 0) at step 5.
        let h = traj(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)], 1);
        let pred = linear_baseline(&h, 1).unwrap();
        assert_eq!(pred.at(0).t, 5);
        assert_relative_eq!(pred.at(0).pos.x, 4.0, epsilon = 1e-9);
        assert_relative_eq!(pred.at(0).pos.y, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn single_point_history_is_rejected() {
        let h = traj(&[(0.0, 0.0)], 0);
        assert!(linear_baseline(&h, 3).is_err());
    }

    fn structure_with_future(
        speed: f64,
        id: u64,
        endpoint: Option<Vec2>,
    ) -> DatabaseStructure {
        let cfg = Config::default();
        let pts: Vec<TrackPoint> = (0..16)
            .map(|i| TrackPoint::new(i, speed * 0.4 * i as f64, 0.0))
            .collect();
        let t = Trajectory::new(pts, 0.4).unwrap();
        let hist = t.slice_time(0, 7).unwrap();
        let (observed, tf) = canonicalize(
            &hist,
            &[],
            &[],
            &cfg.window(),
            8,
            SourceId::new("bl", id, 7),
        )
        .unwrap();
        let mut future = t
            .slice_time(8, 15)
            .unwrap()
            .map_positions(|p| tf.apply(p))
            .reindexed(8);
        if let Some(end) = endpoint {
            // Replace the future with a straight run to a chosen endpoint.
            let start = observed.central_history.last().pos;
            let pts: Vec<TrackPoint> = (0..8)
                .map(|s| TrackPoint {
                    t: 8 + s,
                    pos: start + (end - start) * ((s + 1) as f64 / 8.0),
                })
                .collect();
            future = Trajectory::new(pts, 0.4).unwrap();
        }
        DatabaseStructure { observed, future }
    }

    #[test]
    fn sim_1_returns_exact_stored_future() {
        let cfg = Config::default();
        let structures: Vec<DatabaseStructure> = (0..12)
            .map(|i| structure_with_future(0.7 + 0.08 * i as f64, i as u64, None))
            .collect();
        let db = CrowdDatabase { structures, params: cfg.clone() };
        let reps = select_representatives(&db, 3, 1).unwrap();
        let index = build_index(&db, &reps, 1).unwrap();
        let probe = 5usize;
        let q = db.structures[probe].observed.clone();
        let pred = sim_k_baseline(&q, &index, &db, 1, &cfg).unwrap();
        for (p, f) in pred.points().iter().zip(db.structures[probe].future.points()) {
            let back = q.transform.apply(p.pos);
            assert_relative_eq!(back.distance(f.pos), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn identical_futures_are_a_fixed_point() {
        let cfg = Config::default();
        let anchor = cfg.window().anchor();
        let end = anchor + Vec2::new(2.0, 0.0);
        let structures: Vec<DatabaseStructure> = (0..3)
            .map(|i| structure_with_future(1.0, i as u64, Some(end)))
            .collect();
        let db = CrowdDatabase { structures, params: cfg.clone() };
        let index = build_index(&db, &[0], 1).unwrap();
        let q = db.structures[0].observed.clone();
        let pred = sim_k_baseline(&q, &index, &db, 3, &cfg).unwrap();
        let last_local = q.transform.apply(pred.last().pos);
        assert_relative_eq!(last_local.distance(end), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn rank_weights_blend_endpoints() {
        // Wide search range: this test pins the blend weights, not pruning.
        let mut cfg = Config::default();
        cfg.delta = 1e6;
        let anchor = cfg.window().anchor();
        // Endpoints (1,0), (0,1), (0,0) relative to the anchor; similarity
        // order is fixed by making histories increasingly distant from the
        // probe.
        let mut structures = Vec::new();
        for (i, rel) in [(0.0, 0.0), (0.35, 0.0), (0.7, 0.0)].iter().enumerate() {
            let mut s = structure_with_future(1.0 + rel.0, i as u64, None);
            let endpoint = match i {
                0 => anchor + Vec2::new(1.0, 0.0),
                1 => anchor + Vec2::new(0.0, 1.0),
                _ => anchor,
            };
            let start = s.observed.central_history.last().pos;
            let pts: Vec<TrackPoint> = (0..8)
                .map(|k| TrackPoint {
                    t: 8 + k,
                    pos: start + (endpoint - start) * ((k + 1) as f64 / 8.0),
                })
                .collect();
            s.future = Trajectory::new(pts, 0.4).unwrap();
            structures.push(s);
        }
        let db = CrowdDatabase { structures, params: cfg.clone() };
        let index = build_index(&db, &[0], 1).unwrap();
        let q = db.structures[0].observed.clone();
        let pred = sim_k_baseline(&q, &index, &db, 3, &cfg).unwrap();
        let last_local = q.transform.apply(pred.last().pos) - anchor;
        // Weights 30/55, 15/55, 10/55 over endpoints (1,0), (0,1), (0,0).
        assert_relative_eq!(last_local.x, 6.0 / 11.0, epsilon = 1e-9);
        assert_relative_eq!(last_local.y, 3.0 / 11.0, epsilon = 1e-9);
    }
}
