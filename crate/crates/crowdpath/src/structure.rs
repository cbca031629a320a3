//! Local motion records: an agent's observed history together with the
//! surrounding trajectories and obstacles, expressed in the window frame,
//! plus (for stored examples) the agent's actual continuation.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geom::{clip_trajectory_to_window, FrameTransform, ObstaclePolygon, Trajectory, Vec2, Window};

/// Provenance of a record: scene name, pedestrian id, and the native frame
/// id of the last observed step.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceId {
    pub scene: String,
    pub ped: u64,
    pub end_frame: u64,
}

impl SourceId {
    pub fn new(scene: impl Into<String>, ped: u64, end_frame: u64) -> Self {
        SourceId { scene: scene.into(), ped, end_frame }
    }
}

/// Observed surroundings of one agent in the window frame.
///
/// `central_history` runs over local steps `0..f_obs`, ends at the window
/// anchor, and heads along `+x` on average. Neighbor fragments are clipped
/// to the window in both time and space; obstacles are clipped spatially.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryStructure {
    pub central_history: Trajectory,
    pub neighbors: Vec<Trajectory>,
    pub obstacles: Vec<ObstaclePolygon>,
    pub transform: FrameTransform,
    pub source_id: SourceId,
}

/// A stored example: observed surroundings plus the agent's actual future,
/// local steps `f_obs..f_obs + p_pred`, window frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DatabaseStructure {
    pub observed: QueryStructure,
    pub future: Trajectory,
}

impl QueryStructure {
    /// The agent's current (last observed) position, window frame.
    pub fn current_pos(&self) -> Vec2 {
        self.central_history.last().pos
    }

    pub fn f_obs(&self) -> usize {
        self.central_history.len()
    }
}

impl DatabaseStructure {
    pub fn p_pred(&self) -> usize {
        self.future.len()
    }

    /// Structural invariants relative to a config; used by tests and the
    /// database loader.
    pub fn validate(&self, cfg: &Config) -> Result<()> {
        let window = cfg.window();
        let q = &self.observed;
        if q.central_history.len() != cfg.f_obs {
            return Err(Error::Shape(format!(
                "central history has {} steps, expected {}",
                q.central_history.len(),
                cfg.f_obs
            )));
        }
        if self.future.len() != cfg.p_pred {
            return Err(Error::Shape(format!(
                "future has {} steps, expected {}",
                self.future.len(),
                cfg.p_pred
            )));
        }
        let anchor = window.anchor();
        if q.current_pos().distance(anchor) > 1e-6 {
            return Err(Error::Data("central history does not end at the anchor".into()));
        }
        // The future continues the history: first future point within one
        // step's travel of the anchor (generous bound: 3 m/s sprint).
        let step_bound = 3.0 * q.central_history.dt();
        if self.future.first().pos.distance(anchor) > step_bound {
            return Err(Error::Data("future does not continue from the anchor".into()));
        }
        if self.future.first().t != q.central_history.last().t + 1 {
            return Err(Error::Data("future steps do not continue history steps".into()));
        }
        for n in &q.neighbors {
            if !n.points().iter().any(|p| window.contains(p.pos)) {
                return Err(Error::Data("neighbor fragment outside the window".into()));
            }
        }
        Ok(())
    }
}

/// Build the window-frame record for one agent.
///
/// `history` must hold exactly `f_obs` steps in the scene frame. Neighbor
/// trajectories are restricted to the observation interval in time, then
/// transformed and clipped to the window; obstacles are transformed and
/// clipped. Timesteps are re-based so the history runs over `0..f_obs`.
///
/// The returned transform maps scene coordinates into the window frame; its
/// inverse recovers scene coordinates.
pub fn canonicalize(
    history: &Trajectory,
    neighbors: &[Trajectory],
    obstacles: &[ObstaclePolygon],
    window: &Window,
    f_obs: usize,
    source_id: SourceId,
) -> Result<(QueryStructure, FrameTransform)> {
    if history.len() < f_obs {
        return Err(Error::InsufficientHistory { needed: f_obs, got: history.len() });
    }
    if history.len() > f_obs {
        return Err(Error::Shape(format!(
            "history has {} steps, expected exactly {}",
            history.len(),
            f_obs
        )));
    }

    let last = history.last();
    let mean_step = history.mean_step();
    // Stationary agents keep the scene orientation.
    let rotation = if mean_step.norm() < 1e-12 {
        0.0
    } else {
        -mean_step.y.atan2(mean_step.x)
    };
    let transform = FrameTransform::about(last.pos, window.anchor(), rotation);

    let t_first = history.first().t;
    let t_last = last.t;

    let central = history.map_positions(|p| transform.apply(p)).reindexed(0);

    let mut local_neighbors = Vec::new();
    for n in neighbors {
        let Some(in_time) = n.slice_time(t_first, t_last) else {
            continue;
        };
        // slice_time may produce non-contiguous indices if the neighbor has
        // gaps relative to the interval; Trajectory forbids that, but the
        // slice of a contiguous trajectory is contiguous.
        let local = in_time
            .map_positions(|p| transform.apply(p))
            .reindexed(in_time.first().t - t_first);
        for frag in clip_trajectory_to_window(&local, window) {
            local_neighbors.push(frag);
        }
    }

    let local_obstacles: Vec<ObstaclePolygon> = obstacles
        .iter()
        .filter_map(|o| {
            let verts = o.vertices().iter().map(|&v| transform.apply(v)).collect();
            ObstaclePolygon::new(verts).ok()?.clip_to_window(window)
        })
        .collect();

    let q = QueryStructure {
        central_history: central,
        neighbors: local_neighbors,
        obstacles: local_obstacles,
        transform,
        source_id,
    };
    Ok((q, transform))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::TrackPoint;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn straight(dir: Vec2, n: usize, start: Vec2, t0: usize) -> Trajectory {
        let pts = (0..n)
            .map(|i| TrackPoint {
                t: t0 + i,
                pos: start + dir * i as f64,
            })
            .collect();
        Trajectory::new(pts, 0.4).unwrap()
    }

    fn window() -> Window {
        Window::new(7.0, 3.5).unwrap()
    }

    fn sid() -> SourceId {
        SourceId::new("test", 1, 0)
    }

    #[test]
    fn walking_along_x_keeps_left_neighbor_left() {
        let hist = straight(Vec2::new(0.4, 0.0), 8, Vec2::new(10.0, 5.0), 100);
        // Neighbor one meter to the agent's left (+y in scene == +y locally).
        let nb = straight(Vec2::new(0.4, 0.0), 8, Vec2::new(10.0, 6.0), 100);
        let (q, tf) = canonicalize(&hist, &[nb], &[], &window(), 8, sid()).unwrap();
        assert!(tf.rotation.abs() < 1e-12);
        assert_eq!(q.neighbors.len(), 1);
        let anchor = window().anchor();
        for p in q.neighbors[0].points() {
            assert!(p.pos.y > anchor.y);
        }
    }

    #[test]
    fn walking_along_y_rotates_minus_half_pi() {
        let hist = straight(Vec2::new(0.0, 0.4), 8, Vec2::new(3.0, 3.0), 0);
        let (_, tf) = canonicalize(&hist, &[], &[], &window(), 8, sid()).unwrap();
        assert!((tf.rotation + FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn stationary_agent_keeps_scene_orientation() {
        let pts = (0..8).map(|i| TrackPoint::new(i, 2.0, 2.0)).collect();
        let hist = Trajectory::new(pts, 0.4).unwrap();
        let (_, tf) = canonicalize(&hist, &[], &[], &window(), 8, sid()).unwrap();
        assert_eq!(tf.rotation, 0.0);
    }

    #[test]
    fn short_history_is_rejected() {
        let hist = straight(Vec2::new(0.4, 0.0), 5, Vec2::ZERO, 0);
        let err = canonicalize(&hist, &[], &[], &window(), 8, sid()).unwrap_err();
        assert!(matches!(err, Error::InsufficientHistory { .. }));
    }

    #[test]
    fn anchor_and_heading_normalized() {
        let hist = straight(Vec2::new(0.3, 0.1), 8, Vec2::new(-4.0, 2.0), 50);
        let (q, _) = canonicalize(&hist, &[], &[], &window(), 8, sid()).unwrap();
        let anchor = window().anchor();
        assert!(q.current_pos().distance(anchor) < 1e-9);
        let ms = q.central_history.mean_step();
        assert!(ms.y.abs() < 1e-9);
        assert!(ms.x > 0.0);
        assert_eq!(q.central_history.first().t, 0);
        assert_eq!(q.central_history.last().t, 7);
    }

    proptest! {
        #[test]
        fn canonicalize_roundtrips_scene_coordinates(
            sx in -20.0..20.0f64,
            sy in -20.0..20.0f64,
            dx in -0.6..0.6f64,
            dy in -0.6..0.6f64,
        ) {
            prop_assume!(dx.abs() + dy.abs() > 1e-6);
            let hist = straight(Vec2::new(dx, dy), 8, Vec2::new(sx, sy), 3);
            let (q, tf) = canonicalize(&hist, &[], &[], &window(), 8, sid()).unwrap();
            for (orig, local) in hist.points().iter().zip(q.central_history.points()) {
                let back = tf.apply_inverse(local.pos);
                prop_assert!(back.distance(orig.pos) < 1e-9);
            }
        }
    }
}
