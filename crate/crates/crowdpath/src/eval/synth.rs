//! Deterministic synthetic crowd scenes for benchmarks, demos, and tests.
//!
//! Walkers follow waypoint routes across a square arena: straight crossings
//! and corner routes that turn in a central band, with per-agent speeds and
//! small per-step noise. The shared route families give retrieval something
//! to transfer across scenes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geom::{ObstaclePolygon, TrackPoint, Trajectory, Vec2};
use crate::ingest::Scene;

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub name: String,
    pub seed: u64,
    pub n_peds: usize,
    pub dt: f64,
    /// Square arena side, meters.
    pub arena: f64,
    pub speed_mean: f64,
    pub speed_sd: f64,
    /// Fraction of pedestrians following corner (turning) routes.
    pub turn_fraction: f64,
    /// Per-step, per-axis position noise, meters.
    pub noise_sd: f64,
    /// Steps between consecutive spawn times.
    pub spawn_interval: usize,
    pub with_obstacles: bool,
    /// Entry/exit/corner points per edge; 0 draws them continuously.
    /// Positive values snap routes to that many lanes (with jitter), giving
    /// scenes the dominant walking lanes real recordings show.
    pub lanes: usize,
    /// Walking-speed modes; 0 draws speeds continuously.
    pub speed_classes: usize,
    /// Lane snap jitter on the route-parameter scale.
    pub lane_jitter: f64,
}

/// Named presets loosely sized after common benchmark recordings.
pub fn preset(name: &str, seed: u64) -> Option<SynthOptions> {
    let base = SynthOptions {
        name: name.to_string(),
        seed,
        n_peds: 50,
        dt: 0.4,
        arena: 16.0,
        speed_mean: 1.3,
        speed_sd: 0.25,
        turn_fraction: 0.7,
        noise_sd: 0.008,
        spawn_interval: 4,
        with_obstacles: true,
        lanes: 3,
        speed_classes: 3,
        lane_jitter: 0.02,
    };
    let opts = match name {
        "eth" => SynthOptions { n_peds: 150, speed_mean: 1.35, ..base },
        "hotel" => SynthOptions {
            n_peds: 150,
            arena: 14.0,
            speed_mean: 1.25,
            ..base
        },
        "univ" => SynthOptions {
            n_peds: 450,
            arena: 18.0,
            speed_mean: 1.25,
            turn_fraction: 0.4,
            spawn_interval: 3,
            lane_jitter: 0.01,
            ..base
        },
        "zara01" => SynthOptions {
            n_peds: 430,
            arena: 17.0,
            speed_mean: 1.3,
            turn_fraction: 0.4,
            spawn_interval: 3,
            lane_jitter: 0.01,
            ..base
        },
        "zara02" => SynthOptions {
            n_peds: 430,
            arena: 17.0,
            speed_mean: 1.2,
            turn_fraction: 0.45,
            spawn_interval: 3,
            lane_jitter: 0.01,
            ..base
        },
        _ => return None,
    };
    Some(opts)
}

pub fn preset_names() -> &'static [&'static str] {
    &["eth", "hotel", "univ", "zara01", "zara02"]
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller.
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// A point on the given arena edge (0 = south, 1 = east, 2 = north,
/// 3 = west) at parameter `t` in [0, 1].
fn edge_point(edge: usize, t: f64, arena: f64) -> Vec2 {
    match edge % 4 {
        0 => Vec2::new(arena * t, 0.0),
        1 => Vec2::new(arena, arena * t),
        2 => Vec2::new(arena * t, arena),
        _ => Vec2::new(0.0, arena * t),
    }
}

/// A route parameter in [lo, hi], either continuous or snapped to one of
/// `lanes` evenly spaced values with a small jitter.
fn lane_param(rng: &mut ChaCha8Rng, lanes: usize, jitter: f64, lo: f64, hi: f64) -> f64 {
    if lanes == 0 {
        rng.random_range(lo..hi)
    } else {
        let slot = rng.random_range(0..lanes) as f64 + 0.5;
        let center = lo + (hi - lo) * slot / lanes as f64;
        (center + jitter * gaussian(rng)).clamp(lo, hi)
    }
}

fn route(rng: &mut ChaCha8Rng, opts: &SynthOptions, turning: bool) -> Vec<Vec2> {
    let arena = opts.arena;
    let lanes = opts.lanes;
    let jitter = opts.lane_jitter;
    let entry = rng.random_range(0..4usize);
    let start = edge_point(entry, lane_param(rng, lanes, jitter, 0.15, 0.85), arena);
    if turning {
        // Corner route: head into the central band, then exit through a
        // perpendicular edge.
        let corner = Vec2::new(
            arena * lane_param(rng, lanes, jitter, 0.35, 0.65),
            arena * lane_param(rng, lanes, jitter, 0.35, 0.65),
        );
        let exit = if rng.random_bool(0.5) { (entry + 1) % 4 } else { (entry + 3) % 4 };
        let goal = edge_point(exit, lane_param(rng, lanes, jitter, 0.15, 0.85), arena);
        vec![start, corner, goal]
    } else {
        let goal = edge_point((entry + 2) % 4, lane_param(rng, lanes, jitter, 0.15, 0.85), arena);
        vec![start, goal]
    }
}

fn default_obstacles(arena: f64) -> Vec<ObstaclePolygon> {
    // Two boxes off the central routes.
    let make_box = |cx: f64, cy: f64, half: f64| {
        ObstaclePolygon::new(vec![
            Vec2::new(cx - half, cy - half),
            Vec2::new(cx + half, cy - half),
            Vec2::new(cx + half, cy + half),
            Vec2::new(cx - half, cy + half),
        ])
        .expect("axis-aligned box is a valid polygon")
    };
    vec![
        make_box(arena * 0.12, arena * 0.82, 0.8),
        make_box(arena * 0.85, arena * 0.14, 0.7),
    ]
}

/// Generate a scene. Deterministic for fixed options.
pub fn generate_scene(opts: &SynthOptions) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut per_ped = Vec::with_capacity(opts.n_peds);

    for ped in 0..opts.n_peds {
        let speed = if opts.speed_classes == 0 {
            (opts.speed_mean + opts.speed_sd * gaussian(&mut rng)).clamp(0.55, 2.2)
        } else {
            // Modal walking speeds around the mean, with light jitter.
            let class = rng.random_range(0..opts.speed_classes) as f64
                - (opts.speed_classes as f64 - 1.0) / 2.0;
            (opts.speed_mean + class * opts.speed_sd + 0.03 * gaussian(&mut rng))
                .clamp(0.55, 2.2)
        };
        let step_cap = (2.8 * opts.arena / (speed * opts.dt)) as usize;
        let turning = rng.random_bool(opts.turn_fraction);
        let waypoints = route(&mut rng, opts, turning);

        let start_step = ped * opts.spawn_interval;
        let mut pos = waypoints[0];
        let mut wp = 1usize;
        // Heading is rate-limited so corners become smooth arcs whose onset
        // shows up in observation windows.
        let max_turn = 0.45; // radians per step
        let advance = speed * opts.dt;
        // Arrival must trigger outside the turning circle or walkers would
        // orbit a waypoint forever.
        let arrival = (2.0 * advance).max(1.1 * advance / max_turn);
        let mut heading = {
            let d = waypoints[1] - pos;
            d.y.atan2(d.x)
        };
        let mut points = vec![TrackPoint { t: 0, pos }];
        for step in 1..step_cap {
            let target = waypoints[wp];
            let to_target = target - pos;
            let dist = to_target.norm();
            if dist <= arrival {
                if wp + 1 < waypoints.len() {
                    wp += 1;
                } else {
                    break;
                }
            }
            let desired = to_target.y.atan2(to_target.x);
            let mut diff = desired - heading;
            while diff > std::f64::consts::PI {
                diff -= std::f64::consts::TAU;
            }
            while diff < -std::f64::consts::PI {
                diff += std::f64::consts::TAU;
            }
            heading += diff.clamp(-max_turn, max_turn);
            let noise = Vec2::new(
                opts.noise_sd * gaussian(&mut rng),
                opts.noise_sd * gaussian(&mut rng),
            );
            pos = pos + Vec2::new(heading.cos(), heading.sin()) * advance + noise;
            points.push(TrackPoint { t: step, pos });
        }
        let traj = Trajectory::new(points, opts.dt).expect("generated steps are contiguous");
        per_ped.push((ped as u64 + 1, (start_step as u64 + 1) * 10, traj));
    }

    let obstacles = if opts.with_obstacles {
        default_obstacles(opts.arena)
    } else {
        Vec::new()
    };
    Scene::assemble(opts.name.clone(), opts.dt, 10, per_ped, obstacles)
        .expect("generated pedestrian ids are unique")
}

/// Annotation-file text for a scene (`frame ped x y` per line, frame-sorted).
pub fn scene_annotation_text(scene: &Scene) -> String {
    let mut rows: Vec<(u64, u64, f64, f64)> = Vec::new();
    for (&ped, traj) in &scene.trajectories {
        for (step, p) in traj.points().iter().enumerate() {
            rows.push((scene.frame_of_step(ped, step), ped, p.pos.x, p.pos.y));
        }
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = String::new();
    for (frame, ped, x, y) in rows {
        out.push_str(&format!("{frame} {ped} {x} {y}\n"));
    }
    out
}

/// Obstacle-file text for a scene (one polygon per line).
pub fn obstacles_text(scene: &Scene) -> String {
    let mut out = String::new();
    for poly in &scene.obstacles {
        let coords: Vec<String> = poly
            .vertices()
            .iter()
            .flat_map(|v| [v.x.to_string(), v.y.to_string()])
            .collect();
        out.push_str(&coords.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_scene;

    #[test]
    fn generation_is_deterministic() {
        let opts = preset("hotel", 42).unwrap();
        let a = generate_scene(&opts);
        let b = generate_scene(&opts);
        assert_eq!(a.trajectories.len(), b.trajectories.len());
        for (ta, tb) in a.trajectories.values().zip(b.trajectories.values()) {
            assert_eq!(ta, tb);
        }
    }

    #[test]
    fn scenes_roundtrip_through_annotation_text() {
        let mut opts = preset("eth", 7).unwrap();
        opts.n_peds = 12;
        let scene = generate_scene(&opts);
        let text = scene_annotation_text(&scene);
        let parsed = parse_scene(text.as_bytes(), opts.dt, &opts.name).unwrap();
        assert_eq!(parsed.trajectories.len(), scene.trajectories.len());
        for (ped, traj) in &scene.trajectories {
            let other = &parsed.trajectories[ped];
            assert_eq!(traj.len(), other.len());
            for (a, b) in traj.points().iter().zip(other.points()) {
                // Text roundtrip is exact: Display prints shortest-roundtrip floats.
                assert_eq!(a.pos, b.pos);
            }
        }
    }

    #[test]
    fn walkers_are_long_enough_to_window() {
        let opts = preset("univ", 3).unwrap();
        let scene = generate_scene(&opts);
        let long_enough = scene
            .trajectories
            .values()
            .filter(|t| t.len() >= 16)
            .count();
        assert!(
            long_enough * 10 >= scene.trajectories.len() * 9,
            "only {long_enough} of {} walkers usable",
            scene.trajectories.len()
        );
    }
}
