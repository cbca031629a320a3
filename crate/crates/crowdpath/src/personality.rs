//! Movement-trait extraction from an agent's long-term history: path
//! linearity, mean speed, and preferred clearance to other pedestrians.

use crate::error::{Error, Result};
use crate::geom::{Trajectory, Vec2};

/// Sentinel for a stationary segment (degenerate chord).
pub const STATIONARY: f64 = -1.0;

/// Per-agent movement traits.
///
/// `l` is the mean chord deviation of history segments in percent, `v` the
/// mean speed in m/s, `d` the mean minimum distance to other pedestrians in
/// meters (0 when the agent was never observed near anyone).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonalityVector {
    pub l: f64,
    pub v: f64,
    pub d: f64,
}

/// Deviation of a point from the chord `origin -> dest`, in percent of the
/// chord's x-extent.
///
/// Degenerate chords fall back to 0 when the chord moved in y only, and to
/// the `STATIONARY` sentinel when it did not move at all.
pub fn linearity_of_point(p: Vec2, origin: Vec2, dest: Vec2) -> f64 {
    let dx = (dest.x - origin.x).abs();
    if dx != 0.0 {
        let t = (p.x - origin.x) / (dest.x - origin.x);
        let chord_y = origin.y + t * (dest.y - origin.y);
        (p.y - chord_y).abs() / dx * 100.0
    } else if (dest.y - origin.y) * (dest.y - origin.y) > 0.0 {
        0.0
    } else {
        STATIONARY
    }
}

/// Maximal point deviation of a trajectory segment from its own chord; the
/// `STATIONARY` sentinel when the segment never moved.
pub fn linearity_of_segment(t: &Trajectory) -> Result<f64> {
    let pts = t.points();
    if pts.len() < 2 {
        return Err(Error::Shape("linearity needs at least 2 points".into()));
    }
    let origin = pts[0].pos;
    let dest = pts[pts.len() - 1].pos;
    if pts.iter().all(|p| p.pos == origin) {
        return Ok(STATIONARY);
    }
    let mut best = 0.0f64;
    for p in &pts[1..pts.len() - 1] {
        let lin = linearity_of_point(p.pos, origin, dest);
        if lin > best {
            best = lin;
        }
    }
    // A closed loop has a degenerate chord: every interior point reports the
    // sentinel, so the segment does too.
    if dest == origin && pts[1..pts.len() - 1]
        .iter()
        .all(|p| linearity_of_point(p.pos, origin, dest) == STATIONARY)
    {
        return Ok(STATIONARY);
    }
    Ok(best)
}

/// Extract the trait vector from a long-term history.
///
/// The history splits into consecutive segments of `f_obs` points (a
/// trailing remainder of at least two points forms a final segment); `l`
/// averages segment linearities excluding stationary sentinels. Speed is
/// total arc length over elapsed time. `neighbor_positions[i]` lists the
/// positions of other pedestrians co-present at history step `i`; `d`
/// averages the per-step minimum distance over steps with at least one
/// neighbor.
pub fn extract_personality(
    history: &Trajectory,
    neighbor_positions: &[Vec<Vec2>],
    dt: f64,
    f_obs: usize,
) -> Result<PersonalityVector> {
    let pts = history.points();
    if pts.len() < 2 {
        return Err(Error::InsufficientHistory { needed: 2, got: pts.len() });
    }
    if neighbor_positions.len() != pts.len() {
        return Err(Error::Shape(format!(
            "neighbor positions cover {} steps, history has {}",
            neighbor_positions.len(),
            pts.len()
        )));
    }
    if f_obs < 2 {
        return Err(Error::Config("segment length must be at least 2".into()));
    }

    // Linearity over consecutive segments.
    let mut lin_sum = 0.0;
    let mut lin_count = 0usize;
    let mut start = 0usize;
    while start < pts.len() {
        let end = (start + f_obs).min(pts.len());
        if end - start >= 2 {
            let seg = history.slice_time(pts[start].t, pts[end - 1].t).unwrap();
            let lin = linearity_of_segment(&seg)?;
            if lin != STATIONARY {
                lin_sum += lin;
                lin_count += 1;
            }
        }
        start = end;
    }
    let l = if lin_count > 0 { lin_sum / lin_count as f64 } else { 0.0 };

    let v = history.arc_length() / ((pts.len() - 1) as f64 * dt);

    let mut d_sum = 0.0;
    let mut d_count = 0usize;
    for (p, neigh) in pts.iter().zip(neighbor_positions) {
        if neigh.is_empty() {
            continue;
        }
        let min = neigh
            .iter()
            .map(|n| p.pos.distance(*n))
            .fold(f64::INFINITY, f64::min);
        d_sum += min;
        d_count += 1;
    }
    let d = if d_count > 0 { d_sum / d_count as f64 } else { 0.0 };

    Ok(PersonalityVector { l, v, d })
}
