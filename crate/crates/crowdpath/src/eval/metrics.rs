//! Displacement-error metrics.

use crate::error::{Error, Result};
use crate::geom::Trajectory;

/// Aggregated errors over a sample set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub ade: f64,
    pub fde: f64,
    pub n: usize,
}

fn check_lengths(pred: &Trajectory, gt: &Trajectory) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!(
            "trajectory lengths differ: {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    Ok(())
}

/// Mean pointwise distance between aligned trajectories.
pub fn ade(pred: &Trajectory, gt: &Trajectory) -> Result<f64> {
    check_lengths(pred, gt)?;
    let sum: f64 = pred
        .points()
        .iter()
        .zip(gt.points())
        .map(|(p, g)| p.pos.distance(g.pos))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Distance between the final points.
pub fn fde(pred: &Trajectory, gt: &Trajectory) -> Result<f64> {
    check_lengths(pred, gt)?;
    Ok(pred.last().pos.distance(gt.last().pos))
}
