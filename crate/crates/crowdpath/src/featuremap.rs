//! The passage-probability grid: geometry, the per-factor weight layers
//! (surrounding pedestrians, obstacles, candidate futures, destination,
//! movement traits), and their composition into one map.

use crate::config::{Config, NFactorReference};
use crate::error::{Error, Result};
use crate::geom::{point_in_polygon, ObstaclePolygon, Vec2};
use crate::matching::CentralKinematics;
use crate::personality::{linearity_of_point, PersonalityVector, STATIONARY};
use crate::structure::{DatabaseStructure, QueryStructure};

/// Grid placement over the window frame: origin at the window's rear-bottom
/// corner, cells of `cell_size` meters, covering the window by ceiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeom {
    pub origin: Vec2,
    pub cell_size: f64,
    pub cols: usize,
    pub rows: usize,
}

impl GridGeom {
    pub fn from_config(cfg: &Config) -> GridGeom {
        GridGeom::new(cfg.window_length, cfg.window_width, cfg.cell_size)
    }

    pub fn new(length: f64, width: f64, cell_size: f64) -> GridGeom {
        // The epsilon keeps exact multiples from gaining a spurious cell.
        let cols = ((length / cell_size) - 1e-9).ceil().max(1.0) as usize;
        let rows = ((width / cell_size) - 1e-9).ceil().max(1.0) as usize;
        GridGeom { origin: Vec2::ZERO, cell_size, cols, rows }
    }

    pub fn n_cells(&self) -> usize {
        self.cols * self.rows
    }

    /// Cell containing a point under half-open cell intervals, or None when
    /// the point falls outside the grid.
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let fx = (p.x - self.origin.x) / self.cell_size;
        let fy = (p.y - self.origin.y) / self.cell_size;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let i = fx.floor() as usize;
        let j = fy.floor() as usize;
        (i < self.cols && j < self.rows).then_some((i, j))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (i as f64 + 0.5) * self.cell_size,
            self.origin.y + (j as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn linear(&self, i: usize, j: usize) -> usize {
        j * self.cols + i
    }

    pub fn unlinear(&self, id: usize) -> (usize, usize) {
        (id % self.cols, id / self.cols)
    }
}

/// Linear ids of cells whose center lies inside any of the polygons,
/// ascending. Shared by the obstacle layer and obstacle-footprint overlap.
pub fn occupied_cells(obstacles: &[ObstaclePolygon], geom: &GridGeom) -> Vec<u32> {
    if obstacles.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for j in 0..geom.rows {
        for i in 0..geom.cols {
            let c = geom.cell_center(i, j);
            if obstacles.iter().any(|o| point_in_polygon(c, o)) {
                out.push(geom.linear(i, j) as u32);
            }
        }
    }
    out
}

/// Which influence factor a layer carries; composition order is fixed by
/// this enum so layer summation is permutation-independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LayerKind {
    Neighbors,
    Obstacles,
    Candidates,
    Destination,
    Personality,
}

/// Additive weight deltas for one influence factor. The obstacle layer
/// carries its blocked mask instead of finite deltas; the destination layer
/// remembers its target cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub kind: LayerKind,
    pub deltas: Vec<f64>,
    pub blocked: Vec<bool>,
    pub dest_cell: Option<(usize, usize)>,
}

impl Layer {
    fn zero(kind: LayerKind, geom: &GridGeom) -> Layer {
        Layer {
            kind,
            deltas: vec![0.0; geom.n_cells()],
            blocked: Vec::new(),
            dest_cell: None,
        }
    }
}

/// The composed grid of passage weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub geom: GridGeom,
    weights: Vec<f64>,
    blocked: Vec<bool>,
    dest_cell: Option<(usize, usize)>,
}

impl FeatureMap {
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[self.geom.linear(i, j)]
    }

    pub fn is_blocked(&self, i: usize, j: usize) -> bool {
        self.blocked[self.geom.linear(i, j)]
    }

    pub fn blocked_mask(&self) -> &[bool] {
        &self.blocked
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dest_cell(&self) -> Option<(usize, usize)> {
        self.dest_cell
    }

    /// Row-major CSV dump (row 0 first); blocked cells print as `X`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for j in 0..self.geom.rows {
            for i in 0..self.geom.cols {
                if i > 0 {
                    out.push(',');
                }
                if self.is_blocked(i, j) {
                    out.push('X');
                } else {
                    out.push_str(&format!("{}", self.weight(i, j)));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Fresh map with every cell at the initial weight.
pub fn init_map(cfg: &Config) -> FeatureMap {
    let geom = GridGeom::from_config(cfg);
    FeatureMap {
        geom,
        weights: vec![cfg.w_initial; geom.n_cells()],
        blocked: vec![false; geom.n_cells()],
        dest_cell: None,
    }
}

/// Weight reductions from surrounding pedestrians: each neighbor point
/// subtracts its (recency-decayed, tripled) influence from the cell it
/// occupies. Earlier observation steps decay by a factor of ten per step.
pub fn layer_neighbors(q: &QueryStructure, geom: &GridGeom, cfg: &Config) -> Layer {
    let mut layer = Layer::zero(LayerKind::Neighbors, geom);
    if q.neighbors.is_empty() {
        return layer;
    }
    let f_obs = q.central_history.len();
    let kin = CentralKinematics::from_history(&q.central_history);
    for n in &q.neighbors {
        for p in n.points() {
            let t = p.t.min(f_obs - 1);
            let Some((i, j)) = geom.cell_of(p.pos) else {
                continue;
            };
            let m_pos = q.central_history.at(t).pos;
            let imp = kin.influence_at(t, m_pos, p.pos, cfg.v_min);
            let decay = 0.1f64.powi((f_obs - 1 - t) as i32);
            layer.deltas[geom.linear(i, j)] -= decay * 3.0 * imp;
        }
    }
    layer
}

/// Impassable cells: every cell whose center lies inside an obstacle.
pub fn layer_obstacles(q: &QueryStructure, geom: &GridGeom) -> Layer {
    let mut layer = Layer::zero(LayerKind::Obstacles, geom);
    layer.blocked = vec![false; geom.n_cells()];
    for id in occupied_cells(&q.obstacles, geom) {
        layer.blocked[id as usize] = true;
    }
    layer
}

/// Per-step bonuses along the retrieved candidate futures, by rank.
pub fn layer_candidates(
    candidates: &[&DatabaseStructure],
    geom: &GridGeom,
    cfg: &Config,
) -> Layer {
    let mut layer = Layer::zero(LayerKind::Candidates, geom);
    let bonuses = [cfg.alpha, cfg.beta, cfg.gamma];
    for (rank, cand) in candidates.iter().take(3).enumerate() {
        let steps = cand.future.len().min(cfg.p_pred);
        for p in &cand.future.points()[..steps] {
            if let Some((i, j)) = geom.cell_of(p.pos) {
                layer.deltas[geom.linear(i, j)] += bonuses[rank];
            }
        }
    }
    layer
}

/// Predicted destination, snapped to a usable cell center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Destination {
    /// Snapped position: the center of an in-window, non-blocked cell.
    pub point: Vec2,
    /// Pre-snap blend position.
    pub raw: Vec2,
    /// True when the blend fell outside the grid or in a blocked cell.
    pub clamped: bool,
}

/// Blend the candidate futures' endpoints with the reflection of the
/// observed start about the current position, working in displacements
/// relative to the current position. Ranks beyond those present contribute
/// nothing; the weights are applied literally, without renormalization.
pub fn predict_destination(
    q: &QueryStructure,
    candidates: &[&DatabaseStructure],
    blocked: &[bool],
    geom: &GridGeom,
    cfg: &Config,
) -> Result<Destination> {
    let p_now = q.current_pos();
    let weights = [cfg.ws1, cfg.ws2, cfg.ws3];
    let mut disp = Vec2::ZERO;
    for (rank, cand) in candidates.iter().take(3).enumerate() {
        let steps = cand.future.len().min(cfg.p_pred);
        let endpoint = cand.future.at(steps - 1).pos;
        disp = disp + (endpoint - p_now) * weights[rank];
    }
    let dcs = p_now - q.central_history.first().pos;
    disp = disp + dcs * cfg.wcs;
    let raw = p_now + disp;

    let own_cell = geom.cell_of(raw).filter(|&(i, j)| !blocked[geom.linear(i, j)]);
    let (cell, clamped) = match own_cell {
        Some(c) => (c, false),
        None => {
            let mut best: Option<((usize, usize), f64)> = None;
            for j in 0..geom.rows {
                for i in 0..geom.cols {
                    if blocked[geom.linear(i, j)] {
                        continue;
                    }
                    let d = geom.cell_center(i, j).distance(raw);
                    if best.map_or(true, |(_, bd)| d < bd) {
                        best = Some(((i, j), d));
                    }
                }
            }
            let Some((c, _)) = best else {
                return Err(Error::NoPath("every cell is blocked".into()));
            };
            (c, true)
        }
    };
    Ok(Destination {
        point: geom.cell_center(cell.0, cell.1),
        raw,
        clamped,
    })
}

/// A single large bonus on the destination cell; the planner additionally
/// targets this cell directly.
pub fn layer_destination(dest: &Destination, geom: &GridGeom, cfg: &Config) -> Layer {
    let mut layer = Layer::zero(LayerKind::Destination, geom);
    let (i, j) = geom
        .cell_of(dest.point)
        .expect("destination is snapped to an in-window cell center");
    layer.deltas[geom.linear(i, j)] += cfg.epsilon;
    layer.dest_cell = Some((i, j));
    layer
}

/// Trait-driven adjustments: a bonus inside the agent's usual chord
/// deviation band, a bonus inside the disk reachable at the agent's usual
/// speed, and a penalty inside the clearance band the agent keeps from
/// others.
pub fn layer_personality(
    p: &PersonalityVector,
    dest: &Destination,
    q: &QueryStructure,
    geom: &GridGeom,
    cfg: &Config,
) -> Layer {
    let mut layer = Layer::zero(LayerKind::Personality, geom);
    let origin = q.current_pos();
    let radius = p.v * cfg.pred_seconds();
    let near_refs: Vec<Vec2> = match cfg.n_factor_reference {
        NFactorReference::Surrounding => q.neighbors.iter().map(|n| n.last().pos).collect(),
        NFactorReference::SelfCentered => vec![origin],
    };
    for j in 0..geom.rows {
        for i in 0..geom.cols {
            let c = geom.cell_center(i, j);
            let lin = linearity_of_point(c, origin, dest.point);
            let l_term = if lin != STATIONARY && lin <= p.l { cfg.mu } else { 0.0 };
            let v_term = if c.distance(origin) <= radius { cfg.nu } else { 0.0 };
            let n_term = if near_refs.iter().any(|r| c.distance(*r) <= p.d) {
                cfg.eta_near
            } else {
                0.0
            };
            layer.deltas[geom.linear(i, j)] = l_term + v_term + n_term;
        }
    }
    layer
}

/// Sum the layers onto the initial map. Summation runs in a fixed order by
/// layer kind, so permuting the arguments cannot change the result; blocked
/// cells stay blocked regardless of deltas.
pub fn compose(init: &FeatureMap, layers: &[&Layer]) -> Result<FeatureMap> {
    let n = init.geom.n_cells();
    for layer in layers {
        if layer.deltas.len() != n {
            return Err(Error::Shape(format!(
                "layer {:?} has {} cells, map has {n}",
                layer.kind,
                layer.deltas.len()
            )));
        }
    }
    let mut ordered: Vec<&Layer> = layers.to_vec();
    ordered.sort_by_key(|l| l.kind);

    let mut weights = init.weights.clone();
    let mut blocked = init.blocked.clone();
    let mut dest_cell = init.dest_cell;
    for layer in ordered {
        for (w, d) in weights.iter_mut().zip(&layer.deltas) {
            *w += d;
        }
        if !layer.blocked.is_empty() {
            for (b, lb) in blocked.iter_mut().zip(&layer.blocked) {
                *b |= lb;
            }
        }
        if layer.dest_cell.is_some() {
            dest_cell = layer.dest_cell;
        }
    }
    Ok(FeatureMap { geom: init.geom, weights, blocked, dest_cell })
}
