//! Shortest-path extraction: turn the composed map into a traversal-cost
//! grid, run Dijkstra from the agent's cell to the destination cell, and
//! resample the cell path into a per-step trajectory in the scene frame.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::featuremap::{
    compose, init_map, layer_candidates, layer_destination, layer_neighbors, layer_obstacles,
    layer_personality, predict_destination, Destination, FeatureMap, GridGeom,
};
use crate::geom::{FrameTransform, TrackPoint, Trajectory, Vec2};
use crate::ingest::CrowdDatabase;
use crate::matching::{query_top_k, Candidate, MatchIndex, QueryStats};
use crate::personality::{extract_personality, PersonalityVector};
use crate::structure::QueryStructure;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Per-cell traversal costs over the map grid; entering a cell costs its
/// value times the step length factor (1 orthogonal, sqrt(2) diagonal).
#[derive(Debug, Clone)]
pub struct CostGrid {
    pub geom: GridGeom,
    costs: Vec<f64>,
    passable: Vec<bool>,
}

impl CostGrid {
    /// Build directly from raw costs; test and tooling entry point.
    pub fn from_costs(geom: GridGeom, costs: Vec<f64>, passable: Vec<bool>) -> Result<CostGrid> {
        if costs.len() != geom.n_cells() || passable.len() != geom.n_cells() {
            return Err(Error::Shape("cost grid size mismatch".into()));
        }
        if costs
            .iter()
            .zip(&passable)
            .any(|(c, &p)| p && !(c.is_finite() && *c > 0.0))
        {
            return Err(Error::Domain("passable cells need finite positive costs".into()));
        }
        Ok(CostGrid { geom, costs, passable })
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.costs[self.geom.linear(i, j)]
    }

    pub fn passable(&self, i: usize, j: usize) -> bool {
        self.passable[self.geom.linear(i, j)]
    }
}

/// Map weights to traversal costs: higher weight, cheaper passage.
///
/// Weights normalize to `[0, 1]` over the finite non-blocked cells,
/// excluding the destination cell — its bonus is an outlier by construction
/// and would flatten every other weight if it entered the normalization.
/// The destination itself takes the cheapest cost. A uniform map costs 1
/// everywhere.
pub fn cost_grid(map: &FeatureMap, kappa: f64) -> Result<CostGrid> {
    let geom = map.geom;
    let n = geom.n_cells();
    let dest_id = map.dest_cell().map(|(i, j)| geom.linear(i, j));
    let mut w_min = f64::INFINITY;
    let mut w_max = f64::NEG_INFINITY;
    let blocked = map.blocked_mask();
    for id in 0..n {
        if blocked[id] || Some(id) == dest_id {
            continue;
        }
        let w = map.weights()[id];
        w_min = w_min.min(w);
        w_max = w_max.max(w);
    }
    if !w_min.is_finite() && dest_id.is_none() {
        return Err(Error::NoPath("every cell is blocked".into()));
    }

    let mut costs = vec![f64::INFINITY; n];
    let mut passable = vec![false; n];
    for id in 0..n {
        if blocked[id] {
            continue;
        }
        let w = map.weights()[id];
        let normalized = if w_max > w_min {
            ((w - w_min) / (w_max - w_min)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        costs[id] = 1.0 + kappa * (1.0 - normalized);
        passable[id] = true;
    }
    Ok(CostGrid { geom, costs, passable })
}

/// All-cells Dijkstra result from one start cell.
struct PathField {
    dist: Vec<f64>,
    pred: Vec<usize>,
    start: usize,
}

const NO_PRED: usize = usize::MAX;

/// 8-connected neighborhood; diagonal steps are forbidden when both
/// adjacent orthogonal cells are blocked.
fn edges_from(grid: &CostGrid, i: usize, j: usize, mut visit: impl FnMut(usize, usize, f64)) {
    let geom = &grid.geom;
    for dj in -1i64..=1 {
        for di in -1i64..=1 {
            if di == 0 && dj == 0 {
                continue;
            }
            let ni = i as i64 + di;
            let nj = j as i64 + dj;
            if ni < 0 || nj < 0 || ni >= geom.cols as i64 || nj >= geom.rows as i64 {
                continue;
            }
            let (ni, nj) = (ni as usize, nj as usize);
            if !grid.passable(ni, nj) {
                continue;
            }
            let diagonal = di != 0 && dj != 0;
            if diagonal {
                let side_a = grid.passable(ni, j);
                let side_b = grid.passable(i, nj);
                if !side_a && !side_b {
                    continue;
                }
            }
            let factor = if diagonal { SQRT_2 } else { 1.0 };
            visit(ni, nj, factor * grid.cost(ni, nj));
        }
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (dist, node).
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(grid: &CostGrid, start: (usize, usize)) -> Result<PathField> {
    let geom = &grid.geom;
    if !grid.passable(start.0, start.1) {
        return Err(Error::NoPath("start cell is blocked".into()));
    }
    let n = geom.n_cells();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NO_PRED; n];
    let start_id = geom.linear(start.0, start.1);
    dist[start_id] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { dist: 0.0, node: start_id });

    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        let (i, j) = geom.unlinear(node);
        edges_from(grid, i, j, |ni, nj, edge_cost| {
            let target = geom.linear(ni, nj);
            let cand = d + edge_cost;
            if cand < dist[target] {
                dist[target] = cand;
                pred[target] = node;
                heap.push(HeapEntry { dist: cand, node: target });
            } else if cand == dist[target] && pred[target] != NO_PRED {
                // Equal-cost tie: prefer the lexicographically lower
                // (row, col) predecessor for a canonical path.
                let (pi, pj) = geom.unlinear(pred[target]);
                if (j, i) < (pj, pi) {
                    pred[target] = node;
                }
            }
        });
    }
    Ok(PathField { dist, pred, start: start_id })
}

fn extract_path(field: &PathField, geom: &GridGeom, dest: usize) -> Vec<(usize, usize)> {
    let mut cells = Vec::new();
    let mut cur = dest;
    loop {
        cells.push(geom.unlinear(cur));
        if cur == field.start {
            break;
        }
        cur = field.pred[cur];
    }
    cells.reverse();
    cells
}

/// Minimal-cost 8-connected path between two passable cells.
pub fn shortest_path(
    grid: &CostGrid,
    start: (usize, usize),
    dest: (usize, usize),
) -> Result<(Vec<(usize, usize)>, f64)> {
    if !grid.passable(dest.0, dest.1) {
        return Err(Error::NoPath("destination cell is blocked".into()));
    }
    let field = dijkstra(grid, start)?;
    let dest_id = grid.geom.linear(dest.0, dest.1);
    if !field.dist[dest_id].is_finite() {
        return Err(Error::NoPath("destination unreachable".into()));
    }
    Ok((extract_path(&field, &grid.geom, dest_id), field.dist[dest_id]))
}

/// Convert a cell path into a `p_pred`-step trajectory.
///
/// The polyline starts at the agent's exact position and continues through
/// the centers of the remaining path cells. Samples are taken along the
/// polyline at multiples of `step_len` (the agent's observed per-step
/// travel), clamping to the path end once the polyline is exhausted, then
/// mapped back to the scene frame.
pub fn resample_path(
    cells: &[(usize, usize)],
    geom: &GridGeom,
    p_pred: usize,
    step_len: f64,
    start_pos: Vec2,
    start_step: usize,
    transform: &FrameTransform,
) -> Result<Trajectory> {
    resample_path_dt(cells, geom, p_pred, step_len, start_pos, start_step, transform, 0.4)
}

#[allow(clippy::too_many_arguments)]
fn resample_path_dt(
    cells: &[(usize, usize)],
    geom: &GridGeom,
    p_pred: usize,
    step_len: f64,
    start_pos: Vec2,
    start_step: usize,
    transform: &FrameTransform,
    dt: f64,
) -> Result<Trajectory> {
    if cells.is_empty() {
        return Err(Error::NoPath("empty cell path".into()));
    }
    let mut polyline = vec![start_pos];
    polyline.extend(cells[1..].iter().map(|&(i, j)| geom.cell_center(i, j)));

    let mut cumulative = vec![0.0];
    for w in polyline.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + w[0].distance(w[1]));
    }
    let total = *cumulative.last().unwrap();

    let sample_at = |target: f64| -> Vec2 {
        if target >= total || polyline.len() == 1 {
            return *polyline.last().unwrap();
        }
        let seg = cumulative.partition_point(|&c| c <= target).min(polyline.len() - 1);
        let seg_start = cumulative[seg - 1];
        let seg_len = cumulative[seg] - seg_start;
        if seg_len <= 0.0 {
            return polyline[seg];
        }
        let frac = (target - seg_start) / seg_len;
        polyline[seg - 1] + (polyline[seg] - polyline[seg - 1]) * frac
    };

    let points = (1..=p_pred)
        .map(|k| {
            let local = sample_at(step_len * k as f64);
            TrackPoint {
                t: start_step + k - 1,
                pos: transform.apply_inverse(local),
            }
        })
        .collect();
    Trajectory::new(points, dt)
}

/// Long-term observations backing trait extraction: the agent's full past
/// in the scene frame plus, per step, the positions of co-present
/// pedestrians.
#[derive(Debug, Clone)]
pub struct PersonalityObservation {
    pub history: Trajectory,
    pub neighbor_positions: Vec<Vec<Vec2>>,
}

/// A finished prediction with its diagnostics.
#[derive(Debug, Clone)]
pub struct PredictionResult {
    /// Scene-frame prediction, exactly `p_pred` points continuing the
    /// observed history.
    pub trajectory: Trajectory,
    pub destination: Destination,
    pub candidates: Vec<Candidate>,
    pub personality: Option<PersonalityVector>,
    pub stats: QueryStats,
    pub path_cost: f64,
    /// True when the destination was unreachable and the path targeted the
    /// nearest reachable cell instead.
    pub retargeted: bool,
    /// The composed map, kept for inspection and dumps.
    pub map: FeatureMap,
}

/// Run the full pipeline for one query: retrieve candidates, extract
/// traits, build and compose the map layers, predict the destination, plan
/// the path, and resample it into the scene frame.
pub fn predict(
    q: &QueryStructure,
    index: &MatchIndex,
    db: &CrowdDatabase,
    personality_obs: Option<&PersonalityObservation>,
    cfg: &Config,
) -> Result<PredictionResult> {
    if index.is_empty() || db.structures.is_empty() {
        return Err(Error::Prediction("the retrieval index is empty".into()));
    }
    if q.central_history.len() != cfg.f_obs {
        return Err(Error::InsufficientHistory {
            needed: cfg.f_obs,
            got: q.central_history.len(),
        });
    }

    let (candidates, stats) = query_top_k(index, db, q, cfg.k, cfg.delta, cfg)?;
    let cand_refs: Vec<&crate::structure::DatabaseStructure> =
        candidates.iter().map(|c| &db.structures[c.index]).collect();

    let personality = match personality_obs {
        Some(obs) => Some(extract_personality(
            &obs.history,
            &obs.neighbor_positions,
            cfg.dt,
            cfg.f_obs,
        )?),
        None => None,
    };

    let base = init_map(cfg);
    let geom = base.geom;
    let obstacles_layer = layer_obstacles(q, &geom);
    let dest = predict_destination(q, &cand_refs, &obstacles_layer.blocked, &geom, cfg)?;

    let neighbors_layer = layer_neighbors(q, &geom, cfg);
    let candidates_layer = layer_candidates(&cand_refs, &geom, cfg);
    let destination_layer = layer_destination(&dest, &geom, cfg);
    let mut layers = vec![
        &neighbors_layer,
        &obstacles_layer,
        &candidates_layer,
        &destination_layer,
    ];
    let personality_layer = personality
        .as_ref()
        .map(|p| layer_personality(p, &dest, q, &geom, cfg));
    if let Some(pl) = personality_layer.as_ref() {
        layers.push(pl);
    }
    let map = compose(&base, &layers)?;

    let mut grid = cost_grid(&map, cfg.kappa)?;
    let start = geom
        .cell_of(q.current_pos())
        .ok_or_else(|| Error::Prediction("agent position outside the window".into()))?;
    if !grid.passable(start.0, start.1) {
        // The agent demonstrably occupies this cell (annotation and obstacle
        // polygons can disagree), so treat it as traversable at the worst
        // cost rather than refusing to predict.
        let id = geom.linear(start.0, start.1);
        grid.passable[id] = true;
        grid.costs[id] = 1.0 + cfg.kappa;
    }
    let dest_cell = map.dest_cell().expect("destination layer sets the cell");

    let field = dijkstra(&grid, start)?;
    let dest_id = geom.linear(dest_cell.0, dest_cell.1);
    let (target_id, retargeted) = if field.dist[dest_id].is_finite() {
        (dest_id, false)
    } else {
        // Unreachable destination: re-target the reachable cell nearest to
        // it (ties to the lower (row, col)).
        let dest_pt = dest.point;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..geom.rows {
            for i in 0..geom.cols {
                let id = geom.linear(i, j);
                if !field.dist[id].is_finite() {
                    continue;
                }
                let d = geom.cell_center(i, j).distance(dest_pt);
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((id, d));
                }
            }
        }
        let (id, _) = best.ok_or_else(|| Error::NoPath("no reachable cell".into()))?;
        (id, true)
    };
    let cells = extract_path(&field, &geom, target_id);
    let path_cost = field.dist[target_id];

    let f_obs = cfg.f_obs;
    let step_len = q.central_history.arc_length() / (f_obs - 1).max(1) as f64;
    let trajectory = resample_path_dt(
        &cells,
        &geom,
        cfg.p_pred,
        step_len,
        q.current_pos(),
        f_obs,
        &q.transform,
        cfg.dt,
    )?;

    Ok(PredictionResult {
        trajectory,
        destination: dest,
        candidates,
        personality,
        stats,
        path_cost,
        retargeted,
        map,
    })
}
