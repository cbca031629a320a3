//! Similarity search over stored motion records: the pairwise influence
//! function, the central-history metric, the composite similarity score,
//! representative selection, and the pruned top-k retrieval index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::featuremap::{occupied_cells, GridGeom};
use crate::geom::{Trajectory, Vec2};
use crate::ingest::{CrowdDatabase, StoredIndex};
use crate::structure::{DatabaseStructure, QueryStructure, SourceId};

/// Whether another pedestrian is ahead of or behind the influenced agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelativePosition {
    Front,
    Behind,
}

/// Influence of a pedestrian at distance `d` on an agent moving at speed
/// `v`, in `(0, 1]`. Influence decays faster behind the agent than ahead.
pub fn influence(v: f64, d: f64, rel: RelativePosition) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::Domain(format!("influence needs a positive speed, got {v}")));
    }
    if d < 0.0 {
        return Err(Error::Domain(format!("influence needs a non-negative distance, got {d}")));
    }
    let shared = (-0.5 * d * d / (2.0 / v)).exp();
    let directional = match rel {
        RelativePosition::Front => (-0.5 * d * d / v).exp(),
        RelativePosition::Behind => (-0.5 * d * d / (1.0 / (2.0 * v))).exp(),
    };
    Ok(shared * directional)
}

/// Classify `n_pos` as in front of or behind an agent at `m_pos` with the
/// given heading. Points exactly lateral count as front.
pub fn front_or_behind(heading: Vec2, m_pos: Vec2, n_pos: Vec2) -> RelativePosition {
    if heading.dot(n_pos - m_pos) >= 0.0 {
        RelativePosition::Front
    } else {
        RelativePosition::Behind
    }
}

/// Per-step speed and heading of a central history, with the conventions
/// used everywhere influence is evaluated: the first step inherits the
/// first displacement, a zero displacement falls back to the last non-zero
/// heading, and an agent that never moved has no heading (callers classify
/// everything as front).
#[derive(Debug, Clone)]
pub struct CentralKinematics {
    speeds: Vec<f64>,
    headings: Vec<Option<Vec2>>,
}

impl CentralKinematics {
    pub fn from_history(history: &Trajectory) -> Self {
        let pts = history.points();
        let dt = history.dt();
        let n = pts.len();
        let mut speeds = vec![0.0; n];
        let mut headings: Vec<Option<Vec2>> = vec![None; n];
        let mut last_heading: Option<Vec2> = None;
        for t in 0..n {
            let disp = if t == 0 {
                if n > 1 {
                    pts[1].pos - pts[0].pos
                } else {
                    Vec2::ZERO
                }
            } else {
                pts[t].pos - pts[t - 1].pos
            };
            let norm = disp.norm();
            speeds[t] = norm / dt;
            if norm > 1e-12 {
                last_heading = Some(disp * (1.0 / norm));
            }
            headings[t] = last_heading;
        }
        CentralKinematics { speeds, headings }
    }

    /// Speed at step `t`, clamped away from zero.
    pub fn speed(&self, t: usize, v_min: f64) -> f64 {
        self.speeds[t].max(v_min)
    }

    /// Relative position of `n_pos` at step `t`; front when the agent has
    /// never had a usable heading.
    pub fn classify(&self, t: usize, m_pos: Vec2, n_pos: Vec2) -> RelativePosition {
        match self.headings[t] {
            Some(h) => front_or_behind(h, m_pos, n_pos),
            None => RelativePosition::Front,
        }
    }

    /// Influence of a pedestrian at `n_pos` on the agent at step `t`.
    pub fn influence_at(&self, t: usize, m_pos: Vec2, n_pos: Vec2, v_min: f64) -> f64 {
        let v = self.speed(t, v_min);
        let d = m_pos.distance(n_pos);
        let rel = self.classify(t, m_pos, n_pos);
        influence(v, d, rel).expect("clamped speed is positive")
    }
}

/// Average pointwise distance between two central histories: a true metric,
/// used as the index key so range pruning stays sound.
pub fn central_distance(a: &QueryStructure, b: &QueryStructure) -> Result<f64> {
    central_history_distance(&a.central_history, &b.central_history)
}

pub fn central_history_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "central histories differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let sum: f64 = a
        .points()
        .iter()
        .zip(b.points())
        .map(|(p, q)| p.pos.distance(q.pos))
        .sum();
    Ok(sum / a.len() as f64)
}

fn gaussian_kernel(d2: f64, sigma: f64) -> f64 {
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Mean Gaussian kernel over the common timesteps of two fragments; zero
/// when they never overlap in time.
fn fragment_kernel(a: &Trajectory, b: &Trajectory, sigma: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut bi = 0usize;
    let bpts = b.points();
    for p in a.points() {
        while bi < bpts.len() && bpts[bi].t < p.t {
            bi += 1;
        }
        if bi < bpts.len() && bpts[bi].t == p.t {
            let d = p.pos.distance(bpts[bi].pos);
            sum += gaussian_kernel(d * d, sigma);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn jaccard(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let mut inter = 0usize;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Composite similarity score in `[0, 10]` between a query and a stored
/// record: a weighted blend of a central-history kernel, an
/// influence-weighted neighbor matching, and obstacle-footprint overlap.
pub fn similarity(q: &QueryStructure, a: &DatabaseStructure, cfg: &Config) -> Result<f64> {
    let geom = GridGeom::from_config(cfg);
    let q_cells = occupied_cells(&q.obstacles, &geom);
    let a_cells = occupied_cells(&a.observed.obstacles, &geom);
    similarity_with_cells(q, a, &q_cells, &a_cells, cfg)
}

fn similarity_with_cells(
    q: &QueryStructure,
    a: &DatabaseStructure,
    q_cells: &[u32],
    a_cells: &[u32],
    cfg: &Config,
) -> Result<f64> {
    let qa = &a.observed;
    if q.central_history.len() != qa.central_history.len() {
        return Err(Error::Shape(format!(
            "structures differ in observation length: {} vs {}",
            q.central_history.len(),
            qa.central_history.len()
        )));
    }
    let sigma = cfg.sigma;

    // Central-history kernel.
    let f_obs = q.central_history.len() as f64;
    let mut k_c = 0.0;
    for (p, r) in q.central_history.points().iter().zip(qa.central_history.points()) {
        let d = p.pos.distance(r.pos);
        k_c += gaussian_kernel(d * d, sigma);
    }
    k_c /= f_obs;

    // Neighbor matching, weighted by each query neighbor's influence at its
    // last observed step.
    let k_n = if q.neighbors.is_empty() && qa.neighbors.is_empty() {
        1.0
    } else if q.neighbors.is_empty() || qa.neighbors.is_empty() {
        0.0
    } else {
        let kin = CentralKinematics::from_history(&q.central_history);
        let mut weighted: Vec<(usize, f64)> = q
            .neighbors
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let last = n.last();
                let m_pos = q.central_history.at(last.t.min(q.central_history.len() - 1)).pos;
                let w = kin.influence_at(
                    last.t.min(q.central_history.len() - 1),
                    m_pos,
                    last.pos,
                    cfg.v_min,
                );
                (i, w)
            })
            .collect();
        // Greedy matching: heaviest query neighbors pick first.
        weighted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let mut taken = vec![false; qa.neighbors.len()];
        let mut num = 0.0;
        let mut den = 0.0;
        for (qi, w) in &weighted {
            den += w;
            let mut best: Option<(usize, f64)> = None;
            for (ai, cand) in qa.neighbors.iter().enumerate() {
                if taken[ai] {
                    continue;
                }
                let k = fragment_kernel(&q.neighbors[*qi], cand, sigma);
                if best.map_or(true, |(_, bk)| k > bk) {
                    best = Some((ai, k));
                }
            }
            if let Some((ai, k)) = best {
                taken[ai] = true;
                num += w * k;
            }
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };

    let k_o = jaccard(q_cells, a_cells);

    Ok(10.0 * (cfg.sim_wc * k_c + cfg.sim_wn * k_n + cfg.sim_wo * k_o))
}

/// Deterministic ordering of retrieval results: similarity descending, then
/// source id ascending.
fn candidate_order(a: &(f64, &SourceId, usize), b: &(f64, &SourceId, usize)) -> std::cmp::Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then_with(|| a.1.cmp(b.1))
}

/// One retrieval result.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Index into the database's structure list.
    pub index: usize,
    pub similarity: f64,
    /// 1-based rank.
    pub rank: usize,
}

/// Work accounting for one retrieval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryStats {
    /// Structures whose key fell inside some search range (plus the
    /// representatives themselves, which are always examined).
    pub visited: usize,
    /// Full similarity evaluations performed.
    pub exact_evaluations: usize,
}

struct RepTree {
    rep: usize,
    /// (key, member index), sorted by key then member index.
    members: Vec<(f64, usize)>,
}

/// Retrieval index: representative records anchor ordered member lists
/// keyed by the central-history metric; range pruning over those keys is
/// sound by the triangle inequality.
pub struct MatchIndex {
    trees: Vec<RepTree>,
    /// Obstacle-footprint cells per structure, cached for fast similarity.
    cells: Vec<Vec<u32>>,
    seed: u64,
}

impl MatchIndex {
    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn representative_count(&self) -> usize {
        self.trees.len()
    }

    pub fn representatives(&self) -> Vec<usize> {
        self.trees.iter().map(|t| t.rep).collect()
    }

    pub fn tree_sizes(&self) -> Vec<usize> {
        self.trees.iter().map(|t| t.members.len()).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total records covered (representatives plus members).
    pub fn covered(&self) -> usize {
        self.trees.len() + self.trees.iter().map(|t| t.members.len()).sum::<usize>()
    }

    pub fn to_stored(&self) -> StoredIndex {
        StoredIndex {
            seed: self.seed,
            representatives: self.trees.iter().map(|t| t.rep).collect(),
            trees: self.trees.iter().map(|t| t.members.clone()).collect(),
        }
    }

    pub fn from_stored(stored: &StoredIndex, db: &CrowdDatabase) -> Result<MatchIndex> {
        let n = db.structures.len();
        for &r in &stored.representatives {
            if r >= n {
                return Err(Error::Format(format!("index references structure {r} of {n}")));
            }
        }
        if stored.trees.len() != stored.representatives.len() {
            return Err(Error::Format("index tree count mismatch".into()));
        }
        for tree in &stored.trees {
            if tree.iter().any(|&(_, m)| m >= n) {
                return Err(Error::Format("index member out of range".into()));
            }
            if tree.windows(2).any(|w| w[0].0 > w[1].0) {
                return Err(Error::Format("index tree keys not sorted".into()));
            }
        }
        Ok(MatchIndex {
            trees: stored
                .representatives
                .iter()
                .zip(&stored.trees)
                .map(|(&rep, members)| RepTree { rep, members: members.clone() })
                .collect(),
            cells: cache_cells(db),
            seed: stored.seed,
        })
    }
}

fn cache_cells(db: &CrowdDatabase) -> Vec<Vec<u32>> {
    let geom = GridGeom::from_config(&db.params);
    db.structures
        .iter()
        .map(|s| occupied_cells(&s.observed.obstacles, &geom))
        .collect()
}

/// Pick `m_rep` mutually dissimilar records: the seed point maximizes mean
/// distance to a fixed random sample, then greedy farthest-point selection
/// under the central-history metric. Deterministic for a fixed seed.
pub fn select_representatives(db: &CrowdDatabase, m_rep: usize, seed: u64) -> Result<Vec<usize>> {
    let n = db.structures.len();
    if m_rep < 1 {
        return Err(Error::Config("representative count must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::Config("cannot pick representatives from an empty database".into()));
    }
    let m_rep = m_rep.min(n);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample: Vec<usize> = if n <= 100 {
        (0..n).collect()
    } else {
        let mut s = rand::seq::index::sample(&mut rng, n, 100).into_vec();
        s.sort_unstable();
        s
    };

    let dist = |i: usize, j: usize| -> f64 {
        central_distance(&db.structures[i].observed, &db.structures[j].observed)
            .expect("database structures share f_obs")
    };

    // Seed pick: maximal mean distance to the sampled points.
    let mut first = 0usize;
    let mut best_mean = f64::NEG_INFINITY;
    for i in 0..n {
        let mut sum = 0.0;
        let mut count = 0usize;
        for &j in &sample {
            if j != i {
                sum += dist(i, j);
                count += 1;
            }
        }
        let mean = if count == 0 { 0.0 } else { sum / count as f64 };
        if mean > best_mean {
            best_mean = mean;
            first = i;
        }
    }

    let mut chosen = vec![first];
    let mut chosen_mask = vec![false; n];
    chosen_mask[first] = true;
    let mut min_dist: Vec<f64> = (0..n).map(|i| dist(i, first)).collect();

    while chosen.len() < m_rep {
        let mut next = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            if !chosen_mask[i] && min_dist[i] > best {
                best = min_dist[i];
                next = i;
            }
        }
        if next == usize::MAX {
            // All remaining are duplicates of chosen points; take smallest index.
            next = (0..n).find(|&i| !chosen_mask[i]).expect("m_rep <= n");
        }
        chosen_mask[next] = true;
        chosen.push(next);
        for i in 0..n {
            if !chosen_mask[i] {
                let d = dist(i, next);
                if d < min_dist[i] {
                    min_dist[i] = d;
                }
            }
        }
    }
    Ok(chosen)
}

/// Assign every non-representative record to its nearest representative
/// (ties to the lower representative position) and key it by that distance,
/// scaled onto the score-like key scale the search range is calibrated for.
pub fn build_index(db: &CrowdDatabase, representatives: &[usize], seed: u64) -> Result<MatchIndex> {
    let n = db.structures.len();
    let key_scale = db.params.key_scale;
    for &r in representatives {
        if r >= n {
            return Err(Error::Config(format!("representative {r} out of range (N={n})")));
        }
    }
    let mut trees: Vec<RepTree> = representatives
        .iter()
        .map(|&rep| RepTree { rep, members: Vec::new() })
        .collect();
    let rep_set: std::collections::BTreeSet<usize> = representatives.iter().copied().collect();

    for i in 0..n {
        if rep_set.contains(&i) {
            continue;
        }
        let mut best_tree = 0usize;
        let mut best_d = f64::INFINITY;
        for (ti, tree) in trees.iter().enumerate() {
            let d = central_distance(&db.structures[i].observed, &db.structures[tree.rep].observed)?;
            if d < best_d {
                best_d = d;
                best_tree = ti;
            }
        }
        trees[best_tree].members.push((key_scale * best_d, i));
    }
    for tree in &mut trees {
        tree.members
            .sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    }
    Ok(MatchIndex { trees, cells: cache_cells(db), seed })
}

/// Retrieve the top-k most similar records.
///
/// For every representative, records whose key falls within `delta` of the
/// query's scaled distance to that representative are scored exactly;
/// everything else is pruned. By the triangle inequality, any record whose
/// scaled central-history distance to the query is at most `delta` is
/// guaranteed to be scored.
pub fn query_top_k(
    index: &MatchIndex,
    db: &CrowdDatabase,
    q: &QueryStructure,
    k: usize,
    delta: f64,
    cfg: &Config,
) -> Result<(Vec<Candidate>, QueryStats)> {
    if k < 1 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::Config("delta must be positive".into()));
    }
    let mut stats = QueryStats::default();
    if index.is_empty() || db.structures.is_empty() {
        return Ok((Vec::new(), stats));
    }

    let geom = GridGeom::from_config(cfg);
    let q_cells = occupied_cells(&q.obstacles, &geom);

    let mut scored: Vec<(f64, &SourceId, usize)> = Vec::new();
    for tree in &index.trees {
        let eta = cfg.key_scale * central_distance(q, &db.structures[tree.rep].observed)?;
        let lo = if delta.is_finite() { eta - delta } else { f64::NEG_INFINITY };
        let hi = if delta.is_finite() { eta + delta } else { f64::INFINITY };

        let start = tree.members.partition_point(|&(key, _)| key < lo);
        let end = tree.members.partition_point(|&(key, _)| key <= hi);

        stats.visited += 1 + (end - start); // representative + in-range members
        let mut evaluate = |idx: usize| -> Result<()> {
            let s = &db.structures[idx];
            let res = similarity_with_cells(q, s, &q_cells, &index.cells[idx], cfg)?;
            stats.exact_evaluations += 1;
            scored.push((res, &s.observed.source_id, idx));
            Ok(())
        };
        evaluate(tree.rep)?;
        for &(_, member) in &tree.members[start..end] {
            evaluate(member)?;
        }
    }

    scored.sort_by(candidate_order);
    let top: Vec<Candidate> = scored
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &(sim, _, idx))| Candidate { index: idx, similarity: sim, rank: i + 1 })
        .collect();
    Ok((top, stats))
}

/// Exhaustive top-k by similarity with the same deterministic ordering;
/// the reference the index is measured against.
pub fn linear_scan_top_k(
    db: &CrowdDatabase,
    q: &QueryStructure,
    k: usize,
    cfg: &Config,
) -> Result<Vec<Candidate>> {
    let geom = GridGeom::from_config(cfg);
    let q_cells = occupied_cells(&q.obstacles, &geom);
    let mut scored: Vec<(f64, &SourceId, usize)> = Vec::with_capacity(db.structures.len());
    for (idx, s) in db.structures.iter().enumerate() {
        let a_cells = occupied_cells(&s.observed.obstacles, &geom);
        let res = similarity_with_cells(q, s, &q_cells, &a_cells, cfg)?;
        scored.push((res, &s.observed.source_id, idx));
    }
    scored.sort_by(candidate_order);
    Ok(scored
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &(sim, _, idx))| Candidate { index: idx, similarity: sim, rank: i + 1 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::TrackPoint;
    use crate::structure::canonicalize;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn straight_structure(speed: f64, curve: f64, id: u64) -> DatabaseStructure {
        let dt = 0.4;
        let pts: Vec<TrackPoint> = (0..16)
            .map(|i| {
                let x = speed * dt * i as f64;
                TrackPoint::new(i, x, curve * x * x * 0.05)
            })
            .collect();
        let traj = Trajectory::new(pts, dt).unwrap();
        let cfg = Config::default();
        let hist = traj.slice_time(0, 7).unwrap();
        let (observed, tf) = canonicalize(
            &hist,
            &[],
            &[],
            &cfg.window(),
            8,
            SourceId::new("synthetic", id, 7),
        )
        .unwrap();
        let future = traj
            .slice_time(8, 15)
            .unwrap()
            .map_positions(|p| tf.apply(p))
            .reindexed(8);
        DatabaseStructure { observed, future }
    }

    fn small_db(n: usize) -> CrowdDatabase {
        let structures = (0..n)
            .map(|i| {
                let speed = 0.6 + 0.1 * (i % 13) as f64;
                let curve = -0.6 + 0.15 * (i % 9) as f64;
                straight_structure(speed, curve, i as u64)
            })
            .collect();
        CrowdDatabase { structures, params: Config::default() }
    }

    #[test]
    fn influence_is_one_at_zero_distance() {
        for v in [0.1, 1.0, 2.5] {
            assert_eq!(influence(v, 0.0, RelativePosition::Front).unwrap(), 1.0);
            assert_eq!(influence(v, 0.0, RelativePosition::Behind).unwrap(), 1.0);
        }
    }

    #[test]
    fn influence_matches_direct_evaluation() {
        // Direct evaluation at v = 1, d = 1.
        let front = influence(1.0, 1.0, RelativePosition::Front).unwrap();
        assert_relative_eq!(front, (-0.75f64).exp(), epsilon = 1e-12);
        let behind = influence(1.0, 1.0, RelativePosition::Behind).unwrap();
        assert_relative_eq!(behind, (-1.25f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn influence_rejects_nonpositive_speed() {
        assert!(matches!(
            influence(0.0, 1.0, RelativePosition::Front),
            Err(Error::Domain(_))
        ));
        assert!(influence(-1.0, 1.0, RelativePosition::Front).is_err());
    }

    #[test]
    fn influence_decreases_with_distance() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let v = rng.random_range(0.05..3.0);
            let d = rng.random_range(0.0..5.0);
            let rel = if rng.random_bool(0.5) {
                RelativePosition::Front
            } else {
                RelativePosition::Behind
            };
            let near = influence(v, d, rel).unwrap();
            let far = influence(v, d + 0.1, rel).unwrap();
            assert!(far < near, "influence not decreasing at v={v} d={d}");
            assert!(near > 0.0 && near <= 1.0);
        }
    }

    #[test]
    fn front_behind_classification() {
        let heading = Vec2::new(1.0, 0.0);
        let m = Vec2::ZERO;
        assert_eq!(
            front_or_behind(heading, m, Vec2::new(1.0, 0.0)),
            RelativePosition::Front
        );
        assert_eq!(
            front_or_behind(heading, m, Vec2::new(-1.0, 0.1)),
            RelativePosition::Behind
        );
        // Exactly lateral counts as front.
        assert_eq!(
            front_or_behind(heading, m, Vec2::new(0.0, 2.0)),
            RelativePosition::Front
        );
    }

    #[test]
    fn central_distance_identity_and_shift() {
        let a = straight_structure(1.0, 0.0, 1);
        assert_eq!(central_distance(&a.observed, &a.observed).unwrap(), 0.0);

        let shifted = a
            .observed
            .central_history
            .map_positions(|p| p + Vec2::new(1.0, 0.0));
        assert_relative_eq!(
            central_history_distance(&a.observed.central_history, &shifted).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn central_distance_is_a_metric_on_random_triples() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let random_hist = |rng: &mut ChaCha8Rng| {
            let pts = (0..8)
                .map(|i| TrackPoint::new(i, rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
                .collect();
            Trajectory::new(pts, 0.4).unwrap()
        };
        for _ in 0..1000 {
            let (a, b, c) = (random_hist(&mut rng), random_hist(&mut rng), random_hist(&mut rng));
            let dab = central_history_distance(&a, &b).unwrap();
            let dba = central_history_distance(&b, &a).unwrap();
            assert_eq!(dab, dba);
            let dac = central_history_distance(&a, &c).unwrap();
            let dcb = central_history_distance(&c, &b).unwrap();
            assert!(dab <= dac + dcb + 1e-9, "triangle inequality violated");
        }
    }

    #[test]
    fn similarity_of_identical_structures_is_ten() {
        let a = straight_structure(1.2, 0.3, 1);
        let res = similarity(&a.observed, &a, &Config::default()).unwrap();
        assert_relative_eq!(res, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn similarity_with_unmatched_neighbor_drops_neighbor_share() {
        let cfg = Config::default();
        let base = straight_structure(1.0, 0.0, 1);
        let mut q = base.observed.clone();
        let nb_points = (0..8)
            .map(|i| TrackPoint::new(i, 1.0 + 0.4 * i as f64, 2.4))
            .collect();
        q.neighbors = vec![Trajectory::new(nb_points, 0.4).unwrap()];
        // Identical central, query has one neighbor, record has none:
        // only the central and obstacle shares remain.
        let res = similarity(&q, &base, &cfg).unwrap();
        assert_relative_eq!(res, 6.5, epsilon = 1e-12);
    }

    #[test]
    fn representatives_cover_small_databases() {
        let db = small_db(2);
        let reps = select_representatives(&db, 2, 5).unwrap();
        assert_eq!(reps.len(), 2);
        let mut sorted = reps.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1]);
    }

    #[test]
    fn farthest_pair_wins_for_three_collinear_paths() {
        // Three straight central histories whose pairwise mean distances are
        // 1, 2, and 3 (lateral offsets 0, 1, 3).
        let mk = |offset: f64, id: u64| {
            let pts = (0..8)
                .map(|i| TrackPoint::new(i, 0.4 * i as f64, offset))
                .collect();
            let hist = Trajectory::new(pts, 0.4).unwrap();
            let cfg = Config::default();
            let (observed, tf) = canonicalize(
                &hist,
                &[],
                &[],
                &cfg.window(),
                8,
                SourceId::new("tri", id, 7),
            )
            .unwrap();
            // Offset the canonical history laterally to set the distances.
            let observed = QueryStructure {
                central_history: observed
                    .central_history
                    .map_positions(|p| p + Vec2::new(0.0, offset)),
                ..observed
            };
            let future = hist.map_positions(|p| tf.apply(p)).reindexed(8);
            DatabaseStructure { observed, future }
        };
        let db = CrowdDatabase {
            structures: vec![mk(0.0, 0), mk(1.0, 1), mk(3.0, 2)],
            params: Config::default(),
        };
        // Exhaustive max-min check: the pair at distance 3 is {0, 2}.
        for seed in 0..5 {
            let mut reps = select_representatives(&db, 2, seed).unwrap();
            reps.sort_unstable();
            assert_eq!(reps, vec![0, 2]);
        }
    }

    #[test]
    fn index_assigns_each_member_once_with_sorted_keys() {
        let db = small_db(20);
        let reps = select_representatives(&db, 4, 7).unwrap();
        let index = build_index(&db, &reps, 7).unwrap();
        assert_eq!(index.covered(), 20);
        for tree in &index.trees {
            // In-order traversal yields sorted keys (sort oracle).
            let keys: Vec<f64> = tree.members.iter().map(|m| m.0).collect();
            let mut sorted = keys.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(keys, sorted);
        }
        // Every member belongs to its nearest representative.
        let scale = db.params.key_scale;
        for tree in &index.trees {
            for &(key, member) in &tree.members {
                for other in &index.trees {
                    let d = central_distance(
                        &db.structures[member].observed,
                        &db.structures[other.rep].observed,
                    )
                    .unwrap();
                    assert!(
                        scale * d >= key - 1e-9,
                        "member {member} closer to another representative"
                    );
                }
            }
        }
    }

    #[test]
    fn tie_between_representatives_goes_to_lower_position() {
        // Representative 0 and 1 identical; member equidistant.
        let a = straight_structure(1.0, 0.0, 0);
        let b = straight_structure(1.0, 0.0, 1);
        let c = straight_structure(1.3, 0.0, 2);
        let db = CrowdDatabase {
            structures: vec![a, b, c],
            params: Config::default(),
        };
        let index = build_index(&db, &[0, 1], 0).unwrap();
        assert_eq!(index.trees[0].members.len(), 1);
        assert!(index.trees[1].members.is_empty());
    }

    #[test]
    fn exact_match_is_retrieved_with_full_score() {
        let db = small_db(30);
        let reps = select_representatives(&db, 5, 2).unwrap();
        let index = build_index(&db, &reps, 2).unwrap();
        let cfg = Config::default();
        let q = db.structures[17].observed.clone();
        let (cands, stats) = query_top_k(&index, &db, &q, 1, cfg.delta, &cfg).unwrap();
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].index, 17);
        assert_relative_eq!(cands[0].similarity, 10.0, epsilon = 1e-12);
        assert!(stats.exact_evaluations <= stats.visited);
        assert!(stats.visited <= db.structures.len());
    }

    #[test]
    fn infinite_delta_equals_linear_scan() {
        let db = small_db(60);
        let reps = select_representatives(&db, 6, 9).unwrap();
        let index = build_index(&db, &reps, 9).unwrap();
        let cfg = Config::default();
        for probe in [0usize, 13, 31, 59] {
            let q = db.structures[probe].observed.clone();
            let (cands, _) = query_top_k(&index, &db, &q, 5, f64::INFINITY, &cfg).unwrap();
            let oracle = linear_scan_top_k(&db, &q, 5, &cfg).unwrap();
            assert_eq!(cands, oracle);
        }
    }

    #[test]
    fn pruning_never_drops_structures_within_delta() {
        use rand::SeedableRng;
        let db = small_db(80);
        let reps = select_representatives(&db, 6, 4).unwrap();
        let index = build_index(&db, &reps, 4).unwrap();
        let cfg = Config::default();
        let delta = cfg.delta;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let probe = rng.random_range(0..db.structures.len());
            let mut q = db.structures[probe].observed.clone();
            let jx = rng.random_range(-0.3..0.3);
            let jy = rng.random_range(-0.3..0.3);
            q.central_history = q.central_history.map_positions(|p| p + Vec2::new(jx, jy));

            // Brute-force: every structure whose scaled distance to the
            // query is within delta must fall in some search range.
            let scale = db.params.key_scale;
            for tree in &index.trees {
                let eta =
                    scale * central_distance(&q, &db.structures[tree.rep].observed).unwrap();
                for &(key, member) in &tree.members {
                    let d = scale * central_distance(&q, &db.structures[member].observed).unwrap();
                    if d <= delta {
                        assert!(
                            key >= eta - delta && key <= eta + delta,
                            "structure {member} at scaled distance {d} pruned"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn query_visits_fewer_than_all_structures() {
        let db = small_db(120);
        let reps = select_representatives(&db, 10, 5).unwrap();
        let index = build_index(&db, &reps, 5).unwrap();
        let cfg = Config::default();
        let q = db.structures[60].observed.clone();
        let (_, stats) = query_top_k(&index, &db, &q, 3, 0.3, &cfg).unwrap();
        assert!(stats.visited < db.structures.len());
    }

    #[test]
    fn stored_index_roundtrip() {
        let db = small_db(25);
        let reps = select_representatives(&db, 4, 3).unwrap();
        let index = build_index(&db, &reps, 3).unwrap();
        let stored = index.to_stored();
        let back = MatchIndex::from_stored(&stored, &db).unwrap();
        assert_eq!(back.to_stored(), stored);
    }
}
