//! Scene and obstacle file parsing, sliding-window extraction of stored
//! records, and the `CROWDDB v1` database container.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geom::{ObstaclePolygon, TrackPoint, Trajectory, Vec2};
use crate::structure::{canonicalize, DatabaseStructure, SourceId};
use crate::wire;

/// One annotated recording: trajectories per pedestrian plus static
/// obstacles, all in the scene frame.
#[derive(Debug, Clone)]
pub struct Scene {
    pub name: String,
    /// Pedestrian id -> trajectory; BTreeMap keeps iteration deterministic.
    pub trajectories: BTreeMap<u64, Trajectory>,
    pub obstacles: Vec<ObstaclePolygon>,
    pub dt: f64,
    /// Native frame-id gap between consecutive annotated steps.
    pub frame_stride: u64,
    /// Smallest frame id seen; step 0 of a pedestrian maps back to
    /// `first_frame(ped)` in native numbering.
    first_frames: BTreeMap<u64, u64>,
}

impl Scene {
    /// Build a scene from already-assembled trajectories. `per_ped` lists
    /// `(pedestrian id, first native frame, trajectory)`.
    pub fn assemble(
        name: impl Into<String>,
        dt: f64,
        frame_stride: u64,
        per_ped: Vec<(u64, u64, Trajectory)>,
        obstacles: Vec<ObstaclePolygon>,
    ) -> Result<Scene> {
        let mut trajectories = BTreeMap::new();
        let mut first_frames = BTreeMap::new();
        for (ped, first_frame, traj) in per_ped {
            if trajectories.insert(ped, traj).is_some() {
                return Err(Error::Data(format!("duplicate pedestrian id {ped}")));
            }
            first_frames.insert(ped, first_frame);
        }
        Ok(Scene {
            name: name.into(),
            trajectories,
            obstacles,
            dt,
            frame_stride: frame_stride.max(1),
            first_frames,
        })
    }

    /// Native frame id of a pedestrian's local step.
    pub fn frame_of_step(&self, ped: u64, step: usize) -> u64 {
        self.first_frames[&ped] + step as u64 * self.frame_stride
    }

    /// First native frame id of a pedestrian.
    pub fn first_frame(&self, ped: u64) -> Option<u64> {
        self.first_frames.get(&ped).copied()
    }

    /// Other pedestrians' fragments that temporally overlap the central
    /// pedestrian's local steps `[t0, e]`, expressed on the central
    /// pedestrian's step numbering. Pedestrians whose annotations never
    /// share a frame with the central one contribute nothing.
    pub fn aligned_neighbor_slices(&self, ped: u64, t0: usize, e: usize) -> Vec<Trajectory> {
        let stride = self.frame_stride as i64;
        let Some(first_a) = self.first_frame(ped) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (&id, traj) in &self.trajectories {
            if id == ped {
                continue;
            }
            let diff = self.first_frames[&id] as i64 - first_a as i64;
            if diff.rem_euclid(stride) != 0 {
                continue; // no shared annotation instants
            }
            let offset = diff / stride; // neighbor step s holds at central step s + offset
            let b_lo = (t0 as i64 - offset).max(0);
            let b_hi = (e as i64 - offset).min(traj.len() as i64 - 1);
            if b_lo > b_hi {
                continue;
            }
            let slice = traj
                .slice_time(b_lo as usize, b_hi as usize)
                .expect("non-empty aligned range");
            out.push(slice.reindexed((b_lo + offset) as usize));
        }
        out
    }

    /// Local step of a pedestrian's native frame id, if aligned and present.
    pub fn step_of_frame(&self, ped: u64, frame: u64) -> Option<usize> {
        let first = *self.first_frames.get(&ped)?;
        if frame < first || (frame - first) % self.frame_stride != 0 {
            return None;
        }
        let step = ((frame - first) / self.frame_stride) as usize;
        let traj = self.trajectories.get(&ped)?;
        (step < traj.len()).then_some(step)
    }
}

/// Parse a scene annotation stream: `frame ped x y` per line, `#` comments.
///
/// Frame gaps equal to the file's native stride (the smallest gap observed
/// between consecutive annotations of one pedestrian) collapse to one step;
/// larger gaps are data errors since trajectories must be contiguous.
pub fn parse_scene(reader: impl Read, dt: f64, name: &str) -> Result<Scene> {
    let mut text = String::new();
    let mut r = reader;
    r.read_to_string(&mut text)?;

    // (ped -> [(frame, pos)]) in file order.
    let mut raw: BTreeMap<u64, Vec<(u64, Vec2)>> = BTreeMap::new();
    for (lineno, rawline) in text.lines().enumerate() {
        let line = rawline.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("expected 4 fields 'frame ped x y', got {}", fields.len()),
            });
        }
        let frame: u64 = fields[0].parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            msg: format!("bad frame id '{}'", fields[0]),
        })?;
        let ped: u64 = fields[1].parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            msg: format!("bad pedestrian id '{}'", fields[1]),
        })?;
        let x: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            msg: format!("bad x coordinate '{}'", fields[2]),
        })?;
        let y: f64 = fields[3].parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            msg: format!("bad y coordinate '{}'", fields[3]),
        })?;
        raw.entry(ped).or_default().push((frame, Vec2::new(x, y)));
    }

    // Sort per pedestrian by frame, then detect the native stride.
    let mut stride = u64::MAX;
    for (ped, rows) in raw.iter_mut() {
        let in_order = rows.windows(2).all(|w| w[0].0 < w[1].0);
        if !in_order {
            let sorted = {
                let mut s = rows.clone();
                s.sort_by_key(|(f, _)| *f);
                s
            };
            if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Data(format!(
                    "duplicate frame annotation for pedestrian {ped}"
                )));
            }
            return Err(Error::Data(format!(
                "non-monotone frames for pedestrian {ped}"
            )));
        }
        if rows.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Data(format!(
                "duplicate frame annotation for pedestrian {ped}"
            )));
        }
        for w in rows.windows(2) {
            stride = stride.min(w[1].0 - w[0].0);
        }
    }
    if stride == u64::MAX {
        stride = 1; // no pedestrian with two points
    }

    let mut trajectories = BTreeMap::new();
    let mut first_frames = BTreeMap::new();
    for (ped, rows) in raw {
        let first = rows[0].0;
        for w in rows.windows(2) {
            let gap = w[1].0 - w[0].0;
            if gap != stride {
                return Err(Error::Data(format!(
                    "pedestrian {ped} has a frame gap of {gap} (native stride {stride}); \
                     trajectories must be contiguous"
                )));
            }
        }
        let pts: Vec<TrackPoint> = rows
            .iter()
            .enumerate()
            .map(|(i, (_, pos))| TrackPoint { t: i, pos: *pos })
            .collect();
        trajectories.insert(ped, Trajectory::new(pts, dt)?);
        first_frames.insert(ped, first);
    }

    Ok(Scene {
        name: name.to_string(),
        trajectories,
        obstacles: Vec::new(),
        dt,
        frame_stride: stride,
        first_frames,
    })
}

/// Parse an obstacle stream: one polygon per line as `x1 y1 x2 y2 ...`,
/// `#` comments allowed.
pub fn parse_obstacles(reader: impl Read) -> Result<Vec<ObstaclePolygon>> {
    let mut text = String::new();
    let mut r = reader;
    r.read_to_string(&mut text)?;

    let mut polygons = Vec::new();
    for (lineno, rawline) in text.lines().enumerate() {
        let line = rawline.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("bad coordinate '{s}'"),
                })
            })
            .collect::<Result<_>>()?;
        if nums.len() % 2 != 0 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("odd coordinate count {}", nums.len()),
            });
        }
        if nums.len() < 6 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("polygon needs at least 3 vertices, got {}", nums.len() / 2),
            });
        }
        let verts = nums.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect();
        let poly = ObstaclePolygon::new(verts).map_err(|e| Error::Parse {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        polygons.push(poly);
    }
    Ok(polygons)
}

/// The stored example collection plus the parameters it was extracted with.
#[derive(Debug, Clone)]
pub struct CrowdDatabase {
    pub structures: Vec<DatabaseStructure>,
    pub params: Config,
}

/// Slide windows over every pedestrian of a scene and build one stored
/// record per valid end step.
///
/// A window ending at local step `e` is valid when `f_obs` observed steps
/// and `p_pred` future steps exist; end steps advance by `config.stride`.
/// Pedestrians with insufficient history are skipped.
pub fn extract_structures(scene: &Scene, config: &Config) -> Result<Vec<DatabaseStructure>> {
    let window = config.window();
    let f_obs = config.f_obs;
    let p_pred = config.p_pred;
    let mut out = Vec::new();

    for (&ped, traj) in &scene.trajectories {
        let len = traj.len();
        if len < f_obs + p_pred {
            continue;
        }
        // Local end steps: e = f_obs-1, f_obs-1+stride, ... with p_pred left.
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
            let future_scene = traj.slice_time(e + 1, e + p_pred).expect("future in range");
            let future = future_scene
                .map_positions(|p| transform.apply(p))
                .reindexed(f_obs);
            out.push(DatabaseStructure { observed, future });
            e += config.stride;
        }
    }
    Ok(out)
}

/// Number of windows `extract_structures` yields for one trajectory length.
pub fn window_count(len: usize, f_obs: usize, p_pred: usize, stride: usize) -> usize {
    if len < f_obs + p_pred {
        0
    } else {
        (len - f_obs - p_pred) / stride + 1
    }
}

const DB_MAGIC: &[u8] = b"CROWDDB v1\n";
const INDEX_MAGIC: &[u8] = b"INDEX v1\n";

/// Optional index section carried inside the database container; the
/// matching module interprets it.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredIndex {
    pub seed: u64,
    /// Structure indices of the representatives.
    pub representatives: Vec<usize>,
    /// Per representative: (key, member structure index), sorted by key.
    pub trees: Vec<Vec<(f64, usize)>>,
}

fn write_trajectory(w: &mut impl Write, t: &Trajectory) -> Result<()> {
    wire::write_f64(w, t.dt())?;
    wire::write_u32(w, t.len() as u32)?;
    for p in t.points() {
        wire::write_u32(w, p.t as u32)?;
        wire::write_f64(w, p.pos.x)?;
        wire::write_f64(w, p.pos.y)?;
    }
    Ok(())
}

fn read_trajectory(r: &mut impl Read) -> Result<Trajectory> {
    let dt = wire::read_f64(r)?;
    let n = wire::read_u32(r)? as usize;
    if n > 1 << 24 {
        return Err(Error::Format(format!("trajectory length {n} is implausible")));
    }
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n {
        let t = wire::read_u32(r)? as usize;
        let x = wire::read_f64(r)?;
        let y = wire::read_f64(r)?;
        pts.push(TrackPoint::new(t, x, y));
    }
    Trajectory::new(pts, dt).map_err(|e| Error::Format(e.to_string()))
}

fn write_config(w: &mut impl Write, c: &Config) -> Result<()> {
    wire::write_f64(w, c.window_length)?;
    wire::write_f64(w, c.window_width)?;
    wire::write_u32(w, c.f_obs as u32)?;
    wire::write_u32(w, c.p_pred as u32)?;
    wire::write_f64(w, c.dt)?;
    wire::write_f64(w, c.cell_size)?;
    wire::write_f64(w, c.w_initial)?;
    wire::write_u32(w, c.k as u32)?;
    for v in [c.alpha, c.beta, c.gamma, c.ws1, c.ws2, c.ws3, c.wcs, c.mu, c.nu, c.eta_near] {
        wire::write_f64(w, v)?;
    }
    wire::write_u32(w, c.m_rep as u32)?;
    for v in [c.delta, c.key_scale, c.sigma, c.sim_wc, c.sim_wn, c.sim_wo, c.kappa, c.v_min] {
        wire::write_f64(w, v)?;
    }
    wire::write_u32(w, c.stride as u32)?;
    wire::write_u64(w, c.seed)?;
    wire::write_f64(w, c.epsilon)?;
    wire::write_u8(
        w,
        match c.n_factor_reference {
            crate::config::NFactorReference::Surrounding => 0,
            crate::config::NFactorReference::SelfCentered => 1,
        },
    )?;
    Ok(())
}

fn read_config(r: &mut impl Read) -> Result<Config> {
    let mut c = Config::default();
    c.window_length = wire::read_f64(r)?;
    c.window_width = wire::read_f64(r)?;
    c.f_obs = wire::read_u32(r)? as usize;
    c.p_pred = wire::read_u32(r)? as usize;
    c.dt = wire::read_f64(r)?;
    c.cell_size = wire::read_f64(r)?;
    c.w_initial = wire::read_f64(r)?;
    c.k = wire::read_u32(r)? as usize;
    c.alpha = wire::read_f64(r)?;
    c.beta = wire::read_f64(r)?;
    c.gamma = wire::read_f64(r)?;
    c.ws1 = wire::read_f64(r)?;
    c.ws2 = wire::read_f64(r)?;
    c.ws3 = wire::read_f64(r)?;
    c.wcs = wire::read_f64(r)?;
    c.mu = wire::read_f64(r)?;
    c.nu = wire::read_f64(r)?;
    c.eta_near = wire::read_f64(r)?;
    c.m_rep = wire::read_u32(r)? as usize;
    c.delta = wire::read_f64(r)?;
    c.key_scale = wire::read_f64(r)?;
    c.sigma = wire::read_f64(r)?;
    c.sim_wc = wire::read_f64(r)?;
    c.sim_wn = wire::read_f64(r)?;
    c.sim_wo = wire::read_f64(r)?;
    c.kappa = wire::read_f64(r)?;
    c.v_min = wire::read_f64(r)?;
    c.stride = wire::read_u32(r)? as usize;
    c.seed = wire::read_u64(r)?;
    c.epsilon = wire::read_f64(r)?;
    c.n_factor_reference = match wire::read_u8(r)? {
        0 => crate::config::NFactorReference::Surrounding,
        1 => crate::config::NFactorReference::SelfCentered,
        other => return Err(Error::Format(format!("bad n_factor_reference tag {other}"))),
    };
    c.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(c)
}

/// Serialize a database (and optionally its index) to the `CROWDDB v1`
/// container. Coordinates round-trip bit-identically.
pub fn save_db(db: &CrowdDatabase, index: Option<&StoredIndex>, sink: &mut impl Write) -> Result<()> {
    sink.write_all(DB_MAGIC)?;
    write_config(sink, &db.params)?;
    wire::write_u64(sink, db.structures.len() as u64)?;
    for s in &db.structures {
        let q = &s.observed;
        wire::write_str(sink, &q.source_id.scene)?;
        wire::write_u64(sink, q.source_id.ped)?;
        wire::write_u64(sink, q.source_id.end_frame)?;
        wire::write_f64(sink, q.transform.rotation)?;
        wire::write_f64(sink, q.transform.translation.x)?;
        wire::write_f64(sink, q.transform.translation.y)?;
        write_trajectory(sink, &q.central_history)?;
        wire::write_u32(sink, q.neighbors.len() as u32)?;
        for n in &q.neighbors {
            write_trajectory(sink, n)?;
        }
        wire::write_u32(sink, q.obstacles.len() as u32)?;
        for o in &q.obstacles {
            wire::write_u32(sink, o.vertices().len() as u32)?;
            for v in o.vertices() {
                wire::write_f64(sink, v.x)?;
                wire::write_f64(sink, v.y)?;
            }
        }
        write_trajectory(sink, &s.future)?;
    }
    if let Some(idx) = index {
        sink.write_all(INDEX_MAGIC)?;
        wire::write_u64(sink, idx.seed)?;
        wire::write_u32(sink, idx.representatives.len() as u32)?;
        for &r in &idx.representatives {
            wire::write_u64(sink, r as u64)?;
        }
        for tree in &idx.trees {
            wire::write_u64(sink, tree.len() as u64)?;
            for &(key, member) in tree {
                wire::write_f64(sink, key)?;
                wire::write_u64(sink, member as u64)?;
            }
        }
    }
    Ok(())
}

/// Load a `CROWDDB v1` container, returning the database and the index
/// section when present.
pub fn load_db(source: &mut impl Read) -> Result<(CrowdDatabase, Option<StoredIndex>)> {
    let mut magic = [0u8; DB_MAGIC.len()];
    source
        .read_exact(&mut magic)
        .map_err(|_| Error::Format("missing database header".into()))?;
    if magic != DB_MAGIC {
        return Err(Error::Format("bad magic: not a CROWDDB v1 file".into()));
    }
    let params = read_config(source)?;
    let n = wire::read_u64(source)? as usize;
    let mut structures = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let scene = wire::read_str(source)?;
        let ped = wire::read_u64(source)?;
        let end_frame = wire::read_u64(source)?;
        let rotation = wire::read_f64(source)?;
        let tx = wire::read_f64(source)?;
        let ty = wire::read_f64(source)?;
        let central_history = read_trajectory(source)?;
        let n_neigh = wire::read_u32(source)? as usize;
        let mut neighbors = Vec::with_capacity(n_neigh);
        for _ in 0..n_neigh {
            neighbors.push(read_trajectory(source)?);
        }
        let n_obs = wire::read_u32(source)? as usize;
        let mut obstacles = Vec::with_capacity(n_obs);
        for _ in 0..n_obs {
            let nv = wire::read_u32(source)? as usize;
            let mut verts = Vec::with_capacity(nv);
            for _ in 0..nv {
                let x = wire::read_f64(source)?;
                let y = wire::read_f64(source)?;
                verts.push(Vec2::new(x, y));
            }
            obstacles.push(ObstaclePolygon::new(verts).map_err(|e| Error::Format(e.to_string()))?);
        }
        let future = read_trajectory(source)?;
        structures.push(DatabaseStructure {
            observed: crate::structure::QueryStructure {
                central_history,
                neighbors,
                obstacles,
                transform: crate::geom::FrameTransform {
                    rotation,
                    translation: Vec2::new(tx, ty),
                },
                source_id: SourceId { scene, ped, end_frame },
            },
            future,
        });
    }

    // Optional index section.
    let mut index_magic = [0u8; INDEX_MAGIC.len()];
    let index = match source.read_exact(&mut index_magic) {
        Err(_) => None, // clean EOF: no index
        Ok(()) => {
            if index_magic != INDEX_MAGIC {
                return Err(Error::Format("bad index section magic".into()));
            }
            let seed = wire::read_u64(source)?;
            let m = wire::read_u32(source)? as usize;
            let mut representatives = Vec::with_capacity(m);
            for _ in 0..m {
                representatives.push(wire::read_u64(source)? as usize);
            }
            let mut trees = Vec::with_capacity(m);
            for _ in 0..m {
                let count = wire::read_u64(source)? as usize;
                let mut tree = Vec::with_capacity(count.min(1 << 20));
                for _ in 0..count {
                    let key = wire::read_f64(source)?;
                    let member = wire::read_u64(source)? as usize;
                    tree.push((key, member));
                }
                trees.push(tree);
            }
            Some(StoredIndex { seed, representatives, trees })
        }
    };

    Ok((CrowdDatabase { structures, params }, index))
}

/// Pick the parameters that govern a loaded database: the stored snapshot
/// wins over the requested config. Returns true when they differed (callers
/// should warn).
pub fn effective_params(db: &CrowdDatabase, requested: &Config) -> (Config, bool) {
    let overridden = db.params != *requested;
    (db.params.clone(), overridden)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_single_annotation() {
        let scene = parse_scene("780 1 8.46 3.59\n".as_bytes(), 0.4, "eth").unwrap();
        let t = &scene.trajectories[&1];
        assert_eq!(t.len(), 1);
        assert_eq!(t.first().pos, Vec2::new(8.46, 3.59));
    }

    #[test]
    fn empty_file_gives_empty_scene() {
        let scene = parse_scene("# nothing here\n".as_bytes(), 0.4, "empty").unwrap();
        assert!(scene.trajectories.is_empty());
    }

    #[test]
    fn interleaved_pedestrians_sorted_by_time() {
        let text = "10 1 0.0 0.0\n10 2 5.0 5.0\n20 1 1.0 0.0\n20 2 6.0 5.0\n30 1 2.0 0.0\n";
        let scene = parse_scene(text.as_bytes(), 0.4, "s").unwrap();
        assert_eq!(scene.frame_stride, 10);
        // Oracle: sort rows by frame and group by pedestrian.
        let t1 = &scene.trajectories[&1];
        assert_eq!(t1.len(), 3);
        assert!((t1.at(1).pos.x - 1.0).abs() < 1e-12);
        assert_eq!(scene.trajectories[&2].len(), 2);
        assert_eq!(scene.frame_of_step(1, 2), 30);
        assert_eq!(scene.step_of_frame(1, 20), Some(1));
        assert_eq!(scene.step_of_frame(1, 25), None);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_scene("10 1 0.0 0.0\nbogus line\n".as_bytes(), 0.4, "s").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_frame_rejected() {
        let err = parse_scene("10 1 0.0 0.0\n10 1 1.0 0.0\n".as_bytes(), 0.4, "s").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn non_monotone_frames_rejected() {
        let err =
            parse_scene("20 1 0.0 0.0\n10 1 1.0 0.0\n".as_bytes(), 0.4, "s").unwrap_err();
        assert!(err.to_string().contains("non-monotone"));
    }

    #[test]
    fn obstacle_line_forms_unit_square() {
        let polys = parse_obstacles("0 0 1 0 1 1 0 1\n".as_bytes()).unwrap();
        assert_eq!(polys.len(), 1);
        assert_eq!(polys[0].vertices().len(), 4);
    }

    #[test]
    fn obstacle_with_two_vertices_rejected() {
        assert!(parse_obstacles("0 0 1 0\n".as_bytes()).is_err());
    }

    #[test]
    fn obstacle_with_odd_coordinates_rejected() {
        assert!(parse_obstacles("0 0 1 0 1\n".as_bytes()).is_err());
    }

    fn scene_with_walker(len: usize) -> Scene {
        let mut text = String::new();
        for i in 0..len {
            text.push_str(&format!("{} 1 {} 0.0\n", 10 * (i + 1), 0.4 * i as f64));
        }
        parse_scene(text.as_bytes(), 0.4, "walk").unwrap()
    }

    #[test]
    fn window_counts_match_formula() {
        // 20 steps, 8 observed + 8 future, stride 1: end steps 7..=11.
        let cfg = Config::default();
        let scene = scene_with_walker(20);
        let structures = extract_structures(&scene, &cfg).unwrap();
        assert_eq!(structures.len(), 5);
        assert_eq!(window_count(20, 8, 8, 1), 5);
        // Too short for any future.
        let short = scene_with_walker(10);
        assert!(extract_structures(&short, &cfg).unwrap().is_empty());
    }

    #[test]
    fn side_by_side_pedestrians_are_mutual_neighbors() {
        let mut text = String::new();
        for i in 0..20 {
            text.push_str(&format!("{} 1 {} 0.0\n", 10 * (i + 1), 0.4 * i as f64));
            text.push_str(&format!("{} 2 {} 1.0\n", 10 * (i + 1), 0.4 * i as f64));
        }
        let scene = parse_scene(text.as_bytes(), 0.4, "pair").unwrap();
        let structures = extract_structures(&scene, &Config::default()).unwrap();
        assert_eq!(structures.len(), 10);
        for s in &structures {
            assert!(
                !s.observed.neighbors.is_empty(),
                "structure {:?} lost its neighbor",
                s.observed.source_id
            );
        }
    }

    #[test]
    fn time_disjoint_pedestrians_are_not_neighbors() {
        // Same corridor, but pedestrian 2 appears long after 1 has left.
        let mut text = String::new();
        for i in 0..20 {
            text.push_str(&format!("{} 1 {} 0.0\n", 10 * (i + 1), 0.4 * i as f64));
        }
        for i in 0..20 {
            text.push_str(&format!("{} 2 {} 0.0\n", 10 * (i + 41), 0.4 * i as f64));
        }
        let scene = parse_scene(text.as_bytes(), 0.4, "late").unwrap();
        let structures = extract_structures(&scene, &Config::default()).unwrap();
        assert_eq!(structures.len(), 10);
        for s in &structures {
            assert!(
                s.observed.neighbors.is_empty(),
                "{:?} gained a neighbor from a different time",
                s.observed.source_id
            );
        }
    }

    #[test]
    fn offset_spawn_neighbors_align_by_frame() {
        // Pedestrian 2 spawns 5 annotation steps later, walking alongside.
        let mut text = String::new();
        for i in 0..25 {
            text.push_str(&format!("{} 1 {} 0.0\n", 10 * (i + 1), 0.4 * i as f64));
        }
        for i in 0..20 {
            text.push_str(&format!("{} 2 {} 1.0\n", 10 * (i + 6), 0.4 * (i + 5) as f64));
        }
        let scene = parse_scene(text.as_bytes(), 0.4, "offset").unwrap();
        let slices = scene.aligned_neighbor_slices(1, 0, 7);
        // Ped 2 exists at central steps 5..=24; overlap with [0, 7] is [5, 7].
        assert_eq!(slices.len(), 1);
        assert_eq!(slices[0].first().t, 5);
        assert_eq!(slices[0].last().t, 7);
        // Positions align: at central step 5, ped 2 is at its own step 0.
        assert!((slices[0].first().pos.x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn extracted_structures_satisfy_invariants() {
        let mut text = String::new();
        for i in 0..30 {
            let x = 0.4 * i as f64;
            text.push_str(&format!("{} 1 {} {}\n", 10 * (i + 1), x, 0.05 * x));
            text.push_str(&format!("{} 2 {} 1.2\n", 10 * (i + 1), 0.3 * i as f64));
        }
        let scene = parse_scene(text.as_bytes(), 0.4, "inv").unwrap();
        let cfg = Config::default();
        for s in extract_structures(&scene, &cfg).unwrap() {
            s.validate(&cfg).unwrap();
        }
    }

    #[test]
    fn db_roundtrip_is_bit_exact() {
        let scene = scene_with_walker(20);
        let cfg = Config::default();
        let db = CrowdDatabase {
            structures: extract_structures(&scene, &cfg).unwrap(),
            params: cfg,
        };
        let mut buf = Vec::new();
        save_db(&db, None, &mut buf).unwrap();
        let (loaded, idx) = load_db(&mut buf.as_slice()).unwrap();
        assert!(idx.is_none());
        assert_eq!(loaded.params, db.params);
        assert_eq!(loaded.structures, db.structures);
    }

    #[test]
    fn index_section_roundtrips() {
        let scene = scene_with_walker(20);
        let cfg = Config::default();
        let db = CrowdDatabase {
            structures: extract_structures(&scene, &cfg).unwrap(),
            params: cfg,
        };
        let stored = StoredIndex {
            seed: 9,
            representatives: vec![0, 2],
            trees: vec![vec![(0.5, 1)], vec![(0.25, 3), (0.75, 4)]],
        };
        let mut buf = Vec::new();
        save_db(&db, Some(&stored), &mut buf).unwrap();
        let (_, idx) = load_db(&mut buf.as_slice()).unwrap();
        assert_eq!(idx.unwrap(), stored);
    }

    #[test]
    fn load_rejects_empty_and_truncated() {
        assert!(matches!(load_db(&mut [].as_slice()), Err(Error::Format(_))));
        let scene = scene_with_walker(20);
        let cfg = Config::default();
        let db = CrowdDatabase {
            structures: extract_structures(&scene, &cfg).unwrap(),
            params: cfg,
        };
        let mut buf = Vec::new();
        save_db(&db, None, &mut buf).unwrap();
        buf.truncate(buf.len() - 7);
        assert!(matches!(load_db(&mut buf.as_slice()), Err(Error::Format(_))));
        buf[0] = b'X';
        assert!(matches!(load_db(&mut buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn stored_params_override_requested_config() {
        let scene = scene_with_walker(20);
        let mut stored_cfg = Config::default();
        stored_cfg.f_obs = 8;
        let db = CrowdDatabase {
            structures: extract_structures(&scene, &stored_cfg).unwrap(),
            params: stored_cfg.clone(),
        };
        let mut requested = Config::default();
        requested.f_obs = 6;
        let (effective, overridden) = effective_params(&db, &requested);
        assert!(overridden);
        assert_eq!(effective.f_obs, 8);
        let (_, same) = effective_params(&db, &stored_cfg);
        assert!(!same);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn total_count_matches_per_ped_formula(
            lens in proptest::collection::vec(1usize..40, 1..6),
            stride in 1usize..4,
        ) {
            let mut cfg = Config::default();
            cfg.stride = stride;
            let mut text = String::new();
            for (ped, len) in lens.iter().enumerate() {
                for i in 0..*len {
                    // Spread pedestrians far apart to keep the test focused on counting.
                    text.push_str(&format!(
                        "{} {} {} {}\n",
                        10 * (i + 1),
                        ped + 1,
                        0.4 * i as f64,
                        100.0 * ped as f64
                    ));
                }
            }
            let scene = parse_scene(text.as_bytes(), 0.4, "count").unwrap();
            let structures = extract_structures(&scene, &cfg).unwrap();
            let expected: usize = lens
                .iter()
                .map(|&l| window_count(l, cfg.f_obs, cfg.p_pred, stride))
                .sum();
            prop_assert_eq!(structures.len(), expected);
        }
    }
}
