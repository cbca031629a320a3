use crowdpath::eval::synth::{generate_scene, preset};
use crowdpath::eval::{ade, collect_samples};
use crowdpath::ingest::{extract_structures, CrowdDatabase};
use crowdpath::matching::{build_index, linear_scan_top_k, query_top_k, select_representatives};
use crowdpath::planner::predict;
use crowdpath::Config;

fn main() {
    // --- Self-retrieval worst-case diagnosis ---
    let cfg = Config::default();
    let mut opts = preset("eth", 31).unwrap();
    opts.n_peds = 30;
    let scene = generate_scene(&opts);
    let structures = extract_structures(&scene, &cfg).unwrap();
    let db = CrowdDatabase { structures, params: cfg.clone() };
    let reps = select_representatives(&db, cfg.m_rep.min(db.structures.len()), cfg.seed).unwrap();
    let index = build_index(&db, &reps, cfg.seed).unwrap();
    let samples = collect_samples(&scene, &cfg).unwrap();
    let mut rows = Vec::new();
    for (si, s) in samples.iter().take(100).enumerate() {
        let r = predict(&s.structure.observed, &index, &db, Some(&s.pobs), &cfg).unwrap();
        let a = ade(&r.trajectory, &s.gt_scene).unwrap();
        // lateral displacement of gt future in canonical frame
        let anchor = s.structure.observed.current_pos();
        let max_lat = s.structure.future.points().iter().map(|p| (p.pos.y - anchor.y).abs()).fold(0.0f64, f64::max);
        let max_x = s.structure.future.points().iter().map(|p| p.pos.x).fold(0.0f64, f64::max);
        let in_window = s.structure.future.points().iter().all(|p| p.pos.x >= 0.0 && p.pos.x <= 7.0 && p.pos.y >= 0.0 && p.pos.y <= 3.5);
        let self_rank1 = r.candidates.first().map(|c| (c.similarity * 1000.0).round() / 1000.0);
        rows.push((a, si, max_lat, max_x, in_window, r.destination.clamped, r.retargeted, self_rank1));
    }
    rows.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    println!("worst self-retrieval samples:");
    for (a, si, lat, mx, inw, clamped, ret, s1) in rows.iter().take(10) {
        println!("  ade {a:.3} sample {si} gt_lat {lat:.2} gt_maxx {mx:.2} in_window {inw} clamped {clamped} retarg {ret} sim1 {s1:?}");
    }
    let n_exit = rows.iter().filter(|r| !r.4).count();
    let fail_exit = rows.iter().filter(|r| r.0 > 0.283 && !r.4).count();
    let fail_inw = rows.iter().filter(|r| r.0 > 0.283 && r.4).count();
    println!("futures exiting window: {n_exit}/100; failures among exits {fail_exit}, among in-window {fail_inw}");

    // --- key_scale tuning on a bigger corpus ---
    let mut u = preset("univ", 55).unwrap();
    u.n_peds = 120;
    let big = generate_scene(&u);
    for key_scale in [4.0, 8.0, 12.0, 16.0] {
        let mut c = Config::default();
        c.key_scale = key_scale;
        let structures = extract_structures(&big, &c).unwrap();
        let n = structures.len();
        let db = CrowdDatabase { structures, params: c.clone() };
        let reps = select_representatives(&db, c.m_rep, c.seed).unwrap();
        let index = build_index(&db, &reps, c.seed).unwrap();
        // probes: jittered copies of stored structures
        let mut visited_sum = 0usize;
        let mut recall_sum = 0.0;
        let probes = 60usize;
        for pi in 0..probes {
            let idx = (pi * 131) % n;
            let q = db.structures[idx].observed.clone();
            let (cands, stats) = query_top_k(&index, &db, &q, 3, c.delta, &c).unwrap();
            visited_sum += stats.visited;
            let oracle = linear_scan_top_k(&db, &q, 3, &c).unwrap();
            let hits = oracle.iter().filter(|o| cands.iter().any(|x| x.index == o.index)).count();
            recall_sum += hits as f64 / oracle.len() as f64;
        }
        println!(
            "key_scale {key_scale:4.1}: N={n} visited {:.1}% recall {:.3}",
            100.0 * visited_sum as f64 / (probes * n) as f64,
            recall_sum / probes as f64
        );
    }
}
