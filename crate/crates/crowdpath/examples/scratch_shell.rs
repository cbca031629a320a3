use crowdpath::eval::collect_samples;
use crowdpath::eval::synth::{generate_scene, preset};
use crowdpath::ingest::{extract_structures, CrowdDatabase};
use crowdpath::matching::{build_index, central_distance, linear_scan_top_k, query_top_k, select_representatives};
use crowdpath::Config;

fn main() {
    for (label, noise, lane_jitter_small) in [("loose", 0.015, false), ("tight", 0.008, true)] {
        // lane jitter is inside synth; emulate "tight" by scaling noise only for now
        let mut u = preset("univ", 55).unwrap();
        u.n_peds = 450;
        u.noise_sd = noise;
        let mut z1 = preset("zara01", 56).unwrap();
        z1.n_peds = 450;
        z1.noise_sd = noise;
        let mut z2 = preset("zara02", 57).unwrap();
        z2.n_peds = 60;
        z2.noise_sd = noise;
        let _ = lane_jitter_small;
        let corpus = [generate_scene(&u), generate_scene(&z1)];
        let heldout = generate_scene(&z2);

        let c0 = Config::default();
        let mut structures = Vec::new();
        for s in &corpus {
            structures.extend(extract_structures(s, &c0).unwrap());
        }
        let n = structures.len();
        let db0 = CrowdDatabase { structures, params: c0.clone() };
        // top-3 distance stats over 60 held-out queries
        let samples = collect_samples(&heldout, &c0).unwrap();
        let step = (samples.len() / 60).max(1);
        let mut dstars = Vec::new();
        for s in samples.iter().step_by(step).take(60) {
            let oracle = linear_scan_top_k(&db0, &s.structure.observed, 3, &c0).unwrap();
            for o in &oracle {
                let d = central_distance(&s.structure.observed, &db0.structures[o.index].observed).unwrap();
                dstars.push(d);
            }
        }
        dstars.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!(
            "{label}: N={n} top3 dist p50 {:.3} p90 {:.3} max {:.3}",
            dstars[dstars.len() / 2],
            dstars[dstars.len() * 9 / 10],
            dstars[dstars.len() - 1]
        );

        for key_scale in [12.0, 16.0, 20.0] {
            let mut c = Config::default();
            c.key_scale = key_scale;
            let mut db = db0.clone();
            db.params = c.clone();
            let reps = select_representatives(&db, c.m_rep, c.seed).unwrap();
            let index = build_index(&db, &reps, c.seed).unwrap();
            let mut visited_sum = 0usize;
            let mut recall_sum = 0.0;
            let mut probes = 0usize;
            for s in samples.iter().step_by(step).take(120) {
                let q = &s.structure.observed;
                let (cands, stats) = query_top_k(&index, &db, q, 3, c.delta, &c).unwrap();
                visited_sum += stats.visited;
                let oracle = linear_scan_top_k(&db, q, 3, &c).unwrap();
                let hits = oracle.iter().filter(|o| cands.iter().any(|x| x.index == o.index)).count();
                recall_sum += hits as f64 / oracle.len() as f64;
                probes += 1;
            }
            println!(
                "  key_scale {key_scale:4.1}: visited {:.1}% recall {:.3}",
                100.0 * visited_sum as f64 / (probes * n) as f64,
                recall_sum / probes as f64
            );
        }
    }
}
