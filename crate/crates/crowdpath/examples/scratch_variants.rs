use crowdpath::eval::collect_samples;
use crowdpath::eval::synth::{generate_scene, preset};
use crowdpath::ingest::{extract_structures, CrowdDatabase};
use crowdpath::matching::{build_index, linear_scan_top_k, query_top_k, select_representatives};
use crowdpath::Config;

fn main() {
    for (label, turn, jitter, classes) in [
        ("V1 t.65 j.02 c3", 0.65, 0.02, 3usize),
        ("V2 t.75 j.02 c3", 0.75, 0.02, 3),
        ("V3 t.75 j.02 c0", 0.75, 0.02, 0),
        ("V4 t.65 j.02 c0", 0.65, 0.02, 0),
    ] {
        let mk = |name: &str, seed: u64, n: usize| {
            let mut o = preset(name, seed).unwrap();
            o.n_peds = n;
            o.turn_fraction = turn;
            o.lane_jitter = jitter;
            o.speed_classes = classes;
            generate_scene(&o)
        };
        let corpus = [mk("univ", 55, 450), mk("zara01", 56, 450)];
        let heldout = mk("zara02", 57, 60);
        let c0 = Config::default();
        let mut structures = Vec::new();
        for s in &corpus {
            structures.extend(extract_structures(s, &c0).unwrap());
        }
        let n = structures.len();
        let samples = collect_samples(&heldout, &c0).unwrap();
        let step = (samples.len() / 150).max(1);
        print!("{label}: N={n}");
        for key_scale in [10.0, 12.0, 14.0] {
            let mut c = Config::default();
            c.key_scale = key_scale;
            let db = CrowdDatabase { structures: structures.clone(), params: c.clone() };
            let reps = select_representatives(&db, c.m_rep, c.seed).unwrap();
            let index = build_index(&db, &reps, c.seed).unwrap();
            let mut visited_sum = 0usize;
            let mut recall_sum = 0.0;
            let mut probes = 0usize;
            for s in samples.iter().step_by(step).take(150) {
                let q = &s.structure.observed;
                let (cands, stats) = query_top_k(&index, &db, q, 3, c.delta, &c).unwrap();
                visited_sum += stats.visited;
                let oracle = linear_scan_top_k(&db, q, 3, &c).unwrap();
                let hits = oracle.iter().filter(|o| cands.iter().any(|x| x.index == o.index)).count();
                recall_sum += hits as f64 / oracle.len() as f64;
                probes += 1;
            }
            print!(
                "  [s{key_scale:.0}: {:.1}% r{:.3}]",
                100.0 * visited_sum as f64 / (probes * n) as f64,
                recall_sum / probes as f64
            );
        }
        println!();
    }
}
