use crowdpath::eval::collect_samples;
use crowdpath::eval::synth::{generate_scene, preset};
use crowdpath::ingest::{extract_structures, CrowdDatabase};
use crowdpath::matching::{build_index, linear_scan_top_k, query_top_k, select_representatives};
use crowdpath::Config;

fn main() {
    // Corpus: univ + zara01; queries: windows of a held-out zara02 scene.
    let mut u = preset("univ", 55).unwrap();
    u.n_peds = 450;
    let mut z1 = preset("zara01", 56).unwrap();
    z1.n_peds = 450;
    let mut z2 = preset("zara02", 57).unwrap();
    z2.n_peds = 60;
    let corpus = [generate_scene(&u), generate_scene(&z1)];
    let heldout = generate_scene(&z2);

    for key_scale in [8.0, 10.0, 12.0, 14.0] {
        let mut c = Config::default();
        c.key_scale = key_scale;
        let mut structures = Vec::new();
        for s in &corpus {
            structures.extend(extract_structures(s, &c).unwrap());
        }
        let n = structures.len();
        let db = CrowdDatabase { structures, params: c.clone() };
        let reps = select_representatives(&db, c.m_rep, c.seed).unwrap();
        let index = build_index(&db, &reps, c.seed).unwrap();
        let samples = collect_samples(&heldout, &c).unwrap();
        let step = (samples.len() / 200).max(1);
        let mut visited_sum = 0usize;
        let mut recall_sum = 0.0;
        let mut probes = 0usize;
        for s in samples.iter().step_by(step).take(200) {
            let q = &s.structure.observed;
            let (cands, stats) = query_top_k(&index, &db, q, 3, c.delta, &c).unwrap();
            visited_sum += stats.visited;
            let oracle = linear_scan_top_k(&db, q, 3, &c).unwrap();
            let hits = oracle.iter().filter(|o| cands.iter().any(|x| x.index == o.index)).count();
            recall_sum += hits as f64 / oracle.len() as f64;
            probes += 1;
        }
        println!(
            "key_scale {key_scale:4.1}: N={n} probes {probes} visited {:.1}% recall {:.3}",
            100.0 * visited_sum as f64 / (probes * n) as f64,
            recall_sum / probes as f64
        );
    }
}
