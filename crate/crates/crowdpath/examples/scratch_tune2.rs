use crowdpath::eval::benchmark::{run_benchmark, BenchmarkOptions, Method};
use crowdpath::eval::synth::{generate_scene, preset};
use crowdpath::geom::Vec2;
use crowdpath::ingest::{extract_structures, CrowdDatabase};
use crowdpath::matching::{build_index, linear_scan_top_k, query_top_k, select_representatives};
use crowdpath::Config;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    // Recall with jittered probes + visited on a larger corpus.
    let mut u = preset("univ", 55).unwrap();
    u.n_peds = 450;
    let mut z = preset("zara01", 56).unwrap();
    z.n_peds = 450;
    let big: Vec<_> = vec![generate_scene(&u), generate_scene(&z)];
    for key_scale in [10.0, 12.0, 16.0] {
        let mut c = Config::default();
        c.key_scale = key_scale;
        let mut structures = Vec::new();
        for s in &big {
            structures.extend(extract_structures(s, &c).unwrap());
        }
        let n = structures.len();
        let db = CrowdDatabase { structures, params: c.clone() };
        let reps = select_representatives(&db, c.m_rep, c.seed).unwrap();
        let index = build_index(&db, &reps, c.seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut visited_sum = 0usize;
        let mut recall_sum = 0.0;
        let probes = 100usize;
        let t0 = std::time::Instant::now();
        for pi in 0..probes {
            let idx = (pi * 977) % n;
            let mut q = db.structures[idx].observed.clone();
            let jx: f64 = rng.random_range(-0.25..0.25);
            let jy: f64 = rng.random_range(-0.25..0.25);
            q.central_history = q.central_history.map_positions(|p| p + Vec2::new(jx, jy));
            let (cands, stats) = query_top_k(&index, &db, &q, 3, c.delta, &c).unwrap();
            visited_sum += stats.visited;
            let oracle = linear_scan_top_k(&db, &q, 3, &c).unwrap();
            let hits = oracle.iter().filter(|o| cands.iter().any(|x| x.index == o.index)).count();
            recall_sum += hits as f64 / oracle.len() as f64;
        }
        println!(
            "key_scale {key_scale:4.1}: N={n} visited {:.1}% recall(jitter) {:.3} ({:.1}s)",
            100.0 * visited_sum as f64 / (probes * n) as f64,
            recall_sum / probes as f64,
            t0.elapsed().as_secs_f64()
        );
    }

    // Benchmark impact per scale.
    let mut eth = preset("eth", 101).unwrap();
    eth.n_peds = 40;
    let mut hotel = preset("hotel", 102).unwrap();
    hotel.n_peds = 40;
    let scenes = vec![generate_scene(&eth), generate_scene(&hotel)];
    for key_scale in [12.0, 16.0] {
        let mut cfg = Config::default();
        cfg.key_scale = key_scale;
        let bopts = BenchmarkOptions {
            methods: vec![Method::Full, Method::Linear],
            horizons: vec![3.2],
            leakage: false,
            success_threshold: None,
        };
        let report = run_benchmark(&scenes, &cfg, &bopts).unwrap();
        let full = report.average_ade(Method::Full, 3.2).unwrap();
        let lin = report.average_ade(Method::Linear, 3.2).unwrap();
        println!("key_scale {key_scale:4.1}: full {full:.4} linear {lin:.4} improvement {:.1}%", 100.0 * (1.0 - full / lin));
    }
}
