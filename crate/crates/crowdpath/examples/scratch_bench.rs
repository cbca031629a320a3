use crowdpath::eval::benchmark::{run_benchmark, BenchmarkOptions, Method};
use crowdpath::eval::synth::{generate_scene, preset};
use crowdpath::eval::{ade, collect_samples};
use crowdpath::ingest::{extract_structures, CrowdDatabase};
use crowdpath::matching::{build_index, select_representatives};
use crowdpath::planner::predict;
use crowdpath::Config;

fn main() {
    let cfg = Config::default();

    // --- Self-retrieval (criterion 7 shape) ---
    let mut opts = preset("eth", 31).unwrap();
    opts.n_peds = 30;
    let scene = generate_scene(&opts);
    let cfg2 = cfg.clone();
    let structures = extract_structures(&scene, &cfg2).unwrap();
    println!("self-retrieval db size: {}", structures.len());
    let db = CrowdDatabase { structures, params: cfg2.clone() };
    let reps = select_representatives(&db, cfg2.m_rep.min(db.structures.len()), cfg2.seed).unwrap();
    let index = build_index(&db, &reps, cfg2.seed).unwrap();
    let samples = collect_samples(&scene, &cfg2).unwrap();
    let mut oks = 0;
    let mut total = 0;
    let mut worst: f64 = 0.0;
    let mut sum = 0.0;
    for s in samples.iter().take(100) {
        let r = predict(&s.structure.observed, &index, &db, Some(&s.pobs), &cfg2).unwrap();
        let a = ade(&r.trajectory, &s.gt_scene).unwrap();
        sum += a;
        if a <= 0.283 { oks += 1; }
        if a > worst { worst = a; }
        total += 1;
    }
    println!("self-retrieval: {}/{} within 0.283, mean {:.3}, worst {:.3}", oks, total, sum / total as f64, worst);

    // --- Leave-one-out benchmark (criterion 8 shape) ---
    let mut eth = preset("eth", 101).unwrap();
    eth.n_peds = 40;
    let mut hotel = preset("hotel", 102).unwrap();
    hotel.n_peds = 40;
    let scenes = vec![generate_scene(&eth), generate_scene(&hotel)];
    let bopts = BenchmarkOptions {
        methods: vec![Method::Full, Method::Linear, Method::Sim1, Method::SimK],
        horizons: vec![3.2],
        leakage: false,
        success_threshold: None,
    };
    let t0 = std::time::Instant::now();
    let report = run_benchmark(&scenes, &cfg, &bopts).unwrap();
    println!("benchmark took {:.1}s", t0.elapsed().as_secs_f64());
    for row in &report.rows {
        println!("{:8} {:8} ade {:.4} fde {:.4} n {}", row.method.name(), row.scene, row.metrics.ade, row.metrics.fde, row.metrics.n);
    }
    for a in &report.averages {
        println!("AVG {:8} ade {:.4} fde {:.4}", a.method.name(), a.metrics.ade, a.metrics.fde);
    }
    for i in &report.index_stats {
        println!("index {}: N={} mean visited {:.1} ({:.1}%)", i.scene, i.db_size, i.mean_visited, 100.0 * i.visited_fraction);
    }
}
