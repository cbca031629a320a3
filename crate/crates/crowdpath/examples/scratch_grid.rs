use crowdpath::eval::benchmark::{run_benchmark, BenchmarkOptions, Method};
use crowdpath::eval::synth::{generate_scene, preset};
use crowdpath::Config;

fn main() {
    let cfg = Config::default();
    for (n_peds, turn_frac, speed_a, speed_b) in [
        (80usize, 0.55f64, 1.4f64, 1.15f64),
        (80, 0.75, 1.4, 1.15),
        (120, 0.75, 1.35, 1.25),
        (160, 0.75, 1.35, 1.25),
    ] {
        let mut eth = preset("eth", 101).unwrap();
        eth.n_peds = n_peds;
        eth.turn_fraction = turn_frac;
        eth.speed_mean = speed_a;
        let mut hotel = preset("hotel", 102).unwrap();
        hotel.n_peds = n_peds;
        hotel.turn_fraction = turn_frac;
        hotel.speed_mean = speed_b;
        let scenes = vec![generate_scene(&eth), generate_scene(&hotel)];
        let bopts = BenchmarkOptions {
            methods: vec![Method::Full, Method::Linear, Method::Sim1, Method::SimK],
            horizons: vec![3.2],
            leakage: false,
            success_threshold: None,
        };
        let t0 = std::time::Instant::now();
        let report = run_benchmark(&scenes, &cfg, &bopts).unwrap();
        let g = |m| report.average_ade(m, 3.2).unwrap();
        let (full, lin, s1, sk) = (g(Method::Full), g(Method::Linear), g(Method::Sim1), g(Method::SimK));
        println!(
            "peds {n_peds:3} turn {turn_frac:.2} speeds {speed_a:.2}/{speed_b:.2}: full {full:.4} lin {lin:.4} sim1 {s1:.4} simk {sk:.4} | impr {:.1}% ({:.0}s)",
            100.0 * (1.0 - full / lin),
            t0.elapsed().as_secs_f64()
        );
    }
}
