use crowdpath::eval::synth::{generate_scene, preset};
use crowdpath::ingest::extract_structures;
use crowdpath::Config;

fn main() {
    let t0 = std::time::Instant::now();
    let mut u = preset("univ", 55).unwrap();
    u.n_peds = 450;
    let s = generate_scene(&u);
    println!("gen {:.1}s", t0.elapsed().as_secs_f64());
    let lens: Vec<usize> = s.trajectories.values().map(|t| t.len()).collect();
    println!("peds {} len min/mean/max {}/{:.0}/{}", lens.len(),
        lens.iter().min().unwrap(),
        lens.iter().sum::<usize>() as f64 / lens.len() as f64,
        lens.iter().max().unwrap());
    let t1 = std::time::Instant::now();
    let cfg = Config::default();
    let st = extract_structures(&s, &cfg).unwrap();
    println!("extract {:.1}s -> {} structures", t1.elapsed().as_secs_f64(), st.len());
    let nb: usize = st.iter().map(|x| x.observed.neighbors.len()).sum();
    println!("mean neighbors/structure {:.1}", nb as f64 / st.len() as f64);
}
