//! Scratch micro-benchmark; not part of the deliverable surface.
use grnssm::simulate::GroundTruthConfig;
use grnssm::{estep, fit, generate, init, random_ground_truth, FitConfig};
use std::time::Instant;

fn main() {
    let truth = random_ground_truth(2, 2, &GroundTruthConfig::default(), 0).unwrap();
    let (ds, _) = generate(&truth.params, 10, 50, 0).unwrap();
    let params = init(&ds, 2).unwrap();
    let _ = estep(&params, &ds).unwrap();
    let n = 200;
    let t0 = Instant::now();
    let mut acc = 0.0;
    for _ in 0..n {
        let (s, ll) = estep(&params, &ds).unwrap();
        acc += ll + s.s_tt[(0, 0)];
    }
    println!("estep: {:?} per call (acc={acc})", t0.elapsed() / n);

    for seed in 0..3u64 {
        let truth = random_ground_truth(2, 2, &GroundTruthConfig::default(), seed).unwrap();
        let (ds, _) = generate(&truth.params, 10, 50, seed).unwrap();
        let t0 = Instant::now();
        let r = fit(&ds, 2, &FitConfig::default()).unwrap();
        println!(
            "fit seed={seed}: iters={} converged={} in {:?} ({:?}/iter)",
            r.iterations,
            r.converged,
            t0.elapsed(),
            t0.elapsed() / r.iterations as u32
        );
    }
}
