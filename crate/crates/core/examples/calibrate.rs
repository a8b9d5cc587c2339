//! Scratch calibration harness for the stochastic acceptance thresholds.
//! Not part of the deliverable surface; run with
//! `cargo run --example calibrate -p grnssm -- <mode>`.

use grnssm::simulate::{BlockFilter, GroundTruthConfig};
use grnssm::{
    align::{align_loadings, apply_alignment},
    assemble_graph_matrix, bootstrap_fit, confidence_intervals, generate, random_ground_truth,
    recovery_metrics, select_k, FitConfig,
};
use nalgebra::DMatrix;

fn f1_for(seed: u64, n_r: usize, sigma2_xi: f64, align_to_truth: bool) -> (f64, f64, f64) {
    let cfg = GroundTruthConfig {
        sigma2_xi,
        ..GroundTruthConfig::default()
    };
    let truth = random_ground_truth(2, 2, &cfg, seed).unwrap();
    let (ds, truth) = generate(&truth.params, 10, n_r, seed).unwrap();
    let fit_cfg = FitConfig { seed, ..Default::default() };
    let dist = bootstrap_fit(&ds, 2, 99, &fit_cfg).unwrap();

    let dist = if align_to_truth {
        // Re-express the whole distribution in truth coordinates.
        let g_truth = assemble_graph_matrix(&truth.params);
        let (_, z_truth, _, _) = g_truth.blocks();
        let (_, z_ref, _, _) = dist.reference.blocks();
        let al = align_loadings(&z_truth, &z_ref);
        let reference = apply_alignment(&dist.reference, &al);
        let samples = dist
            .samples
            .iter()
            .map(|g| {
                let gm = grnssm::GenomicGraphMatrix::from_matrix(g.clone(), 2, 2).unwrap();
                apply_alignment(&gm, &al).matrix().clone()
            })
            .collect();
        grnssm::BootstrapDistribution {
            reference,
            samples,
            ..dist
        }
    } else {
        dist
    };

    let decisions = confidence_intervals(&dist, 0.99).unwrap();
    let mut mask = DMatrix::from_element(4, 4, false);
    for d in &decisions {
        mask[(d.row, d.col)] = d.significant;
    }
    let m = recovery_metrics(&truth, &mask, BlockFilter::All).unwrap();
    let mb = recovery_metrics(&truth, &mask, BlockFilter::Only(grnssm::Block::B)).unwrap();
    (m.f1, m.tpr, mb.f1)
}

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "f1".into());
    match mode.as_str() {
        "f1" => {
            for &sigma2 in &[0.05, 0.1, 0.25, 0.5] {
                for &align in &[false, true] {
                    for &n_r in &[20usize, 100] {
                        let mut f1s = Vec::new();
                        let mut tprs = Vec::new();
                        let mut f1bs = Vec::new();
                        for seed in 0..10u64 {
                            let (f1, tpr, f1b) = f1_for(seed, n_r, sigma2, align);
                            f1s.push(f1);
                            tprs.push(tpr);
                            f1bs.push(f1b);
                        }
                        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                        println!(
                            "sigma2={sigma2} align={align} n_r={n_r}: mean F1={:.3} (tpr={:.3}, B-only F1={:.3}) per-seed={:?}",
                            mean(&f1s),
                            mean(&tprs),
                            mean(&f1bs),
                            f1s.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
                        );
                    }
                }
            }
        }
        "selectk" => {
            for &(density, mag_lo, mag_hi, sigma2, n_r, max_iter, tol) in &[
                (1.0, 0.5, 0.9, 0.02, 100usize, 3000usize, 1e-6),
                (1.0, 0.6, 0.9, 0.02, 100, 3000, 1e-6),
                (1.0, 0.5, 0.9, 0.05, 100, 3000, 1e-6),
                (1.0, 0.6, 0.9, 0.05, 50, 3000, 1e-6),
            ] {
                let mut hits = 0;
                let mut choices = Vec::new();
                let mut unconverged = 0usize;
                for seed in 0..10u64 {
                    let cfg = GroundTruthConfig {
                        density,
                        magnitude: (mag_lo, mag_hi),
                        sigma2_xi: sigma2,
                        ..GroundTruthConfig::default()
                    };
                    let truth = random_ground_truth(2, 2, &cfg, seed).unwrap();
                    let (ds, _) = generate(&truth.params, 10, n_r, seed).unwrap();
                    let report = select_k(
                        &ds,
                        &[0, 1, 2, 3, 4],
                        &FitConfig { seed, max_iter, tol },
                    )
                    .unwrap();
                    choices.push(report.chosen_k);
                    unconverged += report.entries.iter().filter(|e| !e.converged).count();
                    if report.chosen_k == 2 {
                        hits += 1;
                    }
                }
                println!(
                    "density={density} mags=({mag_lo},{mag_hi}) sigma2={sigma2} n_r={n_r} max_iter={max_iter} tol={tol}: k=2 chosen {hits}/10, unconverged={unconverged}, choices={choices:?}"
                );
            }
        }
        "fixedk2" => {
            use nalgebra::{DMatrix, DVector};
            let c = 0.95 / 1.1683856652847173;
            let params = grnssm::ModelParams::new(
                DMatrix::from_row_slice(2, 2, &[0.8 * c, 0.0, 0.0, -0.6 * c]),
                DMatrix::from_row_slice(2, 2, &[0.2 * c, -0.1 * c, 0.1 * c, 0.2 * c]),
                DMatrix::from_row_slice(2, 2, &[1.2, 0.9, 0.9, -1.2]),
                DMatrix::from_row_slice(2, 2, &[0.4 * c, 0.1 * c, -0.1 * c, 0.4 * c]),
                0.02,
                DVector::from_element(2, 1.0),
            )
            .unwrap();
            let mut m = DMatrix::zeros(4, 4);
            m.view_mut((0, 0), (2, 2)).copy_from(params.f());
            m.view_mut((0, 2), (2, 2)).copy_from(params.a());
            m.view_mut((2, 0), (2, 2)).copy_from(&(params.z() * params.f()));
            m.view_mut((2, 2), (2, 2)).copy_from(&(params.z() * params.a() + params.b()));
            let rho = m.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0f64, f64::max);
            println!("companion spectral radius: {rho:.4}");
            for &(n_r, max_iter) in &[(50usize, 2000usize), (100, 2000), (50, 3000), (100, 3000)] {
                let mut hits = 0;
                let mut choices = Vec::new();
                let mut unconverged = 0usize;
                for seed in 0..10u64 {
                    let (ds, _) = generate(&params, 10, n_r, seed).unwrap();
                    let report = select_k(
                        &ds,
                        &[0, 1, 2, 3, 4],
                        &FitConfig { seed, max_iter, tol: 1e-6 },
                    )
                    .unwrap();
                    choices.push(report.chosen_k);
                    unconverged += report.entries.iter().filter(|e| !e.converged).count();
                    if report.chosen_k == 2 {
                        hits += 1;
                    }
                }
                println!(
                    "fixed params n_r={n_r} max_iter={max_iter}: k=2 chosen {hits}/10, unconverged={unconverged}, choices={choices:?}"
                );
            }
        }
        other => eprintln!("unknown mode {other}"),
    }
}
