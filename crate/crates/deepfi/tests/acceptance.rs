//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `cargo test -- --nocapture`).
//!
//! Oracles are independent of the code under test: exact RBM gradients come
//! from brute-force state enumeration, backprop gradients are checked
//! against central finite differences, and the geometry checks compute
//! their own convex hulls.

use std::time::Instant;

use ndarray::Array1;

use deepfi::analysis::{self, count_clusters, CLUSTER_TOLERANCE};
use deepfi::baselines::{self, BaselineDb};
use deepfi::csi::{self, AntennaSelection, CsiPacket, NormalizedCsi, CSI_DIM};
use deepfi::datastore;
use deepfi::deepnet::{
    self, fine_tune, mean_reconstruction_error, pretrain, reconstruction_error,
    reconstruction_gradient, unroll, NetShape, TrainConfig,
};
use deepfi::locator::{
    build_database, estimate, location_likelihood, posterior, BatchConfig, DbFlags,
    FingerprintDatabase, LocationRecord,
};
use deepfi::rbm::Rbm;
use deepfi::rng::{mix_seed, RngStream};
use deepfi::simulator::{self, Layout, SimScenario};

fn report(criterion: usize, name: &str, ok: bool, detail: &str) {
    let status = if ok { "PASS" } else { "FAIL" };
    println!("[acceptance] criterion {criterion:2} ({name}): {status} — {detail}");
}

// ---------------------------------------------------------------------------
// Criterion 1: expected CD-1 update direction vs exact log-likelihood
// gradient from 32-state enumeration, 10 parameter draws, < 10 s.
// ---------------------------------------------------------------------------

// Exact gradient of log Pr(v) for a 3x2 machine by enumerating every state.
fn exact_gradient(rbm: &Rbm, v: &Array1<f64>) -> Vec<f64> {
    let (nv, nh) = (rbm.n_visible(), rbm.n_hidden());
    let states = |n: usize| -> Vec<Array1<f64>> {
        (0u32..(1 << n))
            .map(|bits| Array1::from_shape_fn(n, |i| ((bits >> i) & 1) as f64))
            .collect()
    };
    let hidden_states = states(nh);
    let visible_states = states(nv);

    // Conditional expectations under Pr(h | v).
    let weights: Vec<f64> = hidden_states
        .iter()
        .map(|h| (-rbm.energy(v, h)).exp())
        .collect();
    let z_v: f64 = weights.iter().sum();
    let mut data_w = vec![0.0; nv * nh];
    let mut data_bv = vec![0.0; nv];
    let mut data_bh = vec![0.0; nh];
    for (h, w) in hidden_states.iter().zip(&weights) {
        let p = w / z_v;
        for i in 0..nv {
            for j in 0..nh {
                data_w[i * nh + j] += p * v[i] * h[j];
            }
        }
        for (i, slot) in data_bv.iter_mut().enumerate() {
            *slot += p * v[i];
        }
        for (j, slot) in data_bh.iter_mut().enumerate() {
            *slot += p * h[j];
        }
    }

    // Model expectations under the joint Pr(v, h).
    let mut z = 0.0;
    let mut model_w = vec![0.0; nv * nh];
    let mut model_bv = vec![0.0; nv];
    let mut model_bh = vec![0.0; nh];
    for vv in &visible_states {
        for h in &hidden_states {
            let w = (-rbm.energy(vv, h)).exp();
            z += w;
            for i in 0..nv {
                for j in 0..nh {
                    model_w[i * nh + j] += w * vv[i] * h[j];
                }
            }
            for (i, slot) in model_bv.iter_mut().enumerate() {
                *slot += w * vv[i];
            }
            for (j, slot) in model_bh.iter_mut().enumerate() {
                *slot += w * h[j];
            }
        }
    }
    for x in model_w
        .iter_mut()
        .chain(model_bv.iter_mut())
        .chain(model_bh.iter_mut())
    {
        *x /= z;
    }

    let mut grad = Vec::with_capacity(nv * nh + nv + nh);
    for k in 0..nv * nh {
        grad.push(data_w[k] - model_w[k]);
    }
    for i in 0..nv {
        grad.push(data_bv[i] - model_bv[i]);
    }
    for j in 0..nh {
        grad.push(data_bh[j] - model_bh[j]);
    }
    grad
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn criterion_01_cd1_update_follows_exact_gradient() {
    let start = Instant::now();
    let mut setup_rng = RngStream::seeded(0xC0DE);
    let mut worst: f64 = 1.0;
    let mut failures = Vec::new();

    for draw in 0..10 {
        let mut rbm = Rbm::zeros(3, 2);
        rbm.w.mapv_inplace(|_| 0.5 * setup_rng.standard_normal());
        rbm.b_vis.mapv_inplace(|_| 0.3 * setup_rng.standard_normal());
        rbm.b_hid.mapv_inplace(|_| 0.3 * setup_rng.standard_normal());
        let v = Array1::from_shape_fn(3, |_| if setup_rng.uniform() < 0.5 { 0.0 } else { 1.0 });

        let alpha = 0.05;
        let samples = 1000;
        let mut avg = vec![0.0; 3 * 2 + 3 + 2];
        let mut rng = RngStream::seeded(mix_seed(0xFEED, draw));
        for _ in 0..samples {
            let updated = rbm.cd1_update(&v, alpha, &mut rng).unwrap();
            let mut k = 0;
            for i in 0..3 {
                for j in 0..2 {
                    avg[k] += (updated.w[[i, j]] - rbm.w[[i, j]]) / alpha;
                    k += 1;
                }
            }
            for i in 0..3 {
                avg[k] += (updated.b_vis[i] - rbm.b_vis[i]) / alpha;
                k += 1;
            }
            for j in 0..2 {
                avg[k] += (updated.b_hid[j] - rbm.b_hid[j]) / alpha;
                k += 1;
            }
        }
        for x in &mut avg {
            *x /= samples as f64;
        }

        let grad = exact_gradient(&rbm, &v);
        let cos = cosine(&avg, &grad);
        worst = worst.min(cos);
        if cos <= 0.0 {
            failures.push(format!("draw {draw}: cosine {cos:.4}"));
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    let ok = failures.is_empty() && elapsed < 10.0;
    report(
        1,
        "CD-1 vs exact gradient",
        ok,
        &format!("worst cosine {worst:.4} over 10 draws, {elapsed:.2}s"),
    );
    assert!(failures.is_empty(), "{failures:?}");
    assert!(elapsed < 10.0, "took {elapsed:.2}s");
}

// ---------------------------------------------------------------------------
// Criterion 2: backprop gradients match central finite differences on a
// 6 -> 4 -> 3 -> 2 -> 1 net, h = 1e-5, relative error 1e-4, < 5 s.
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_finetune_gradient_check() {
    let start = Instant::now();
    let shape = NetShape::with_input(6, 4, 3, 2, 1).unwrap();
    let cfg = TrainConfig {
        pretrain_epochs: 3,
        seed: 21,
        ..TrainConfig::default()
    };
    let mut rng = RngStream::seeded(77);
    let v = NormalizedCsi::new((0..6).map(|_| 0.1 + 0.8 * rng.uniform()).collect()).unwrap();
    let inputs = vec![v.clone()];
    let model = unroll(
        &pretrain(&inputs, &shape, &cfg).unwrap(),
        csi::NormalizationParams::new(0.0, 1.0).unwrap(),
        (0.0, 0.0),
    )
    .unwrap();

    let grad = reconstruction_gradient(&model, &v).unwrap();
    let h = 1e-5;
    let mut checked = 0usize;
    let mut max_rel: f64 = 0.0;
    let mut failures = Vec::new();

    for layer in 0..8 {
        let (rows, cols) = (grad.w[layer].nrows(), grad.w[layer].ncols());
        for i in 0..rows {
            for j in 0..cols {
                let mut plus = model.clone();
                plus.layer_mut(layer).0[[i, j]] += h;
                let mut minus = model.clone();
                minus.layer_mut(layer).0[[i, j]] -= h;
                let numeric = (reconstruction_error(&plus, &v).unwrap()
                    - reconstruction_error(&minus, &v).unwrap())
                    / (2.0 * h);
                let analytic = grad.w[layer][[i, j]];
                let rel = (analytic - numeric).abs()
                    / analytic.abs().max(numeric.abs()).max(1e-6);
                max_rel = max_rel.max(rel);
                if rel >= 1e-4 {
                    failures.push(format!("w[{layer}][{i},{j}] rel {rel:.2e}"));
                }
                checked += 1;
            }
        }
        for j in 0..grad.b[layer].len() {
            let mut plus = model.clone();
            plus.layer_mut(layer).1[j] += h;
            let mut minus = model.clone();
            minus.layer_mut(layer).1[j] -= h;
            let numeric = (reconstruction_error(&plus, &v).unwrap()
                - reconstruction_error(&minus, &v).unwrap())
                / (2.0 * h);
            let analytic = grad.b[layer][j];
            let rel =
                (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            max_rel = max_rel.max(rel);
            if rel >= 1e-4 {
                failures.push(format!("b[{layer}][{j}] rel {rel:.2e}"));
            }
            checked += 1;
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    let ok = failures.is_empty() && elapsed < 5.0;
    report(
        2,
        "gradient vs finite differences",
        ok,
        &format!("{checked} parameters, max rel err {max_rel:.2e}, {elapsed:.2}s"),
    );
    assert!(failures.is_empty(), "{failures:?}");
    assert!(elapsed < 5.0, "took {elapsed:.2}s");
}

// ---------------------------------------------------------------------------
// Criterion 3: fine-tuning never raises mean training reconstruction error
// on 20 random seeded fixtures (tolerance 1e-9, retry policy honored).
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_finetune_monotonicity() {
    let mut failures = Vec::new();
    for seed in 0..20u64 {
        let mut rng = RngStream::seeded(1000 + seed);
        let shape = NetShape::with_input(6, 5, 4, 3, 2).unwrap();
        let n_packets = 3 + (seed as usize % 6);
        let inputs: Vec<NormalizedCsi> = (0..n_packets)
            .map(|_| {
                NormalizedCsi::new((0..6).map(|_| 0.05 + 0.9 * rng.uniform()).collect()).unwrap()
            })
            .collect();
        // Mixed step sizes, including ones large enough to trip the retry
        // policy now and then.
        let lr = [0.005, 0.05, 0.3, 1.0, 3.0][seed as usize % 5];
        let cfg = TrainConfig {
            pretrain_epochs: 3,
            finetune_epochs: 15,
            finetune_lr: lr,
            seed,
            ..TrainConfig::default()
        };
        let model = unroll(
            &pretrain(&inputs, &shape, &cfg).unwrap(),
            csi::NormalizationParams::new(0.0, 1.0).unwrap(),
            (0.0, 0.0),
        )
        .unwrap();
        let before = mean_reconstruction_error(&model, &inputs).unwrap();
        match fine_tune(&model, &inputs, &cfg) {
            Ok(tuned) => {
                let after = mean_reconstruction_error(&tuned, &inputs).unwrap();
                if after > before + 1e-9 {
                    failures.push(format!("seed {seed} lr {lr}: {before} -> {after}"));
                }
            }
            Err(e) => failures.push(format!("seed {seed} lr {lr}: {e}")),
        }
    }
    report(
        3,
        "fine-tune monotonicity",
        failures.is_empty(),
        &format!("20 fixtures, {} violations", failures.len()),
    );
    assert!(failures.is_empty(), "{failures:?}");
}

// ---------------------------------------------------------------------------
// Criterion 4: locator invariants over 500 randomized estimates.
// ---------------------------------------------------------------------------

// Convex hull (monotone chain) and containment with tolerance; independent
// of the locator's arithmetic.
fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn inside_hull(hull: &[(f64, f64)], p: (f64, f64), tol: f64) -> bool {
    if hull.len() < 3 {
        // Degenerate hull: accept points within tol of the segment/point.
        return match hull {
            [a] => ((p.0 - a.0).powi(2) + (p.1 - a.1).powi(2)).sqrt() <= tol,
            [a, b] => {
                let (dx, dy) = (b.0 - a.0, b.1 - a.1);
                let len2 = dx * dx + dy * dy;
                let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
                let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
                ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt() <= tol
            }
            _ => false,
        };
    }
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        if cross < -tol {
            return false;
        }
    }
    true
}

fn random_model(rng: &mut RngStream, location: (f64, f64)) -> deepnet::FingerprintModel {
    let shape = NetShape::new(8, 6, 4, 2).unwrap();
    let inputs: Vec<NormalizedCsi> = (0..3)
        .map(|_| {
            NormalizedCsi::new((0..CSI_DIM).map(|_| 0.1 + 0.8 * rng.uniform()).collect()).unwrap()
        })
        .collect();
    let cfg = TrainConfig {
        pretrain_epochs: 1,
        seed: (rng.uniform() * 1e9) as u64,
        ..TrainConfig::default()
    };
    let lo = 1.0 + 4.0 * rng.uniform();
    let hi = lo + 1.0 + 6.0 * rng.uniform();
    unroll(
        &pretrain(&inputs, &shape, &cfg).unwrap(),
        csi::NormalizationParams::new(lo, hi).unwrap(),
        location,
    )
    .unwrap()
}

#[test]
fn criterion_04_locator_invariants() {
    let mut rng = RngStream::seeded(0xACCE55);
    let mut failures = Vec::new();
    let runs = 500;

    for run in 0..runs {
        let n_models = 3 + (run % 4);
        let mut locations = Vec::new();
        while locations.len() < n_models {
            let xy = (8.0 * rng.uniform(), 8.0 * rng.uniform());
            if !locations.contains(&xy) {
                locations.push(xy);
            }
        }
        let models: Vec<_> = locations
            .iter()
            .map(|&xy| random_model(&mut rng, xy))
            .collect();
        let db = FingerprintDatabase::new(models, 0.5).unwrap();

        let n_packets = 2 + (run % 5);
        let packets: Vec<CsiPacket> = (0..n_packets)
            .map(|_| {
                CsiPacket::new(
                    (0..CSI_DIM).map(|_| 1.0 + 9.0 * rng.uniform()).collect(),
                    None,
                    None,
                )
                .unwrap()
            })
            .collect();

        let est = estimate(&db, &packets, &BatchConfig::default()).unwrap();

        let sum: f64 = est.posterior.iter().sum();
        if (sum - 1.0).abs() >= 1e-9 {
            failures.push(format!("run {run}: posterior sum {sum}"));
        }
        let hull = convex_hull(&db.locations());
        if !inside_hull(&hull, est.xy, 1e-9) {
            failures.push(format!("run {run}: estimate {:?} outside hull", est.xy));
        }

        // Batch-size invariance of the likelihood on the first model.
        let model = &db.entries()[0];
        let normalized: Vec<NormalizedCsi> = packets
            .iter()
            .map(|p| csi::normalize(p, &model.norm))
            .collect();
        let stats = csi::dispersion(&normalized).unwrap();
        let reference = location_likelihood(
            model,
            &normalized,
            &stats,
            &BatchConfig {
                batch_size: normalized.len(),
                ..BatchConfig::default()
            },
        )
        .unwrap();
        for b in [1usize, 3, 100] {
            let lik = location_likelihood(
                model,
                &normalized,
                &stats,
                &BatchConfig {
                    batch_size: b,
                    ..BatchConfig::default()
                },
            )
            .unwrap();
            if (lik - reference).abs() >= 1e-12 {
                failures.push(format!("run {run}: batch {b} likelihood drift"));
            }
        }

        // Positive-scaling invariance of the posterior.
        let c = 10f64.powf(rng.uniform() * 8.0 - 4.0);
        let scaled: Vec<f64> = est.likelihoods.iter().map(|l| l * c).collect();
        let p1 = posterior(&est.likelihoods).unwrap().probs;
        let p2 = posterior(&scaled).unwrap().probs;
        for (a, b) in p1.iter().zip(&p2) {
            if (a - b).abs() >= 1e-12 {
                failures.push(format!("run {run}: scaling changed posterior"));
                break;
            }
        }
    }

    report(
        4,
        "locator invariants",
        failures.is_empty(),
        &format!("{runs} randomized estimates, {} violations", failures.len()),
    );
    assert!(failures.is_empty(), "{failures:?}");
}

// ---------------------------------------------------------------------------
// Criterion 5: end-to-end synthetic living room — the deep-autoencoder
// method beats the averaged-CSI, probabilistic-RSS and max-likelihood
// baselines on the same dataset. Reduced scale, < 10 min.
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_living_room_method_ordering() {
    let start = Instant::now();
    let mut scenario = SimScenario::living_room(42);
    scenario.noise_std = 0.08;
    let data =
        simulator::generate_with_counts(&scenario, Layout::LivingRoom, 100, 100).unwrap();

    let records: Vec<LocationRecord> = data
        .train_points
        .iter()
        .enumerate()
        .map(|(i, p)| LocationRecord {
            id: i.to_string(),
            xy: p.xy,
            packets: p.packets.clone(),
        })
        .collect();
    let shape = NetShape::new(60, 40, 20, 10).unwrap();
    let cfg = TrainConfig {
        pretrain_epochs: 20,
        finetune_epochs: 30,
        seed: 42 ^ 0xabc,
        ..TrainConfig::default()
    };
    let db = build_database(
        &records,
        &shape,
        &cfg,
        scenario.grid_m,
        DbFlags::default(),
        AntennaSelection::All,
    )
    .unwrap();

    let training: Vec<((f64, f64), Vec<CsiPacket>)> = data
        .train_points
        .iter()
        .map(|p| (p.xy, p.packets.clone()))
        .collect();
    let bdb = BaselineDb::build(&training).unwrap();
    let batch = BatchConfig::default();

    let mut truths = Vec::new();
    let mut est_deepfi = Vec::new();
    let mut est_fifs = Vec::new();
    let mut est_horus = Vec::new();
    let mut est_ml = Vec::new();
    for point in &data.test_points {
        let packets = &point.packets[..100.min(point.packets.len())];
        truths.push(point.xy);
        est_deepfi.push(estimate(&db, packets, &batch).unwrap().xy);
        est_fifs.push(baselines::fifs_estimate(&bdb, packets).unwrap().xy);
        est_horus.push(baselines::horus_estimate(&bdb, packets).unwrap().xy);
        est_ml.push(baselines::ml_estimate(&bdb, packets).unwrap().xy);
    }

    let e_deepfi = analysis::mean_sum_error(&est_deepfi, &truths).unwrap();
    let e_fifs = analysis::mean_sum_error(&est_fifs, &truths).unwrap();
    let e_horus = analysis::mean_sum_error(&est_horus, &truths).unwrap();
    let e_ml = analysis::mean_sum_error(&est_ml, &truths).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let ok = e_deepfi < e_fifs && e_deepfi < e_horus && e_deepfi < e_ml && elapsed < 600.0;
    report(
        5,
        "living-room method ordering",
        ok,
        &format!(
            "deepfi {e_deepfi:.3} m vs fifs {e_fifs:.3}, horus {e_horus:.3}, ml {e_ml:.3}; {elapsed:.0}s"
        ),
    );
    assert!(
        e_deepfi < e_fifs && e_deepfi < e_horus && e_deepfi < e_ml,
        "deepfi {e_deepfi} fifs {e_fifs} horus {e_horus} ml {e_ml}"
    );
    assert!(elapsed < 600.0, "took {elapsed:.0}s");
}

// ---------------------------------------------------------------------------
// Criterion 6: 90-value inputs beat each 30-value single-antenna variant on
// the laboratory scenario for a majority of 5 seeds.
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_antenna_diversity_trend() {
    let mut wins = 0usize;
    let mut details = Vec::new();
    for seed in 905..910u64 {
        let mut scenario = SimScenario::laboratory(seed);
        scenario.noise_std = 0.08;
        let data =
            simulator::generate_with_counts(&scenario, Layout::Laboratory, 50, 50).unwrap();
        let records: Vec<LocationRecord> = data
            .train_points
            .iter()
            .enumerate()
            .map(|(i, p)| LocationRecord {
                id: i.to_string(),
                xy: p.xy,
                packets: p.packets.clone(),
            })
            .collect();
        let cfg = TrainConfig {
            pretrain_epochs: 10,
            finetune_epochs: 20,
            seed: 3000 + seed,
            ..TrainConfig::default()
        };

        let mut errors = Vec::new();
        for selection in [
            AntennaSelection::All,
            AntennaSelection::Single(0),
            AntennaSelection::Single(1),
            AntennaSelection::Single(2),
        ] {
            let shape = NetShape::with_input(selection.dim(), 40, 25, 12, 6).unwrap();
            let db = build_database(
                &records,
                &shape,
                &cfg,
                scenario.grid_m,
                DbFlags::default(),
                selection,
            )
            .unwrap();
            let batch = BatchConfig::default();
            let mut estimates = Vec::new();
            let mut truths = Vec::new();
            for point in &data.test_points {
                estimates.push(estimate(&db, &point.packets, &batch).unwrap().xy);
                truths.push(point.xy);
            }
            errors.push(analysis::mean_sum_error(&estimates, &truths).unwrap());
        }
        let all_better = errors[1..].iter().all(|&single| errors[0] <= single);
        if all_better {
            wins += 1;
        }
        details.push(format!(
            "seed {seed}: 90 -> {:.3}, singles -> {:.3}/{:.3}/{:.3}{}",
            errors[0],
            errors[1],
            errors[2],
            errors[3],
            if all_better { " ok" } else { "" }
        ));
    }
    let ok = wins >= 3;
    report(
        6,
        "antenna diversity trend",
        ok,
        &format!("90-value variant best in {wins}/5 seeds"),
    );
    assert!(ok, "{details:?}");
}

// ---------------------------------------------------------------------------
// Criterion 7: more test packets do not hurt — 300-packet error stays within
// 0.05 m of the 5-packet error (or better) averaged over 10 seeded trials.
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_test_packet_trend() {
    let mut scenario = SimScenario::living_room(511);
    scenario.noise_std = 0.08;
    let data = simulator::generate_with_counts(&scenario, Layout::LivingRoom, 80, 1).unwrap();
    let records: Vec<LocationRecord> = data
        .train_points
        .iter()
        .enumerate()
        .map(|(i, p)| LocationRecord {
            id: i.to_string(),
            xy: p.xy,
            packets: p.packets.clone(),
        })
        .collect();
    let shape = NetShape::new(40, 25, 12, 6).unwrap();
    let cfg = TrainConfig {
        pretrain_epochs: 10,
        finetune_epochs: 20,
        seed: 600,
        ..TrainConfig::default()
    };
    let db = build_database(
        &records,
        &shape,
        &cfg,
        scenario.grid_m,
        DbFlags::default(),
        AntennaSelection::All,
    )
    .unwrap();
    let batch = BatchConfig::default();
    let (_, test_xy) = simulator::layout_points(&scenario, Layout::LivingRoom).unwrap();

    let mut mean5 = 0.0;
    let mut mean300 = 0.0;
    for trial in 0..10u64 {
        let mut est5 = Vec::new();
        let mut est300 = Vec::new();
        let mut truths = Vec::new();
        for (pi, &xy) in test_xy.iter().enumerate() {
            // Fresh test session per trial.
            let mut rng = RngStream::seeded(mix_seed(777 + trial, pi as u64));
            let packets = simulator::emit_session(&scenario, xy, 300, &mut rng).unwrap();
            truths.push(xy);
            est5.push(estimate(&db, &packets[..5], &batch).unwrap().xy);
            est300.push(estimate(&db, &packets, &batch).unwrap().xy);
        }
        mean5 += analysis::mean_sum_error(&est5, &truths).unwrap();
        mean300 += analysis::mean_sum_error(&est300, &truths).unwrap();
    }
    mean5 /= 10.0;
    mean300 /= 10.0;

    let ok = mean300 <= mean5 + 0.05;
    report(
        7,
        "test-packet trend",
        ok,
        &format!("mean error: 5 packets {mean5:.3} m, 300 packets {mean300:.3} m"),
    );
    assert!(ok, "300-packet error {mean300} vs 5-packet {mean5}");
}

// ---------------------------------------------------------------------------
// Criterion 8: simulator calibration — stability, cluster counts,
// correlation decay.
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_simulator_calibration() {
    // Stability at the default noise level (0.05): at least 90% of the
    // per-dimension std/mean ratios across 50 locations stay below 0.10.
    let scenario = SimScenario::living_room(42);
    assert_eq!(scenario.noise_std, 0.05);
    let (train_xy, test_xy) = simulator::layout_points(&scenario, Layout::LivingRoom).unwrap();
    let all_xy: Vec<(f64, f64)> = train_xy.iter().chain(test_xy.iter()).copied().collect();

    let per_location: Vec<Vec<CsiPacket>> = all_xy
        .iter()
        .enumerate()
        .map(|(i, &xy)| {
            let mut rng = RngStream::seeded(mix_seed(0x57AB, i as u64));
            simulator::emit_session(&scenario, xy, 50, &mut rng).unwrap()
        })
        .collect();
    let ratios = analysis::stability_ratios(&per_location);
    let below = ratios.iter().filter(|&&r| r < 0.10).count();
    let frac = below as f64 / ratios.len() as f64;
    let stability_ok = frac >= 0.90;

    // Cluster counts measured with the gap method: mode in {2, 3} over the
    // 50 locations.
    let mut histogram = std::collections::HashMap::new();
    for &xy in &all_xy {
        let response = simulator::channel_response(&scenario, xy, 0).unwrap();
        *histogram
            .entry(count_clusters(&response, CLUSTER_TOLERANCE))
            .or_insert(0usize) += 1;
    }
    let mode = *histogram
        .iter()
        .max_by_key(|(_, &c)| c)
        .map(|(k, _)| k)
        .unwrap();
    let cluster_ok = mode == 2 || mode == 3;

    // Correlation strictly decreasing across the four separations.
    let curve = simulator::correlation_by_distance(&scenario, &[0.15, 0.30, 0.60, 1.20], 120, 5)
        .unwrap();
    let corr_ok = curve.windows(2).all(|w| w[0].1 > w[1].1);

    let ok = stability_ok && cluster_ok && corr_ok;
    report(
        8,
        "simulator calibration",
        ok,
        &format!(
            "stability {:.1}% < 0.10; cluster mode {mode}; corr {:?}",
            frac * 100.0,
            curve
                .iter()
                .map(|(d, c)| format!("{d}:{c:.2}"))
                .collect::<Vec<_>>()
        ),
    );
    assert!(stability_ok, "only {frac:.3} of ratios below 0.10");
    assert!(cluster_ok, "cluster mode {mode}, histogram {histogram:?}");
    assert!(corr_ok, "correlation not strictly decreasing: {curve:?}");
}

// ---------------------------------------------------------------------------
// Criterion 9: persistence — bitwise round-trip of a trained living-room
// database; corrupted header rejected.
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_persistence_round_trip() {
    let scenario = SimScenario::living_room(31);
    let data = simulator::generate_with_counts(&scenario, Layout::LivingRoom, 20, 1).unwrap();
    let records: Vec<LocationRecord> = data
        .train_points
        .iter()
        .enumerate()
        .map(|(i, p)| LocationRecord {
            id: i.to_string(),
            xy: p.xy,
            packets: p.packets.clone(),
        })
        .collect();
    let shape = NetShape::new(24, 16, 8, 4).unwrap();
    let cfg = TrainConfig {
        pretrain_epochs: 2,
        finetune_epochs: 2,
        seed: 9,
        ..TrainConfig::default()
    };
    let db = build_database(
        &records,
        &shape,
        &cfg,
        scenario.grid_m,
        DbFlags::default(),
        AntennaSelection::All,
    )
    .unwrap();
    assert_eq!(db.len(), 38);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("living_room.db");
    datastore::save_db(&db, &path).unwrap();
    let loaded = datastore::load_db(&path).unwrap();

    let mut bit_identical = loaded == db;
    for (a, b) in db.entries().iter().zip(loaded.entries()) {
        for (wa, wb) in a
            .enc_w
            .iter()
            .chain(a.dec_w.iter())
            .zip(b.enc_w.iter().chain(b.dec_w.iter()))
        {
            for (x, y) in wa.iter().zip(wb.iter()) {
                bit_identical &= x.to_bits() == y.to_bits();
            }
        }
    }

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[3] ^= 0xFF;
    let bad_path = dir.path().join("corrupt.db");
    std::fs::write(&bad_path, &bytes).unwrap();
    let rejects_corruption = matches!(
        datastore::load_db(&bad_path),
        Err(datastore::DatastoreError::BadMagic)
    );

    let ok = bit_identical && rejects_corruption;
    report(
        9,
        "persistence round-trip",
        ok,
        &format!(
            "38-location db bitwise round-trip: {bit_identical}; corrupt magic rejected: {rejects_corruption}"
        ),
    );
    assert!(bit_identical);
    assert!(rejects_corruption);
}

// ---------------------------------------------------------------------------
// Criterion 10: determinism — two identically-seeded pipeline runs produce
// byte-identical database files and estimate reports.
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_pipeline_determinism() {
    use deepfi::cli::{self, LocalizeArgs, MethodArg, SimulateArgs, TrainArgs};

    let run_pipeline = |dir: &std::path::Path| -> (Vec<u8>, String) {
        cli::cmd_simulate(&SimulateArgs {
            layout: cli::LayoutArg::LivingRoom,
            seed: 77,
            out: dir.to_path_buf(),
            noise_std: None,
            grid_m: None,
            packets_per_train: Some(20),
            packets_per_test: Some(10),
        })
        .unwrap();
        let db_path = dir.join("fp.db");
        cli::cmd_train(&TrainArgs {
            dataset: dir.join("train.csv"),
            shape: "24,16,8,4".into(),
            alpha: 0.01,
            pretrain_epochs: 2,
            finetune_epochs: 2,
            finetune_lr: 0.005,
            seed: 5,
            out: db_path.clone(),
            grid_m: 0.5,
            cd_sampling: cli::CdSamplingArg::Probabilities,
            distance: cli::DistanceArg::L1,
            sigma_mode: cli::SigmaModeArg::Std,
            no_bias_forward: false,
        })
        .unwrap();
        let report = cli::cmd_localize(&LocalizeArgs {
            db: Some(db_path.clone()),
            packets: dir.join("test.csv"),
            batch_size: 10,
            n_test_packets: 10,
            method: MethodArg::Deepfi,
            train_dataset: None,
            k: 3,
        })
        .unwrap();
        (std::fs::read(&db_path).unwrap(), report)
    };

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let (db_a, report_a) = run_pipeline(dir_a.path());
    let (db_b, report_b) = run_pipeline(dir_b.path());

    let db_identical = db_a == db_b;
    let report_identical = report_a == report_b;
    let csv_identical = std::fs::read(dir_a.path().join("train.csv")).unwrap()
        == std::fs::read(dir_b.path().join("train.csv")).unwrap();

    let ok = db_identical && report_identical && csv_identical;
    report(
        10,
        "pipeline determinism",
        ok,
        &format!(
            "db bytes identical: {db_identical}; report identical: {report_identical}; dataset identical: {csv_identical}"
        ),
    );
    assert!(db_identical);
    assert!(report_identical);
    assert!(csv_identical);
}
