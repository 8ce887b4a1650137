//! Full offline + online loop: simulate, train fingerprints, then estimate
//! every test position by Bayesian fusion of RBF reconstruction likelihoods.
//!
//! ```sh
//! cargo run --example localize
//! ```

use deepfi::analysis;
use deepfi::csi::AntennaSelection;
use deepfi::deepnet::{NetShape, TrainConfig};
use deepfi::locator::{build_database, estimate, BatchConfig, DbFlags, LocationRecord};
use deepfi::simulator::{self, Layout, SimScenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut scenario = SimScenario::living_room(42);
    scenario.noise_std = 0.08;
    let data = simulator::generate_with_counts(&scenario, Layout::LivingRoom, 80, 50)?;

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
    let shape = NetShape::new(60, 40, 20, 10)?;
    let cfg = TrainConfig {
        pretrain_epochs: 10,
        finetune_epochs: 20,
        seed: 3,
        ..TrainConfig::default()
    };
    eprintln!("training {} locations ...", records.len());
    let db = build_database(
        &records,
        &shape,
        &cfg,
        scenario.grid_m,
        DbFlags::default(),
        AntennaSelection::All,
    )?;

    let batch = BatchConfig::default();
    let mut estimates = Vec::new();
    let mut truths = Vec::new();
    println!("true_x,true_y,est_x,est_y,error_m,posterior_peak");
    for point in &data.test_points {
        let est = estimate(&db, &point.packets, &batch)?;
        let err = ((est.xy.0 - point.xy.0).powi(2) + (est.xy.1 - point.xy.1).powi(2)).sqrt();
        let peak = est.posterior.iter().cloned().fold(0.0, f64::max);
        println!(
            "{},{},{:.3},{:.3},{:.3},{:.3}",
            point.xy.0, point.xy.1, est.xy.0, est.xy.1, err, peak
        );
        estimates.push(est.xy);
        truths.push(point.xy);
    }

    let mean = analysis::mean_sum_error(&estimates, &truths)?;
    let errors: Vec<f64> = estimates
        .iter()
        .zip(&truths)
        .map(|(e, t)| ((e.0 - t.0).powi(2) + (e.1 - t.1).powi(2)).sqrt())
        .collect();
    let cdf = analysis::error_cdf(&errors);
    let under_1m = cdf
        .iter()
        .take_while(|(e, _)| *e <= 1.0)
        .last()
        .map(|(_, f)| *f)
        .unwrap_or(0.0);
    eprintln!("mean sum error {mean:.3} m; {:.0}% of test points under 1 m", under_1m * 100.0);
    Ok(())
}
