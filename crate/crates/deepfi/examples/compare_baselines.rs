//! Method comparison on one synthetic living-room dataset: deep-autoencoder
//! fingerprinting against averaged-CSI, probabilistic-RSS, maximum-likelihood
//! and KNN baselines.
//!
//! ```sh
//! cargo run --example compare_baselines
//! ```

use deepfi::analysis::mean_sum_error;
use deepfi::baselines::{self, BaselineDb};
use deepfi::csi::{AntennaSelection, CsiPacket};
use deepfi::deepnet::{NetShape, TrainConfig};
use deepfi::locator::{build_database, estimate, BatchConfig, DbFlags, LocationRecord};
use deepfi::simulator::{self, Layout, SimScenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut scenario = SimScenario::living_room(42);
    scenario.noise_std = 0.08;
    eprintln!("generating dataset and training fingerprints ...");
    let data = simulator::generate_with_counts(&scenario, Layout::LivingRoom, 100, 100)?;

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
    )?;

    let training: Vec<((f64, f64), Vec<CsiPacket>)> = data
        .train_points
        .iter()
        .map(|p| (p.xy, p.packets.clone()))
        .collect();
    let bdb = BaselineDb::build(&training)?;
    let batch = BatchConfig::default();

    let mut table: Vec<(&str, Vec<(f64, f64)>)> = vec![
        ("deepfi", vec![]),
        ("fifs", vec![]),
        ("horus", vec![]),
        ("ml", vec![]),
        ("knn", vec![]),
    ];
    let mut truths = Vec::new();
    for point in &data.test_points {
        let packets = &point.packets[..100.min(point.packets.len())];
        truths.push(point.xy);
        table[0].1.push(estimate(&db, packets, &batch)?.xy);
        table[1].1.push(baselines::fifs_estimate(&bdb, packets)?.xy);
        table[2].1.push(baselines::horus_estimate(&bdb, packets)?.xy);
        table[3].1.push(baselines::ml_estimate(&bdb, packets)?.xy);
        table[4].1.push(baselines::knn_estimate(&bdb, packets, 3)?.xy);
    }

    println!("method,mean_error_m");
    for (name, estimates) in &table {
        println!("{name},{:.4}", mean_sum_error(estimates, &truths)?);
    }
    Ok(())
}
