//! Compare localization with all 90 CSI values (three antennas) against the
//! three 30-value single-antenna variants, on a reduced laboratory scenario.
//!
//! ```sh
//! cargo run --release --example antenna_diversity
//! ```

use deepfi::analysis::mean_sum_error;
use deepfi::csi::AntennaSelection;
use deepfi::deepnet::{NetShape, TrainConfig};
use deepfi::locator::{build_database, estimate, BatchConfig, DbFlags, LocationRecord};
use deepfi::simulator::{self, Layout, SimScenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut scenario = SimScenario::laboratory(11);
    scenario.noise_std = 0.08;
    // Reduced packet budget so the four trainings stay quick.
    let data = simulator::generate_with_counts(&scenario, Layout::Laboratory, 60, 60)?;
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
        seed: 5,
        ..TrainConfig::default()
    };
    let variants = [
        ("all antennas (90)", AntennaSelection::All),
        ("antenna 0 (30)", AntennaSelection::Single(0)),
        ("antenna 1 (30)", AntennaSelection::Single(1)),
        ("antenna 2 (30)", AntennaSelection::Single(2)),
    ];

    println!("variant,mean_error_m");
    for (name, selection) in variants {
        let shape = NetShape::with_input(selection.dim(), 40, 25, 12, 6)?;
        let db = build_database(
            &records,
            &shape,
            &cfg,
            scenario.grid_m,
            DbFlags::default(),
            selection,
        )?;
        let batch = BatchConfig::default();
        let mut estimates = Vec::new();
        let mut truths = Vec::new();
        for point in &data.test_points {
            estimates.push(estimate(&db, &point.packets, &batch)?.xy);
            truths.push(point.xy);
        }
        println!("{name},{:.4}", mean_sum_error(&estimates, &truths)?);
    }
    Ok(())
}
