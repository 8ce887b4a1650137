//! Train one per-location deep autoencoder end to end — normalization,
//! layer-wise CD-1 pretraining, unrolling, fine-tuning — then persist the
//! database and reload it bit-exactly.
//!
//! ```sh
//! cargo run --example train_fingerprints
//! ```

use deepfi::csi;
use deepfi::datastore;
use deepfi::deepnet::{self, NetShape, TrainConfig};
use deepfi::locator::{build_database, DbFlags, LocationRecord};
use deepfi::csi::AntennaSelection;
use deepfi::simulator::{self, Layout, SimScenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = SimScenario::living_room(7);
    let data = simulator::generate_with_counts(&scenario, Layout::LivingRoom, 60, 10)?;

    // Walk the stages explicitly for the first location.
    let point = &data.train_points[0];
    let shape = NetShape::new(24, 16, 8, 4)?;
    let cfg = TrainConfig {
        pretrain_epochs: 10,
        finetune_epochs: 20,
        seed: 1,
        ..TrainConfig::default()
    };
    let norm = csi::fit_normalization(&point.packets)?;
    let inputs: Vec<_> = point
        .packets
        .iter()
        .map(|p| csi::normalize(p, &norm))
        .collect();
    println!(
        "location ({}, {}): normalization range [{:.2}, {:.2}]",
        point.xy.0, point.xy.1, norm.min_amp, norm.max_amp
    );

    let rbms = deepnet::pretrain(&inputs, &shape, &cfg)?;
    let model = deepnet::unroll(&rbms, norm, point.xy)?;
    let before = deepnet::mean_reconstruction_error(&model, &inputs)?;
    let tuned = deepnet::fine_tune(&model, &inputs, &cfg)?;
    let after = deepnet::mean_reconstruction_error(&tuned, &inputs)?;
    println!("mean reconstruction error: {before:.5} after pretraining, {after:.5} after fine-tuning");
    println!(
        "decoder weights tied after unroll: {}, after fine-tune: {}",
        model.dec_w[3] == model.enc_w[0].t().to_owned(),
        tuned.dec_w[3] == tuned.enc_w[0].t().to_owned(),
    );

    // Train every location in parallel and persist the database.
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
    let db = build_database(
        &records,
        &shape,
        &cfg,
        scenario.grid_m,
        DbFlags::default(),
        AntennaSelection::All,
    )?;

    let path = std::env::temp_dir().join("deepfi_example_fp.db");
    datastore::save_db(&db, &path)?;
    let loaded = datastore::load_db(&path)?;
    println!(
        "saved {} models ({} bytes) -> reload identical: {}",
        db.len(),
        std::fs::metadata(&path)?.len(),
        loaded == db
    );
    Ok(())
}
