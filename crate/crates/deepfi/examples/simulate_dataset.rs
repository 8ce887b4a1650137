//! Generate a synthetic living-room dataset and write it in the standard
//! CSV format, with a scenario.meta file describing every knob.
//!
//! ```sh
//! cargo run --example simulate_dataset
//! ```

use deepfi::datastore;
use deepfi::locator::LocationRecord;
use deepfi::simulator::{self, Layout, SimScenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = SimScenario::living_room(42);
    // Desk-scale packet counts; the presets default to 500/100.
    let per_train = 50;
    let per_test = 30;
    let data = simulator::generate_with_counts(&scenario, Layout::LivingRoom, per_train, per_test)?;

    println!(
        "living room {}x{} m, {} training and {} test points",
        scenario.room_w_m,
        scenario.room_h_m,
        data.train_points.len(),
        data.test_points.len()
    );
    let p = &data.train_points[0];
    println!(
        "first training point ({}, {}): {} packets, rss {:.1} dBm, amplitude[0..5] = {:?}",
        p.xy.0,
        p.xy.1,
        p.packets.len(),
        p.packets[0].rss.unwrap(),
        p.packets[0].amplitudes()[..5]
            .iter()
            .map(|a| (a * 100.0).round() / 100.0)
            .collect::<Vec<_>>()
    );

    let out = std::env::temp_dir().join("deepfi_example_dataset");
    std::fs::create_dir_all(&out)?;
    let to_records = |points: &[simulator::LabeledPoint]| -> Vec<LocationRecord> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| LocationRecord {
                id: i.to_string(),
                xy: p.xy,
                packets: p.packets.clone(),
            })
            .collect()
    };
    datastore::write_dataset(&to_records(&data.train_points), &out.join("train.csv"))?;
    datastore::write_dataset(&to_records(&data.test_points), &out.join("test.csv"))?;
    datastore::write_scenario_meta(
        &scenario,
        "living_room",
        (
            data.train_points.len(),
            data.test_points.len(),
            per_train,
            per_test,
        ),
        &out.join("scenario.meta"),
    )?;
    println!("wrote train.csv / test.csv / scenario.meta under {}", out.display());
    Ok(())
}
