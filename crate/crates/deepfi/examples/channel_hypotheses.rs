//! Check the three channel statistics the fingerprinting approach rests on,
//! measured on simulated data:
//!
//! 1. CSI amplitudes are stable across packets at a fixed point, RSS less so;
//! 2. subcarrier amplitudes group into a small, location-dependent number of
//!    clusters (mostly two or three);
//! 3. responses decorrelate as the distance between two points grows.
//!
//! ```sh
//! cargo run --example channel_hypotheses
//! ```

use std::collections::BTreeMap;

use deepfi::analysis::{self, count_clusters, CLUSTER_TOLERANCE};
use deepfi::simulator::{self, Layout, SimScenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = SimScenario::living_room(42);
    let data = simulator::generate_with_counts(&scenario, Layout::LivingRoom, 50, 50)?;

    // 1. Stability: per-dimension std/mean ratios over 50 packets per point.
    let per_location: Vec<_> = data.train_points.iter().map(|p| p.packets.clone()).collect();
    let csi_ratios = analysis::stability_ratios(&per_location);
    let below = csi_ratios.iter().filter(|&&r| r < 0.10).count();
    let rss_ratios = analysis::rss_stability_ratios(&per_location);
    let rss_mean = rss_ratios.iter().sum::<f64>() / rss_ratios.len() as f64;
    let csi_mean = csi_ratios.iter().sum::<f64>() / csi_ratios.len() as f64;
    println!(
        "stability: {:.1}% of CSI std/mean ratios below 0.10 (mean {:.3}); RSS mean ratio {:.3}",
        100.0 * below as f64 / csi_ratios.len() as f64,
        csi_mean,
        rss_mean
    );

    // 2. Cluster counts over the 50 grid locations.
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    let (train_xy, test_xy) = simulator::layout_points(&scenario, Layout::LivingRoom)?;
    for xy in train_xy.iter().chain(test_xy.iter()) {
        let response = simulator::channel_response(&scenario, *xy, 0)?;
        *histogram
            .entry(count_clusters(&response, CLUSTER_TOLERANCE))
            .or_default() += 1;
    }
    println!("cluster counts over 50 locations: {histogram:?}");

    // 3. Correlation vs separation.
    let curve =
        simulator::correlation_by_distance(&scenario, &[0.15, 0.30, 0.60, 1.20], 100, 9)?;
    println!("mean response correlation by separation:");
    for (d, c) in curve {
        println!("  {d:.2} m -> {c:.3}");
    }
    Ok(())
}
