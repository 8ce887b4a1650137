//! Train a tiny RBM with one-step contrastive divergence and watch the
//! exact log-likelihood (computed by brute-force enumeration) climb.
//!
//! ```sh
//! cargo run --example rbm_contrastive_divergence
//! ```

use deepfi::rbm::Rbm;
use deepfi::rng::RngStream;
use ndarray::array;

fn main() {
    let mut rng = RngStream::seeded(13);
    let mut rbm = Rbm::gaussian_init(3, 2, &mut rng);
    let data = array![1.0, 0.0, 1.0];

    println!("step   log Pr(v)   Pr(v)");
    for step in 0..=2000 {
        if step % 250 == 0 {
            let ll = rbm.exact_loglik(&data).expect("3+2 units fit the guard");
            println!("{step:5}   {ll:9.4}   {:.4}", ll.exp());
        }
        rbm = rbm
            .cd1_update(&data, 0.1, &mut rng)
            .expect("finite update");
    }

    // The learned distribution now concentrates near the data vector.
    println!("\nfinal probabilities over all visible configurations:");
    for bits in 0u32..8 {
        let v = array![
            (bits & 1) as f64,
            ((bits >> 1) & 1) as f64,
            ((bits >> 2) & 1) as f64
        ];
        let p = rbm.exact_loglik(&v).unwrap().exp();
        println!("  v = [{}, {}, {}]  Pr = {p:.4}", v[0], v[1], v[2]);
    }
}
