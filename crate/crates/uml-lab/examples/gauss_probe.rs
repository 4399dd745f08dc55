use uml_lab::train::{train_shared_autoencoder, GaussianExperimentConfig};
fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(10);
    let seeds: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2);
    let cfg = GaussianExperimentConfig { epochs, ..Default::default() };
    let t0 = std::time::Instant::now();
    let mut wins = 0;
    let (mut mu, mut mj) = (0.0, 0.0);
    for seed in 0..seeds {
        let r = train_shared_autoencoder(&cfg, seed).unwrap();
        let (u, j) = (r.unimodal.val_mse_x, r.joint.val_mse_x);
        println!("seed {seed}: unimodal {u:.5}  joint {j:.5}  joint_better={}", j < u);
        if j < u { wins += 1; }
        mu += u; mj += j;
    }
    println!("wins {wins}/{seeds}; mean unimodal {:.5} joint {:.5}; elapsed {:?}", mu/seeds as f64, mj/seeds as f64, t0.elapsed());
}
