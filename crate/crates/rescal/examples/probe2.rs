use rescal::eval::{evaluate_all, EvalOptions};
use rescal::graph::{build_complete_binary_tree, edge_partitions, transitive_closure};
use rescal::train::{train_subset, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let depth: u32 = args[1].parse().unwrap();
    let dim: usize = args[2].parse().unwrap();
    let seed: u64 = args[3].parse().unwrap();
    let epochs: usize = args[4].parse().unwrap();
    let lr: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(0.05);
    let scale: Option<f64> = args.get(6).map(|s| s.parse().unwrap());

    let closed = transitive_closure(&build_complete_binary_tree(depth).unwrap()).unwrap();
    let parts = edge_partitions(&closed).unwrap();
    let mut cfg = TrainConfig::subset(dim);
    cfg.seed = seed;
    cfg.epochs = epochs;
    cfg.learning_rate = lr;
    cfg.init_scale = scale;
    let t = std::time::Instant::now();
    let fit = train_subset(&parts, &cfg).unwrap();
    let report = evaluate_all(&fit.model, &parts, &EvalOptions::default()).unwrap();
    println!(
        "epochs={:3} lr={} scale={:?} seed={}  acc_E={:.1} acc_Ec={:.1} acc_Erev={:.1}  loss={:.2} time={:?}",
        epochs, lr, scale, seed,
        100.0 * report.acc_e, 100.0 * report.acc_ec, 100.0 * report.acc_erev,
        fit.losses.last().unwrap(), t.elapsed()
    );
}
