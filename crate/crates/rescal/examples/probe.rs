use rescal::eval::{evaluate_all, EvalOptions};
use rescal::graph::{build_complete_binary_tree, edge_partitions, transitive_closure};
use rescal::train::{train_fullset, train_subset, TrainConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let depth: u32 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(11);
    let dim: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(50);
    let mode = args.get(3).map(|s| s.as_str()).unwrap_or("fullset").to_string();
    let seed: u64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(42);

    let t0 = Instant::now();
    let closed = transitive_closure(&build_complete_binary_tree(depth).unwrap()).unwrap();
    let parts = edge_partitions(&closed).unwrap();
    eprintln!("graph: V={} |E|={} |Ec|={} ({:?})", parts.num_vertices(), parts.e().len(), parts.ec_len(), t0.elapsed());

    let t1 = Instant::now();
    let fit = if mode == "fullset" {
        let mut cfg = TrainConfig::fullset(dim);
        cfg.seed = seed;
        train_fullset(&parts, &cfg).unwrap()
    } else {
        let mut cfg = TrainConfig::subset(dim);
        cfg.seed = seed;
        train_subset(&parts, &cfg).unwrap()
    };
    eprintln!("train: {:?}  loss {} -> {}", t1.elapsed(), fit.losses[0], fit.losses.last().unwrap());
    let mono = fit.losses.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-8));
    eprintln!("monotone: {mono}");

    let t2 = Instant::now();
    let report = evaluate_all(&fit.model, &parts, &EvalOptions::default()).unwrap();
    eprintln!("eval: {:?}", t2.elapsed());
    println!(
        "{} depth={} d={} seed={}  acc_E={:.1} acc_Ec={:.1} acc_Erev={:.1}",
        mode, depth, dim, seed,
        100.0 * report.acc_e, 100.0 * report.acc_ec, 100.0 * report.acc_erev
    );
}
