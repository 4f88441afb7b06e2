// Diagnosis: same SGD loop as train_subset, but with the relation matrices
// symmetrized right after init, to see whether the asymmetric random init
// is what seeds direction learning.
use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rescal::eval::{evaluate_all, EvalOptions};
use rescal::graph::{build_complete_binary_tree, edge_partitions, transitive_closure, Relation};
use rescal::model::RescalModel;
use rescal::theory::symmetry_defect;
use rescal::train::LabeledPair;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dim: usize = args[1].parse().unwrap();
    let epochs: usize = args[2].parse().unwrap();
    let lr: f64 = args[3].parse().unwrap();
    let sym_init: bool = args[4].parse().unwrap();
    let seed: u64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(42);

    let closed = transitive_closure(&build_complete_binary_tree(11).unwrap()).unwrap();
    let parts = edge_partitions(&closed).unwrap();
    let mut model = RescalModel::init(parts.num_vertices(), 2, dim, seed, 1.0 / (dim as f64).sqrt()).unwrap();
    if sym_init {
        for r in Relation::ALL {
            let m = model.relation(r).clone();
            *model.relation_mut(r) = (&m + m.transpose()) / 2.0;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut pairs: Vec<LabeledPair> = parts
        .e()
        .iter()
        .map(|&(s, o)| LabeledPair { sub: s, obj: o, label: 1.0 })
        .collect();
    let negs = parts.sample_ec(parts.e().len(), rng.random::<u64>()).unwrap();
    pairs.extend(negs.into_iter().map(|(s, o)| LabeledPair { sub: s, obj: o, label: 0.0 }));

    let d = dim;
    let mut t1 = DVector::<f64>::zeros(d);
    let mut t0 = DVector::<f64>::zeros(d);
    let mut u1 = DVector::<f64>::zeros(d);
    let mut u0 = DVector::<f64>::zeros(d);
    for ep in 0..epochs {
        pairs.shuffle(&mut rng);
        for pair in &pairs {
            let si = pair.sub.index();
            let oi = pair.obj.index();
            let a = model.embeddings().column(si).clone_owned();
            let b = model.embeddings().column(oi).clone_owned();
            t1.gemv(1.0, model.relation(Relation::Present), &b, 0.0);
            t0.gemv(1.0, model.relation(Relation::Absent), &b, 0.0);
            let r1 = a.dot(&t1) - pair.label;
            let r0 = a.dot(&t0) - (1.0 - pair.label);
            u1.gemv_tr(1.0, model.relation(Relation::Present), &a, 0.0);
            u0.gemv_tr(1.0, model.relation(Relation::Absent), &a, 0.0);
            model.relation_mut(Relation::Present).ger(-2.0 * lr * r1, &a, &b, 1.0);
            model.relation_mut(Relation::Absent).ger(-2.0 * lr * r0, &a, &b, 1.0);
            let mut gs = &t1 * r1; gs += &t0 * r0;
            let mut go = &u1 * r1; go += &u0 * r0;
            model.embeddings_mut().column_mut(si).axpy(-2.0 * lr, &gs, 1.0);
            model.embeddings_mut().column_mut(oi).axpy(-2.0 * lr, &go, 1.0);
        }
        if ep % 5 == 0 || ep == epochs - 1 {
            let report = evaluate_all(&model, &parts, &EvalOptions::default()).unwrap();
            let diff = model.difference_matrix().unwrap();
            println!(
                "ep={ep:3} symInit={sym_init} acc_E={:.1} acc_Ec={:.1} acc_Erev={:.1} defect(diff)={:.3}",
                100.0 * report.acc_e, 100.0 * report.acc_ec, 100.0 * report.acc_erev,
                symmetry_defect(&diff)
            );
        }
    }
}
