// Hypothesis check: SubSet as a zero-filled two-slice factorization over the
// full pair grid, slice-0 support = the sampled complement pairs.
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rescal::eval::{evaluate_all, EvalOptions};
use rescal::graph::{build_complete_binary_tree, edge_partitions, transitive_closure, EntityId};
use rescal::model::RescalModel;
use rescal::theory::symmetry_defect;

fn adjacency(v: usize, pairs: &[(EntityId, EntityId)], reverse: bool) -> Vec<Vec<u32>> {
    let mut lists = vec![Vec::new(); v];
    for &(s, o) in pairs {
        if s == o { continue; }
        if reverse { lists[o.index()].push(s.0); } else { lists[s.index()].push(o.0); }
    }
    lists
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let depth: u32 = args[1].parse().unwrap();
    let dim: usize = args[2].parse().unwrap();
    let seed: u64 = args[3].parse().unwrap();
    let sweeps: usize = args[4].parse().unwrap();
    let reg: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(0.01);

    let closed = transitive_closure(&build_complete_binary_tree(depth).unwrap()).unwrap();
    let parts = edge_partitions(&closed).unwrap();
    let v = parts.num_vertices();
    let d = dim;

    let e_pairs: Vec<(EntityId, EntityId)> = parts.e().iter().copied().collect();
    let neg_pairs = parts.sample_ec(e_pairs.len(), seed ^ 0x9e3779b97f4a7c15).unwrap();
    let self_neg: Vec<bool> = {
        let mut f = vec![false; v];
        for &(s, o) in &neg_pairs { if s == o { f[s.index()] = true; } }
        f
    };
    // slice supports: [0] = sampled negatives, [1] = edges
    let out = [adjacency(v, &neg_pairs, false), adjacency(v, &e_pairs, false)];
    let inn = [adjacency(v, &neg_pairs, true), adjacency(v, &e_pairs, true)];
    let self_tgt = move |k: usize, row: usize| -> f64 {
        if k == 0 && self_neg[row] { 1.0 } else { 0.0 }
    };

    let mut model = RescalModel::init(v, 2, d, seed, 1.0 / (d as f64).sqrt()).unwrap();
    let t0 = std::time::Instant::now();
    for _sweep in 0..sweeps {
        // ----- embedding sweep (Gauss-Seidel rows, safeguarded) -----
        let emb = model.embeddings().clone();
        let m0 = model.relation(rescal::graph::Relation::Absent).clone();
        let m1 = model.relation(rescal::graph::Relation::Present).clone();
        let g = &emb * emb.transpose();
        let mut hsum = &m0 * &g * m0.transpose() + m0.transpose() * &g * &m0
            + &m1 * &g * m1.transpose() + m1.transpose() * &g * &m1;
        let mut emb = emb;
        for row in 0..v {
            let a_old = emb.column(row).clone_owned();
            let u0 = &m0 * &a_old;
            let u1 = &m1 * &a_old;
            let w0 = m0.transpose() * &a_old;
            let w1 = m1.transpose() * &a_old;
            let mut nmat = hsum.clone();
            nmat.ger(-1.0, &w0, &w0, 1.0);
            nmat.ger(-1.0, &w1, &w1, 1.0);
            for i in 0..d { nmat[(i, i)] += reg; }
            let mut rhs = DVector::<f64>::zeros(d);
            for (k, m) in [(0usize, &m0), (1, &m1)] {
                let mut so = DVector::<f64>::zeros(d);
                for &w in &out[k][row] { so += emb.column(w as usize); }
                let mut si = DVector::<f64>::zeros(d);
                for &u in &inn[k][row] { si += emb.column(u as usize); }
                rhs.gemv(1.0, m, &so, 1.0);
                rhs.gemv_tr(1.0, m, &si, 1.0);
            }
            let y0 = self_tgt(0, row);
            let y1 = self_tgt(1, row);
            let rhs_solve = &rhs + y0 * &u0 + y1 * &u1;
            let Some(chol) = Cholesky::new(nmat.clone()) else { continue };
            let x = chol.solve(&rhs_solve);
            let local = |z: &DVector<f64>| -> f64 {
                let q = &nmat * z;
                let mut f = z.dot(&q) - u0.dot(z).powi(2) - u1.dot(z).powi(2) - 2.0 * rhs.dot(z);
                f += ((&m0 * z).dot(z) - y0).powi(2);
                f += ((&m1 * z).dot(z) - y1).powi(2);
                f
            };
            if local(&x) <= local(&a_old) {
                let nu0 = &m0 * &x; let nu1 = &m1 * &x;
                let nw0 = m0.transpose() * &x; let nw1 = m1.transpose() * &x;
                hsum.ger(1.0, &nu0, &nu0, 1.0); hsum.ger(1.0, &nu1, &nu1, 1.0);
                hsum.ger(1.0, &nw0, &nw0, 1.0); hsum.ger(1.0, &nw1, &nw1, 1.0);
                hsum.ger(-1.0, &u0, &u0, 1.0); hsum.ger(-1.0, &u1, &u1, 1.0);
                hsum.ger(-1.0, &w0, &w0, 1.0); hsum.ger(-1.0, &w1, &w1, 1.0);
                emb.column_mut(row).copy_from(&x);
            }
        }
        model.embeddings_mut().copy_from(&emb);
        // ----- relation step -----
        let g = model.embeddings() * model.embeddings().transpose();
        let eig = SymmetricEigen::new(g);
        let q = eig.eigenvectors;
        let lam: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        for k in 0..2usize {
            let mut c = DMatrix::<f64>::zeros(d, d);
            let pairs: &[(EntityId, EntityId)] = if k == 0 { &neg_pairs } else { &e_pairs };
            for &(s, o) in pairs {
                c.ger(1.0, &model.embeddings().column(s.index()), &model.embeddings().column(o.index()), 1.0);
            }
            let mut b = q.transpose() * c * &q;
            for i in 0..d { for j in 0..d { b[(i, j)] /= lam[i] * lam[j] + reg; } }
            let rel = if k == 0 { rescal::graph::Relation::Absent } else { rescal::graph::Relation::Present };
            *model.relation_mut(rel) = &q * b * q.transpose();
        }
    }
    let report = evaluate_all(&model, &parts, &EvalOptions::default()).unwrap();
    let diff = model.difference_matrix().unwrap();
    println!(
        "zerofill-als depth={depth} d={dim} seed={seed} sweeps={sweeps} reg={reg}  acc_E={:.1} acc_Ec={:.1} acc_Erev={:.1}  defect(diff)={:.3}  time={:?}",
        100.0 * report.acc_e, 100.0 * report.acc_ec, 100.0 * report.acc_erev,
        symmetry_defect(&diff), t0.elapsed()
    );
}
