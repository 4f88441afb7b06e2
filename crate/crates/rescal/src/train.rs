//! Fitting the bilinear model under the two training protocols.
//!
//! Both protocols minimize a squared loss over the full `V x V` pair grid,
//! one 0/1 target matrix per relation slice; they differ in where each
//! slice carries its ones:
//!
//! * `FullSet`: the `Present` slice is 1 on the closed edges `E`, the
//!   `Absent` slice is 1 on everything else (self-pairs included).
//! * `SubSet`: the `Present` slice is again 1 on `E`, but the `Absent`
//!   slice is 1 only on a uniform sample of the complement, default size
//!   `|E|`; all other entries of both slices are 0.
//!
//! Both are fit by alternating ridge updates. `FullSet` refits one
//! embedding at a time (exactly, with a safeguard on the entity's own
//! quartic self-pair term), then each relation matrix in closed form, so
//! its objective never increases between sweeps. `SubSet` follows the
//! classic factorization recipe: embeddings start from the top spectral
//! subspace of the symmetrized observed slices and all rows are refit
//! jointly against the previous iterate each sweep. A plain stochastic
//! gradient variant over the observed pairs only (`optimizer=sgd`) is kept
//! for comparison; it fits the same edges but generalizes the edge
//! direction differently.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgePartitions, EntityId, Relation};
use crate::model::{default_init_scale, RescalModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrainMode {
    FullSet,
    SubSet,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::FullSet => "fullset",
            TrainMode::SubSet => "subset",
        }
    }
}

impl std::str::FromStr for TrainMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fullset" | "FullSet" => Ok(TrainMode::FullSet),
            "subset" | "SubSet" => Ok(TrainMode::SubSet),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Optimizer for the `SubSet` protocol. `FullSet` is always alternating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    /// Alternating ridge updates over the zero-filled pair grid.
    Alternating,
    /// Seeded stochastic gradient descent over the observed pairs only.
    Sgd,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub dim: usize,
    pub mode: TrainMode,
    /// Alternating sweeps.
    pub sweeps: usize,
    /// Gradient epochs (`optimizer=sgd`).
    pub epochs: usize,
    /// Step size (`optimizer=sgd`).
    pub learning_rate: f64,
    pub regularization: f64,
    pub seed: u64,
    /// `None` uses `1/sqrt(dim)`.
    pub init_scale: Option<f64>,
    pub negatives_per_positive: usize,
    /// Redraw the complement sample every sweep/epoch instead of fixing one.
    pub resample_negatives: bool,
    pub optimizer: Optimizer,
}

impl TrainConfig {
    pub fn fullset(dim: usize) -> Self {
        Self {
            dim,
            mode: TrainMode::FullSet,
            sweeps: 30,
            epochs: 200,
            learning_rate: 0.05,
            regularization: 0.01,
            seed: 0,
            init_scale: None,
            negatives_per_positive: 1,
            resample_negatives: false,
            optimizer: Optimizer::Alternating,
        }
    }

    pub fn subset(dim: usize) -> Self {
        Self {
            mode: TrainMode::SubSet,
            ..Self::fullset(dim)
        }
    }

    pub fn init_scale_or_default(&self) -> f64 {
        self.init_scale.unwrap_or_else(|| default_init_scale(self.dim))
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be >= 1".into()));
        }
        if !self.regularization.is_finite() || self.regularization < 0.0 {
            return Err(Error::Config("regularization must be finite and >= 0".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be finite and > 0".into()));
        }
        if 2.0 * self.learning_rate * self.regularization >= 1.0 {
            return Err(Error::Config(
                "learning_rate * regularization too large for a stable decay step".into(),
            ));
        }
        if let Some(s) = self.init_scale {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::Config("init_scale must be finite and >= 0".into()));
            }
        }
        match self.mode {
            TrainMode::FullSet => {
                if self.sweeps == 0 {
                    return Err(Error::Config("sweeps must be >= 1".into()));
                }
                if self.optimizer == Optimizer::Sgd {
                    return Err(Error::Config(
                        "fullset training uses the alternating solver only".into(),
                    ));
                }
            }
            TrainMode::SubSet => {
                let iters = match self.optimizer {
                    Optimizer::Alternating => self.sweeps,
                    Optimizer::Sgd => self.epochs,
                };
                if iters == 0 {
                    return Err(Error::Config("sweeps/epochs must be >= 1".into()));
                }
                if self.negatives_per_positive == 0 {
                    return Err(Error::Config("negatives_per_positive must be >= 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Parses the line-oriented `key=value` form. Unknown keys are errors.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut mode = None;
        let mut seen = std::collections::HashSet::new();
        let mut fields: Vec<(usize, String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !seen.insert(k.clone()) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{k}`",
                    lineno + 1
                )));
            }
            match k.as_str() {
                "dim" => dim = Some(parse_num::<usize>(&k, &v)?),
                "mode" => mode = Some(v.parse::<TrainMode>()?),
                _ => fields.push((lineno + 1, k, v)),
            }
        }
        let dim = dim.ok_or_else(|| Error::Config("missing required key `dim`".into()))?;
        let mode = mode.ok_or_else(|| Error::Config("missing required key `mode`".into()))?;
        let mut cfg = match mode {
            TrainMode::FullSet => Self::fullset(dim),
            TrainMode::SubSet => Self::subset(dim),
        };
        for (lineno, k, v) in fields {
            cfg.apply_key(&k, &v)
                .map_err(|e| Error::Config(format!("line {lineno}: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub(crate) fn apply_key(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "sweeps" => self.sweeps = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "regularization" => self.regularization = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "init_scale" => self.init_scale = Some(parse_num(key, value)?),
            "negatives_per_positive" => self.negatives_per_positive = parse_num(key, value)?,
            "resample_negatives" => {
                self.resample_negatives = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(Error::Config(format!("`{key}` must be true or false"))),
                }
            }
            "optimizer" => {
                self.optimizer = match value {
                    "als" => Optimizer::Alternating,
                    "sgd" => Optimizer::Sgd,
                    _ => return Err(Error::Config(format!("`{key}` must be als or sgd"))),
                }
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

/// An ordered pair with its relation label: 1.0 inside `E`, 0.0 outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPair {
    pub sub: EntityId,
    pub obj: EntityId,
    pub label: f64,
}

impl LabeledPair {
    pub fn new(sub: EntityId, obj: EntityId, label: f64) -> Result<Self> {
        if label != 0.0 && label != 1.0 {
            return Err(Error::InvalidArgument(format!(
                "label must be 0 or 1, got {label}"
            )));
        }
        Ok(Self { sub, obj, label })
    }
}

/// Squared-error objective over an explicit pair set, plus `reg * ||Theta||^2`
/// with every parameter counted once.
pub fn loss(model: &RescalModel, pairs: &[LabeledPair], reg: f64) -> f64 {
    let emb = model.embeddings();
    let p0 = model.relation(Relation::Absent) * emb;
    let p1 = model.relation(Relation::Present) * emb;
    let d = model.dim();
    let es = emb.as_slice();
    let s0 = p0.as_slice();
    let s1 = p1.as_slice();
    let mut total = 0.0;
    for pair in pairs {
        let a = &es[pair.sub.index() * d..pair.sub.index() * d + d];
        let b1 = &s1[pair.obj.index() * d..pair.obj.index() * d + d];
        let b0 = &s0[pair.obj.index() * d..pair.obj.index() * d + d];
        let score1 = dot(a, b1);
        let score0 = dot(a, b0);
        let r1 = score1 - pair.label;
        let r0 = score0 - (1.0 - pair.label);
        total += r1 * r1 + r0 * r0;
    }
    total + reg * theta_norm_squared(model)
}

fn theta_norm_squared(model: &RescalModel) -> f64 {
    model.embeddings().norm_squared()
        + model.relation(Relation::Absent).norm_squared()
        + model.relation(Relation::Present).norm_squared()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact gradient of one pair's squared error plus the penalty on the
/// parameters the pair touches. Gradients are reported per role; applying
/// both `d_sub` and `d_obj` always adds up to the full derivative, so for a
/// self-pair the embedding penalty lands in `d_sub` alone.
#[derive(Debug, Clone)]
pub struct PairGradient {
    pub d_sub: DVector<f64>,
    pub d_obj: DVector<f64>,
    pub d_absent: DMatrix<f64>,
    pub d_present: DMatrix<f64>,
}

pub fn gradient(model: &RescalModel, pair: &LabeledPair, reg: f64) -> PairGradient {
    let a = model.entity(pair.sub);
    let b = model.entity(pair.obj);
    let m0 = model.relation(Relation::Absent);
    let m1 = model.relation(Relation::Present);
    let t1 = m1 * &b;
    let t0 = m0 * &b;
    let r1 = a.dot(&t1) - pair.label;
    let r0 = a.dot(&t0) - (1.0 - pair.label);
    let u1 = m1.transpose() * &a;
    let u0 = m0.transpose() * &a;
    let reg_obj = if pair.sub == pair.obj { 0.0 } else { reg };
    PairGradient {
        d_sub: 2.0 * (r1 * &t1 + r0 * &t0 + reg * &a),
        d_obj: 2.0 * (r1 * &u1 + r0 * &u0 + reg_obj * &b),
        d_absent: 2.0 * (r0 * &a * b.transpose() + reg * m0),
        d_present: 2.0 * (r1 * &a * b.transpose() + reg * m1),
    }
}

/// A fitted model together with the objective value at initialization and
/// after every sweep (FullSet) or epoch (SubSet).
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: RescalModel,
    pub losses: Vec<f64>,
}

/// The FullSet objective evaluated in closed form over all `V^2` ordered
/// pairs, without materializing them: expanding the squares reduces the
/// dense sums to Gram-matrix traces plus sums over the edges of `E`.
pub fn fullset_loss(model: &RescalModel, parts: &EdgePartitions, reg: f64) -> f64 {
    let emb = model.embeddings();
    let d = model.dim();
    let v = model.num_entities();
    let g = emb * emb.transpose();
    let s = column_total(emb);
    let e_count = parts.e().len() as f64;
    let mut total = reg * theta_norm_squared(model);
    for rel in Relation::ALL {
        let m = model.relation(rel);
        // sum of squared scores over every ordered pair
        let gmg = &g * m * &g;
        let sq: f64 = m.iter().zip(gmg.iter()).map(|(x, y)| x * y).sum();
        // sum of scores over the label-1 support of this slice
        let p = m * emb;
        let es = emb.as_slice();
        let ps = p.as_slice();
        let mut edge_sum = 0.0;
        for &(u, w) in parts.e() {
            edge_sum += dot(
                &es[u.index() * d..u.index() * d + d],
                &ps[w.index() * d..w.index() * d + d],
            );
        }
        let (support_sum, support_size) = match rel {
            Relation::Present => (edge_sum, e_count),
            Relation::Absent => {
                let all_sum = (m * &s).dot(&s);
                (all_sum - edge_sum, (v * v) as f64 - e_count)
            }
        };
        total += sq - 2.0 * support_sum + support_size;
    }
    total
}

fn column_total(m: &DMatrix<f64>) -> DVector<f64> {
    let mut s = DVector::zeros(m.nrows());
    for c in m.column_iter() {
        s += c;
    }
    s
}

/// Alternating least squares over the fully observed pair grid.
///
/// Embeddings are refit one entity at a time by a d x d ridge solve that is
/// exact for every term except the entity's own self-pair (quartic in its
/// vector), which is linearized at the current value; a candidate is kept
/// only when it does not increase the entity's exact local objective, so the
/// full loss is non-increasing by construction. Relation matrices are then
/// refit exactly through the eigendecomposition of the Gram matrix.
pub fn train_fullset(parts: &EdgePartitions, cfg: &TrainConfig) -> Result<FitResult> {
    cfg.validate()?;
    if cfg.mode != TrainMode::FullSet {
        return Err(Error::Config("train_fullset requires mode=fullset".into()));
    }
    if cfg.regularization <= 0.0 {
        return Err(Error::Config(
            "the alternating solver needs regularization > 0 to keep its normal equations well posed"
                .into(),
        ));
    }
    let v = parts.num_vertices();
    let reg = cfg.regularization;
    let mut model = RescalModel::init(v, 2, cfg.dim, cfg.seed, cfg.init_scale_or_default())?;
    let out = adjacency_of(parts, false);
    let inn = adjacency_of(parts, true);

    let mut losses = vec![fullset_loss(&model, parts, reg)];
    for _ in 0..cfg.sweeps {
        embedding_sweep(&mut model, &out, &inn, reg);
        relation_step(&mut model, parts, reg);
        losses.push(fullset_loss(&model, parts, reg));
    }
    Ok(FitResult { model, losses })
}

fn adjacency_of(parts: &EdgePartitions, reverse: bool) -> Vec<Vec<u32>> {
    let mut lists = vec![Vec::new(); parts.num_vertices()];
    for &(s, o) in parts.e() {
        if reverse {
            lists[o.index()].push(s.0);
        } else {
            lists[s.index()].push(o.0);
        }
    }
    lists
}

fn embedding_sweep(model: &mut RescalModel, out: &[Vec<u32>], inn: &[Vec<u32>], reg: f64) {
    let d = model.dim();
    let v = model.num_entities();
    let (emb, rels) = model.parts_mut();
    let m0 = rels[0].clone();
    let m1 = rels[1].clone();
    let (m0, m1) = (&m0, &m1);

    // caches over the current embeddings, updated rank-1 as rows change
    let mut s = DVector::<f64>::zeros(d);
    for c in emb.column_iter() {
        s += c;
    }
    let g = &*emb * emb.transpose();
    let mut hsum = m0 * &g * m0.transpose()
        + m0.transpose() * &g * m0
        + m1 * &g * m1.transpose()
        + m1.transpose() * &g * m1;

    let mut sig1_out = DVector::<f64>::zeros(d);
    let mut sig1_in = DVector::<f64>::zeros(d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut tmp = DVector::<f64>::zeros(d);

    for row in 0..v {
        let a_old = emb.column(row).clone_owned();
        let u0 = m0 * &a_old;
        let u1 = m1 * &a_old;
        let w0 = m0.transpose() * &a_old;
        let w1 = m1.transpose() * &a_old;

        // normal matrix for the solve: subject terms over all objects with
        // the self-pair object linearized at the old value, object terms
        // over all subjects but this one
        let mut nmat = hsum.clone();
        nmat.ger(-1.0, &w0, &w0, 1.0);
        nmat.ger(-1.0, &w1, &w1, 1.0);
        for i in 0..d {
            nmat[(i, i)] += reg;
        }

        sig1_out.fill(0.0);
        for &w in &out[row] {
            sig1_out += emb.column(w as usize);
        }
        sig1_in.fill(0.0);
        for &u in &inn[row] {
            sig1_in += emb.column(u as usize);
        }
        let rest = &s - &a_old;
        let sig0_out = &rest - &sig1_out;
        let sig0_in = &rest - &sig1_in;

        rhs.gemv(1.0, m1, &sig1_out, 0.0);
        rhs.gemv_tr(1.0, m1, &sig1_in, 1.0);
        rhs.gemv(1.0, m0, &sig0_out, 1.0);
        rhs.gemv_tr(1.0, m0, &sig0_in, 1.0);
        // self-pair target: absent slice wants 1, present slice wants 0
        let rhs_solve = &rhs + &u0;

        let Some(chol) = Cholesky::new(nmat.clone()) else {
            continue;
        };
        let x = chol.solve(&rhs_solve);

        // exact local objective (self-pair term kept quartic); constants drop
        let mut local = |z: &DVector<f64>| -> f64 {
            tmp.gemv(1.0, &nmat, z, 0.0);
            let mut f = z.dot(&tmp) - u0.dot(z).powi(2) - u1.dot(z).powi(2) - 2.0 * rhs.dot(z);
            tmp.gemv(1.0, m0, z, 0.0);
            f += (z.dot(&tmp) - 1.0).powi(2);
            tmp.gemv(1.0, m1, z, 0.0);
            f += z.dot(&tmp).powi(2);
            f
        };
        if local(&x) <= local(&a_old) {
            let nu0 = m0 * &x;
            let nu1 = m1 * &x;
            let nw0 = m0.transpose() * &x;
            let nw1 = m1.transpose() * &x;
            hsum.ger(1.0, &nu0, &nu0, 1.0);
            hsum.ger(1.0, &nu1, &nu1, 1.0);
            hsum.ger(1.0, &nw0, &nw0, 1.0);
            hsum.ger(1.0, &nw1, &nw1, 1.0);
            hsum.ger(-1.0, &u0, &u0, 1.0);
            hsum.ger(-1.0, &u1, &u1, 1.0);
            hsum.ger(-1.0, &w0, &w0, 1.0);
            hsum.ger(-1.0, &w1, &w1, 1.0);
            s += &x - &a_old;
            emb.column_mut(row).copy_from(&x);
        }
    }
}

fn relation_step(model: &mut RescalModel, parts: &EdgePartitions, reg: f64) {
    let d = model.dim();
    let (emb, rels) = model.parts_mut();
    let g = &*emb * emb.transpose();
    let s = column_total(emb);
    let eig = SymmetricEigen::new(g);
    let q = eig.eigenvectors;
    let lam: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();

    // target cross-moments: c1 over the edges, c0 over everything else
    let mut c1 = DMatrix::<f64>::zeros(d, d);
    let mut t = DVector::<f64>::zeros(d);
    let out = adjacency_of(parts, false);
    for (u, list) in out.iter().enumerate() {
        if list.is_empty() {
            continue;
        }
        t.fill(0.0);
        for &w in list {
            t += emb.column(w as usize);
        }
        c1.ger(1.0, &emb.column(u), &t, 1.0);
    }
    let mut c0 = DMatrix::<f64>::zeros(d, d);
    c0.ger(1.0, &s, &s, 1.0);
    c0 -= &c1;

    for (idx, c) in [c0, c1].into_iter().enumerate() {
        let mut b = q.transpose() * c * &q;
        for i in 0..d {
            for j in 0..d {
                b[(i, j)] /= lam[i] * lam[j] + reg;
            }
        }
        rels[idx] = &q * b * q.transpose();
    }
}

/// Positive support of one target slice: adjacency of its 1-entries, with
/// self-pairs kept separate because they enter the row updates quartically.
struct Support {
    out: Vec<Vec<u32>>,
    inn: Vec<Vec<u32>>,
    self_rows: Vec<bool>,
    count: usize,
}

impl Support {
    fn from_pairs(v: usize, pairs: impl Iterator<Item = (EntityId, EntityId)>) -> Self {
        let mut out = vec![Vec::new(); v];
        let mut inn = vec![Vec::new(); v];
        let mut self_rows = vec![false; v];
        let mut count = 0usize;
        for (s, o) in pairs {
            count += 1;
            if s == o {
                self_rows[s.index()] = true;
            } else {
                out[s.index()].push(o.0);
                inn[o.index()].push(s.0);
            }
        }
        Self {
            out,
            inn,
            self_rows,
            count,
        }
    }

    /// `sum_{(u,v) in support} a_u a_v^T`.
    fn cross_moment(&self, emb: &DMatrix<f64>) -> DMatrix<f64> {
        let d = emb.nrows();
        let mut c = DMatrix::<f64>::zeros(d, d);
        let mut t = DVector::<f64>::zeros(d);
        for (u, list) in self.out.iter().enumerate() {
            if list.is_empty() && !self.self_rows[u] {
                continue;
            }
            t.fill(0.0);
            for &w in list {
                t += emb.column(w as usize);
            }
            if self.self_rows[u] {
                t += emb.column(u);
            }
            c.ger(1.0, &emb.column(u), &t, 1.0);
        }
        c
    }

    /// `sum_{(u,v) in support} a_u^T M a_v` given `p = M * emb`.
    fn score_sum(&self, emb: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
        let d = emb.nrows();
        let es = emb.as_slice();
        let ps = p.as_slice();
        let mut total = 0.0;
        for (u, list) in self.out.iter().enumerate() {
            let a = &es[u * d..(u + 1) * d];
            for &w in list {
                total += dot(a, &ps[w as usize * d..(w as usize + 1) * d]);
            }
            if self.self_rows[u] {
                total += dot(a, &ps[u * d..(u + 1) * d]);
            }
        }
        total
    }
}

/// Exact ridge refit of both relation matrices against explicit slice
/// supports, through the eigendecomposition of the Gram matrix.
fn relation_step_explicit(model: &mut RescalModel, supports: [&Support; 2], reg: f64) {
    let d = model.dim();
    let (emb, rels) = model.parts_mut();
    let g = &*emb * emb.transpose();
    let eig = SymmetricEigen::new(g);
    let q = eig.eigenvectors;
    let lam: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    for (idx, support) in supports.iter().enumerate() {
        let c = support.cross_moment(emb);
        let mut b = q.transpose() * c * &q;
        for i in 0..d {
            for j in 0..d {
                b[(i, j)] /= lam[i] * lam[j] + reg;
            }
        }
        rels[idx] = &q * b * q.transpose();
    }
}

/// Joint ridge refit of all embeddings against the previous iterate: every
/// row is solved against the same normal matrix, which treats the partner
/// role as fixed.
fn embedding_step_joint(model: &mut RescalModel, supports: [&Support; 2], reg: f64) {
    let d = model.dim();
    let v = model.num_entities();
    let (emb, rels) = model.parts_mut();
    let g = &*emb * emb.transpose();
    let mut den = DMatrix::<f64>::zeros(d, d);
    for m in rels.iter() {
        den += m * &g * m.transpose() + m.transpose() * &g * m;
    }
    for i in 0..d {
        den[(i, i)] += reg;
    }
    // num^T column u = sum_k [ M_k * (sum of objects of u in slice k)
    //                          + M_k^T * (sum of subjects over u) ]
    let mut numt = DMatrix::<f64>::zeros(d, v);
    let mut so = DVector::<f64>::zeros(d);
    let mut si = DVector::<f64>::zeros(d);
    let mut col = DVector::<f64>::zeros(d);
    for u in 0..v {
        col.fill(0.0);
        for (k, support) in supports.iter().enumerate() {
            so.fill(0.0);
            for &w in &support.out[u] {
                so += emb.column(w as usize);
            }
            si.fill(0.0);
            for &w in &support.inn[u] {
                si += emb.column(w as usize);
            }
            if support.self_rows[u] {
                so += emb.column(u);
                si += emb.column(u);
            }
            col.gemv(1.0, &rels[k], &so, 1.0);
            col.gemv_tr(1.0, &rels[k], &si, 1.0);
        }
        numt.column_mut(u).copy_from(&col);
    }
    if let Some(chol) = Cholesky::new(den) {
        emb.copy_from(&chol.solve(&numt));
    }
}

/// Objective over the full zero-filled pair grid with explicit supports.
fn zero_filled_loss(model: &RescalModel, supports: [&Support; 2], reg: f64) -> f64 {
    let emb = model.embeddings();
    let g = emb * emb.transpose();
    let mut total = reg * theta_norm_squared(model);
    for (idx, support) in supports.iter().enumerate() {
        let m = model.relation(Relation::ALL[idx]);
        let gmg = &g * m * &g;
        let sq: f64 = m.iter().zip(gmg.iter()).map(|(x, y)| x * y).sum();
        let p = m * emb;
        total += sq - 2.0 * support.score_sum(emb, &p) + support.count as f64;
    }
    total
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Spectral embedding initialization: the top `d` eigenvectors of the
/// symmetrized observed slices, computed by seeded subspace iteration.
fn spectral_embedding_init(emb: &mut DMatrix<f64>, supports: [&Support; 2], seed: u64) {
    let d = emb.nrows();
    let v = emb.ncols();
    let k = d.min(v);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bec_7a11);
    let mut q = DMatrix::<f64>::from_fn(v, k, |_, _| gaussian(&mut rng));
    let mut z = DMatrix::<f64>::zeros(v, k);
    for _ in 0..30 {
        z.fill(0.0);
        for support in supports {
            for (u, list) in support.out.iter().enumerate() {
                for &w in list {
                    let w = w as usize;
                    for c in 0..k {
                        z[(u, c)] += q[(w, c)];
                        z[(w, c)] += q[(u, c)];
                    }
                }
                if support.self_rows[u] {
                    for c in 0..k {
                        z[(u, c)] += 2.0 * q[(u, c)];
                    }
                }
            }
        }
        q = z.clone().qr().q();
    }
    for factor in 0..k {
        for entity in 0..v {
            emb[(factor, entity)] = q[(entity, factor)];
        }
    }
}

/// Fits the `SubSet` protocol. The default alternating optimizer follows
/// the classic factorization recipe over the zero-filled grid (spectral
/// initialization, joint embedding refits); `optimizer=sgd` selects seeded
/// stochastic gradient descent over the observed pairs only.
pub fn train_subset(parts: &EdgePartitions, cfg: &TrainConfig) -> Result<FitResult> {
    cfg.validate()?;
    if cfg.mode != TrainMode::SubSet {
        return Err(Error::Config("train_subset requires mode=subset".into()));
    }
    match cfg.optimizer {
        Optimizer::Alternating => train_subset_als(parts, cfg),
        Optimizer::Sgd => train_subset_sgd(parts, cfg),
    }
}

fn negative_sample_size(parts: &EdgePartitions, cfg: &TrainConfig) -> Result<usize> {
    parts
        .e()
        .len()
        .checked_mul(cfg.negatives_per_positive)
        .filter(|&n| n <= parts.ec_len())
        .ok_or_else(|| Error::Config("negatives_per_positive exceeds the complement size".into()))
}

fn train_subset_als(parts: &EdgePartitions, cfg: &TrainConfig) -> Result<FitResult> {
    if cfg.regularization <= 0.0 {
        return Err(Error::Config(
            "the alternating solver needs regularization > 0 to keep its normal equations well posed"
                .into(),
        ));
    }
    let v = parts.num_vertices();
    let reg = cfg.regularization;
    let n_neg = negative_sample_size(parts, cfg)?;
    let mut model = RescalModel::init(v, 2, cfg.dim, cfg.seed, cfg.init_scale_or_default())?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);

    let edges = Support::from_pairs(v, parts.e().iter().copied());
    let mut negatives =
        Support::from_pairs(v, parts.sample_ec(n_neg, data_rng.random::<u64>())?.into_iter());
    spectral_embedding_init(model.embeddings_mut(), [&negatives, &edges], cfg.seed);

    let mut losses = vec![zero_filled_loss(&model, [&negatives, &edges], reg)];
    for sweep in 0..cfg.sweeps {
        if cfg.resample_negatives && sweep > 0 {
            negatives = Support::from_pairs(
                v,
                parts.sample_ec(n_neg, data_rng.random::<u64>())?.into_iter(),
            );
        }
        relation_step_explicit(&mut model, [&negatives, &edges], reg);
        embedding_step_joint(&mut model, [&negatives, &edges], reg);
        let l = zero_filled_loss(&model, [&negatives, &edges], reg);
        if !l.is_finite() {
            return Err(Error::Diverged {
                epoch: sweep,
                loss: l,
            });
        }
        losses.push(l);
    }
    Ok(FitResult { model, losses })
}

/// Seeded stochastic gradient descent over the edges plus a sampled slice of
/// the complement. Single threaded; bit-identical for a fixed config. The
/// penalty term is applied as one weight-decay step per epoch. The learning
/// rate halves whenever an epoch fails to improve the objective by 0.01%.
fn train_subset_sgd(parts: &EdgePartitions, cfg: &TrainConfig) -> Result<FitResult> {
    let v = parts.num_vertices();
    let d = cfg.dim;
    let mut model = RescalModel::init(v, 2, d, cfg.seed, cfg.init_scale_or_default())?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);

    let positives: Vec<LabeledPair> = parts
        .e()
        .iter()
        .map(|&(s, o)| LabeledPair { sub: s, obj: o, label: 1.0 })
        .collect();
    let n_neg = negative_sample_size(parts, cfg)?;
    let draw_negatives = |rng: &mut ChaCha8Rng| -> Result<Vec<LabeledPair>> {
        Ok(parts
            .sample_ec(n_neg, rng.random::<u64>())?
            .into_iter()
            .map(|(s, o)| LabeledPair { sub: s, obj: o, label: 0.0 })
            .collect())
    };

    let mut pairs = positives.clone();
    pairs.extend(draw_negatives(&mut data_rng)?);

    let mut lr = cfg.learning_rate;
    let reg = cfg.regularization;
    let mut losses = vec![loss(&model, &pairs, reg)];
    let mut prev = losses[0];

    let mut t1 = DVector::<f64>::zeros(d);
    let mut t0 = DVector::<f64>::zeros(d);
    let mut u1 = DVector::<f64>::zeros(d);
    let mut u0 = DVector::<f64>::zeros(d);
    let mut g_sub = DVector::<f64>::zeros(d);
    let mut g_obj = DVector::<f64>::zeros(d);

    for epoch in 0..cfg.epochs {
        if cfg.resample_negatives && epoch > 0 {
            pairs.truncate(positives.len());
            pairs.extend(draw_negatives(&mut data_rng)?);
        }
        pairs.shuffle(&mut data_rng);

        let (emb, rels) = model.parts_mut();
        for pair in &pairs {
            let si = pair.sub.index();
            let oi = pair.obj.index();
            let a = emb.column(si).clone_owned();
            let b = emb.column(oi).clone_owned();
            t1.gemv(1.0, &rels[1], &b, 0.0);
            t0.gemv(1.0, &rels[0], &b, 0.0);
            let r1 = a.dot(&t1) - pair.label;
            let r0 = a.dot(&t0) - (1.0 - pair.label);
            u1.gemv_tr(1.0, &rels[1], &a, 0.0);
            u0.gemv_tr(1.0, &rels[0], &a, 0.0);
            g_sub.copy_from(&t1);
            g_sub *= r1;
            g_sub.axpy(r0, &t0, 1.0);
            g_obj.copy_from(&u1);
            g_obj *= r1;
            g_obj.axpy(r0, &u0, 1.0);
            rels[1].ger(-2.0 * lr * r1, &a, &b, 1.0);
            rels[0].ger(-2.0 * lr * r0, &a, &b, 1.0);
            emb.column_mut(si).axpy(-2.0 * lr, &g_sub, 1.0);
            emb.column_mut(oi).axpy(-2.0 * lr, &g_obj, 1.0);
        }
        if reg > 0.0 {
            let decay = 1.0 - 2.0 * lr * reg;
            *emb *= decay;
            rels[0] *= decay;
            rels[1] *= decay;
        }

        let l = loss(&model, &pairs, reg);
        if !l.is_finite() {
            return Err(Error::Diverged { epoch, loss: l });
        }
        if prev - l < 1e-4 * prev.abs() {
            lr *= 0.5;
        }
        prev = l;
        losses.push(l);
    }
    Ok(FitResult { model, losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_complete_binary_tree, edge_partitions, transitive_closure};
    use approx::assert_relative_eq;

    fn toy_partitions(depth: u32) -> EdgePartitions {
        let closed = transitive_closure(&build_complete_binary_tree(depth).unwrap()).unwrap();
        edge_partitions(&closed).unwrap()
    }

    fn all_pairs(parts: &EdgePartitions) -> Vec<LabeledPair> {
        let v = parts.num_vertices() as u32;
        let mut pairs = Vec::new();
        for s in 0..v {
            for o in 0..v {
                let label = if parts.e().contains(&(EntityId(s), EntityId(o))) {
                    1.0
                } else {
                    0.0
                };
                pairs.push(LabeledPair {
                    sub: EntityId(s),
                    obj: EntityId(o),
                    label,
                });
            }
        }
        pairs
    }

    fn naive_loss(model: &RescalModel, pairs: &[LabeledPair], reg: f64) -> f64 {
        let mut total = 0.0;
        for p in pairs {
            let s1 = model.score(p.sub, Relation::Present, p.obj).unwrap();
            let s0 = model.score(p.sub, Relation::Absent, p.obj).unwrap();
            total += (s1 - p.label).powi(2) + (s0 - (1.0 - p.label)).powi(2);
        }
        total
            + reg
                * (model.embeddings().norm_squared()
                    + model.relation(Relation::Absent).norm_squared()
                    + model.relation(Relation::Present).norm_squared())
    }

    #[test]
    fn loss_on_zero_model_single_positive_pair() {
        let model = RescalModel::init(2, 2, 3, 0, 0.0).unwrap();
        let pair = LabeledPair::new(EntityId(0), EntityId(1), 1.0).unwrap();
        // present slice misses its target 1, absent slice hits its target 0
        assert_eq!(loss(&model, &[pair], 0.0), 1.0);
    }

    #[test]
    fn loss_is_zero_at_perfect_scores() {
        // engineered exact fit: a_0=(1,0), a_1=(0,1), present=[[0,1],[0,0]]
        // scores (0,present,1)=1; absent=[[...]] scores (0,absent,1)=0
        let emb = nalgebra::DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let mut present = nalgebra::DMatrix::zeros(2, 2);
        present[(0, 1)] = 1.0;
        let absent = nalgebra::DMatrix::zeros(2, 2);
        let model = RescalModel::from_parts(emb, vec![absent, present]).unwrap();
        let pair = LabeledPair::new(EntityId(0), EntityId(1), 1.0).unwrap();
        assert_eq!(loss(&model, &[pair], 0.0), 0.0);
    }

    #[test]
    fn loss_matches_per_pair_oracle() {
        let parts = toy_partitions(3);
        let model = RescalModel::init(parts.num_vertices(), 2, 4, 9, 0.5).unwrap();
        let pairs = all_pairs(&parts);
        assert_relative_eq!(
            loss(&model, &pairs, 0.03),
            naive_loss(&model, &pairs, 0.03),
            max_relative = 1e-12
        );
    }

    #[test]
    fn fullset_loss_matches_materialized_pairs() {
        let parts = toy_partitions(3);
        let model = RescalModel::init(parts.num_vertices(), 2, 5, 4, 0.4).unwrap();
        let pairs = all_pairs(&parts);
        assert_relative_eq!(
            fullset_loss(&model, &parts, 0.01),
            loss(&model, &pairs, 0.01),
            max_relative = 1e-10
        );
    }

    #[test]
    fn gradient_vanishes_on_zero_model() {
        let model = RescalModel::init(3, 2, 4, 0, 0.0).unwrap();
        let pair = LabeledPair::new(EntityId(0), EntityId(1), 1.0).unwrap();
        let g = gradient(&model, &pair, 0.0);
        assert!(g.d_sub.iter().all(|&x| x == 0.0));
        assert!(g.d_obj.iter().all(|&x| x == 0.0));
        assert!(g.d_absent.iter().all(|&x| x == 0.0));
        assert!(g.d_present.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_of_penalty_term_is_linear() {
        let model = RescalModel::init(3, 2, 4, 8, 0.5).unwrap();
        let pair = LabeledPair::new(EntityId(0), EntityId(1), 1.0).unwrap();
        let reg = 0.25;
        let with = gradient(&model, &pair, reg);
        let without = gradient(&model, &pair, 0.0);
        let a = model.entity(pair.sub);
        for i in 0..4 {
            assert_relative_eq!(
                with.d_sub[i] - without.d_sub[i],
                2.0 * reg * a[i],
                max_relative = 1e-12
            );
        }
        let m1 = model.relation(Relation::Present);
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(
                    with.d_present[(i, j)] - without.d_present[(i, j)],
                    2.0 * reg * m1[(i, j)],
                    max_relative = 1e-12
                );
            }
        }
    }

    /// Central finite differences against the analytic gradient, including a
    /// self-pair where both roles hit the same embedding.
    #[test]
    fn gradient_matches_finite_differences() {
        let reg = 0.02;
        let h = 1e-5;
        for (sub, obj) in [(EntityId(0), EntityId(1)), (EntityId(2), EntityId(2))] {
            let model = RescalModel::init(4, 2, 3, 31, 0.6).unwrap();
            let pair = LabeledPair::new(sub, obj, 1.0).unwrap();
            let g = gradient(&model, &pair, reg);
            let d = model.dim();
            // embedding coordinates
            for row in 0..d {
                for (role, v) in [(0, sub), (1, obj)] {
                    let mut plus = model.clone();
                    plus.embeddings_mut()[(row, v.index())] += h;
                    let mut minus = model.clone();
                    minus.embeddings_mut()[(row, v.index())] -= h;
                    let fd = (loss(&plus, &[pair], reg) - loss(&minus, &[pair], reg)) / (2.0 * h);
                    let analytic = if sub == obj {
                        g.d_sub[row] + g.d_obj[row]
                    } else if role == 0 {
                        g.d_sub[row]
                    } else {
                        g.d_obj[row]
                    };
                    assert_relative_eq!(fd, analytic, max_relative = 1e-4, epsilon = 1e-8);
                    if sub == obj {
                        break;
                    }
                }
            }
            // matrix coordinates
            for i in 0..d {
                for j in 0..d {
                    for rel in Relation::ALL {
                        let mut plus = model.clone();
                        plus.relation_mut(rel)[(i, j)] += h;
                        let mut minus = model.clone();
                        minus.relation_mut(rel)[(i, j)] -= h;
                        let fd =
                            (loss(&plus, &[pair], reg) - loss(&minus, &[pair], reg)) / (2.0 * h);
                        let analytic = match rel {
                            Relation::Absent => g.d_absent[(i, j)],
                            Relation::Present => g.d_present[(i, j)],
                        };
                        assert_relative_eq!(fd, analytic, max_relative = 1e-4, epsilon = 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn fullset_fits_small_tree_exactly() {
        let parts = toy_partitions(3);
        let mut cfg = TrainConfig::fullset(8);
        cfg.sweeps = 50;
        cfg.seed = 3;
        let fit = train_fullset(&parts, &cfg).unwrap();
        for &(s, o) in parts.e() {
            assert!(fit.model.classify_pair(s, o).unwrap());
        }
        for pair in parts.ec_pairs() {
            assert!(!fit.model.classify_pair(pair.0, pair.1).unwrap());
        }
    }

    #[test]
    fn fullset_loss_never_increases() {
        let parts = toy_partitions(4);
        let mut cfg = TrainConfig::fullset(6);
        cfg.sweeps = 25;
        cfg.seed = 11;
        let fit = train_fullset(&parts, &cfg).unwrap();
        for w in fit.losses.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-8),
                "loss increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn fullset_requires_positive_regularization() {
        let parts = toy_partitions(3);
        let mut cfg = TrainConfig::fullset(4);
        cfg.regularization = 0.0;
        assert!(matches!(train_fullset(&parts, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn subset_fits_positive_edges_on_toy() {
        let parts = toy_partitions(3);
        let mut cfg = TrainConfig::subset(8);
        cfg.epochs = 300;
        cfg.seed = 5;
        let fit = train_subset(&parts, &cfg).unwrap();
        for &(s, o) in parts.e() {
            assert!(fit.model.classify_pair(s, o).unwrap());
        }
    }

    #[test]
    fn subset_smoke_loss_drops_by_ninety_percent() {
        let parts = toy_partitions(4);
        let cfg = TrainConfig::subset(8);
        let fit = train_subset(&parts, &cfg).unwrap();
        let first = fit.losses[0];
        let last = *fit.losses.last().unwrap();
        assert!(
            last < 0.1 * first,
            "final loss {last} not below 10% of initial {first}"
        );
    }

    #[test]
    fn subset_is_bit_reproducible() {
        let parts = toy_partitions(3);
        let mut cfg = TrainConfig::subset(4);
        cfg.epochs = 20;
        cfg.seed = 123;
        let a = train_subset(&parts, &cfg).unwrap();
        let b = train_subset(&parts, &cfg).unwrap();
        assert!(a
            .model
            .embeddings()
            .iter()
            .zip(b.model.embeddings().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        for rel in Relation::ALL {
            assert!(a
                .model
                .relation(rel)
                .iter()
                .zip(b.model.relation(rel).iter())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(a.losses, b.losses);
    }

    #[test]
    fn subset_resampling_changes_the_draw_but_stays_deterministic() {
        let parts = toy_partitions(4);
        let mut cfg = TrainConfig::subset(4);
        cfg.epochs = 10;
        cfg.resample_negatives = true;
        let a = train_subset(&parts, &cfg).unwrap();
        let b = train_subset(&parts, &cfg).unwrap();
        assert_eq!(a.losses, b.losses);
    }

    #[test]
    fn config_file_round_trip() {
        let text = "
# training setup
mode=subset
dim=16
epochs=50
learning_rate=0.1
regularization=0.001
seed=7
negatives_per_positive=2
resample_negatives=true
";
        let cfg = TrainConfig::parse_str(text).unwrap();
        assert_eq!(cfg.mode, TrainMode::SubSet);
        assert_eq!(cfg.dim, 16);
        assert_eq!(cfg.epochs, 50);
        assert_eq!(cfg.learning_rate, 0.1);
        assert_eq!(cfg.negatives_per_positive, 2);
        assert!(cfg.resample_negatives);
    }

    #[test]
    fn config_rejects_unknown_and_duplicate_keys() {
        assert!(matches!(
            TrainConfig::parse_str("mode=fullset\ndim=4\nbogus=1\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            TrainConfig::parse_str("mode=fullset\ndim=4\ndim=5\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn labeled_pair_rejects_fractional_labels() {
        assert!(LabeledPair::new(EntityId(0), EntityId(1), 0.5).is_err());
    }
}
