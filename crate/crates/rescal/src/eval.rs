//! 0-1 evaluation over the three partitions and table rendering.
//!
//! Every pair is scored on both relation slices; the model earns a point on
//! a pair from `E` when the `Present` slice wins strictly, and on a pair
//! from `E^c` or `E^rev` when it does not. A report is one table cell:
//! three accuracies for one trained model.

use crate::error::{Error, Result};
use crate::graph::{EdgePartitions, EntityId, Relation};
use crate::model::RescalModel;
use crate::train::TrainMode;

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Evaluate `E^c` exactly up to this many pairs, then fall back to a
    /// uniform sample of this size.
    pub ec_cap: usize,
    /// Seed for the fallback sample.
    pub ec_sample_seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            ec_cap: 10_000_000,
            ec_sample_seed: 0x5eed,
        }
    }
}

/// Accuracies for one trained model, as fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub acc_e: f64,
    pub acc_ec: f64,
    pub acc_erev: f64,
    pub e_size: usize,
    pub ec_size: usize,
    pub erev_size: usize,
    /// Pairs of `E^c` actually scored; differs from `ec_size` in sampled mode.
    pub ec_evaluated: usize,
    pub ec_exact: bool,
    /// Training seed of the run this report describes; filled by the caller.
    pub seed: u64,
    /// Free-form echo of the configuration that produced the run.
    pub config_echo: String,
}

/// Precomputed per-entity products so each pair costs one dot product per
/// slice instead of a matrix-vector multiply.
struct Scorer {
    d: usize,
    emb: Vec<f64>,
    p_absent: Vec<f64>,
    p_present: Vec<f64>,
}

impl Scorer {
    fn new(model: &RescalModel) -> Self {
        let emb = model.embeddings();
        Self {
            d: model.dim(),
            emb: emb.as_slice().to_vec(),
            p_absent: (model.relation(Relation::Absent) * emb).as_slice().to_vec(),
            p_present: (model.relation(Relation::Present) * emb)
                .as_slice()
                .to_vec(),
        }
    }

    #[inline]
    fn related(&self, sub: usize, obj: usize) -> bool {
        let a = &self.emb[sub * self.d..(sub + 1) * self.d];
        let p1 = &self.p_present[obj * self.d..(obj + 1) * self.d];
        let p0 = &self.p_absent[obj * self.d..(obj + 1) * self.d];
        dot(a, p1) > dot(a, p0)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fraction of pairs whose classification equals `expected`.
pub fn accuracy(
    model: &RescalModel,
    pairs: &[(EntityId, EntityId)],
    expected: bool,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptySet);
    }
    for &(s, o) in pairs {
        if s.index() >= model.num_entities() || o.index() >= model.num_entities() {
            return Err(Error::InvalidArgument(format!(
                "pair ({s},{o}) out of range for V={}",
                model.num_entities()
            )));
        }
    }
    let scorer = Scorer::new(model);
    let correct = pairs
        .iter()
        .filter(|&&(s, o)| scorer.related(s.index(), o.index()) == expected)
        .count();
    Ok(correct as f64 / pairs.len() as f64)
}

/// Scores `E` (expected related), `E^c`, and `E^rev` (both expected
/// unrelated). `seed` and `config_echo` in the result are left for the
/// caller to fill.
pub fn evaluate_all(
    model: &RescalModel,
    parts: &EdgePartitions,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if model.num_entities() != parts.num_vertices() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} entities but the graph has {} vertices",
            model.num_entities(),
            parts.num_vertices()
        )));
    }
    if parts.e().is_empty() {
        return Err(Error::EmptySet);
    }
    let scorer = Scorer::new(model);

    let count_over = |pairs: &mut dyn Iterator<Item = (EntityId, EntityId)>| -> usize {
        pairs
            .filter(|&(s, o)| !scorer.related(s.index(), o.index()))
            .count()
    };

    let e_size = parts.e().len();
    let correct_e = parts
        .e()
        .iter()
        .filter(|&&(s, o)| scorer.related(s.index(), o.index()))
        .count();
    let correct_erev = count_over(&mut parts.erev().iter().copied());

    let ec_size = parts.ec_len();
    let (ec_evaluated, correct_ec, ec_exact) = if ec_size <= opts.ec_cap {
        (ec_size, count_over(&mut parts.ec_pairs()), true)
    } else {
        let sample = parts.sample_ec(opts.ec_cap, opts.ec_sample_seed)?;
        (sample.len(), count_over(&mut sample.into_iter()), false)
    };

    Ok(EvalReport {
        acc_e: correct_e as f64 / e_size as f64,
        acc_ec: correct_ec as f64 / ec_evaluated as f64,
        acc_erev: correct_erev as f64 / e_size as f64,
        e_size,
        ec_size,
        erev_size: parts.erev().len(),
        ec_evaluated,
        ec_exact,
        seed: 0,
        config_echo: String::new(),
    })
}

/// Per-seed reports plus their mean and sample standard deviation, ordered
/// `(E, E^c, E^rev)`.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub reports: Vec<EvalReport>,
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl RunSummary {
    pub fn count(&self) -> usize {
        self.reports.len()
    }
}

pub fn aggregate_runs(reports: &[EvalReport]) -> Result<RunSummary> {
    if reports.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = reports.len() as f64;
    let columns = |r: &EvalReport| [r.acc_e, r.acc_ec, r.acc_erev];
    let mut mean = [0.0; 3];
    for r in reports {
        for (m, x) in mean.iter_mut().zip(columns(r)) {
            *m += x / n;
        }
    }
    let mut std = [0.0; 3];
    if reports.len() > 1 {
        for r in reports {
            for ((s, m), x) in std.iter_mut().zip(mean).zip(columns(r)) {
                *s += (x - m) * (x - m);
            }
        }
        for s in &mut std {
            *s = (*s / (n - 1.0)).sqrt();
        }
    }
    Ok(RunSummary {
        reports: reports.to_vec(),
        mean,
        std,
    })
}

/// One `(mode, V, d)` cell of a results table. `summary: None` marks a cell
/// whose runs failed; it still gets a row.
#[derive(Debug, Clone)]
pub struct TableCell {
    pub mode: TrainMode,
    pub num_vertices: usize,
    pub dim: usize,
    pub summary: Option<RunSummary>,
}

pub const CSV_HEADER: &str =
    "mode,V,d,seed_count,acc_E_mean,acc_E_std,acc_Ec_mean,acc_Ec_std,acc_Erev_mean,acc_Erev_std";

/// Renders cells as CSV, percentages with one decimal, rows ordered by
/// (mode, d, V) so dimension sweeps group the way the accuracy tables read.
pub fn render_table(cells: &[TableCell]) -> String {
    let mut ordered: Vec<&TableCell> = cells.iter().collect();
    ordered.sort_by_key(|c| (c.mode.as_str(), c.dim, c.num_vertices));
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for cell in ordered {
        out.push_str(&format!(
            "{},{},{},",
            cell.mode.as_str(),
            cell.num_vertices,
            cell.dim
        ));
        match &cell.summary {
            Some(s) => {
                out.push_str(&s.count().to_string());
                for i in 0..3 {
                    out.push_str(&format!(",{:.1},{:.1}", 100.0 * s.mean[i], 100.0 * s.std[i]));
                }
            }
            None => out.push_str("0,NA,NA,NA,NA,NA,NA"),
        }
        out.push('\n');
    }
    out
}

/// Plain-text rendering of the same cells for terminal display.
pub fn pretty_table(cells: &[TableCell]) -> String {
    let csv = render_table(cells);
    let rows: Vec<Vec<String>> = csv
        .lines()
        .map(|l| l.split(',').map(|s| s.to_string()).collect())
        .collect();
    let cols = rows[0].len();
    let mut widths = vec![0; cols];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &rows {
        for (i, (w, cell)) in widths.iter().zip(row).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(&format!("{cell:>w$}"));
        }
        out.push('\n');
    }
    out
}
