//! The bilinear relational model: one shared d-vector per entity plus one
//! d x d matrix per relation slot. The score of a candidate fact
//! `(v, r, v')` is the bilinear form `a_v^T M_r a_v'`, and a pair is
//! predicted related when the `Present` slice outscores the `Absent` one.
//!
//! Entity vectors are stored as columns so that each embedding is contiguous
//! in memory; serialization still writes one row per entity.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{EntityId, Relation};

#[derive(Debug, Clone, PartialEq)]
pub struct RescalModel {
    dim: usize,
    /// d x V; column v is the embedding of entity v.
    embeddings: DMatrix<f64>,
    /// One d x d matrix per relation, indexed by `Relation::index`.
    relations: Vec<DMatrix<f64>>,
}

/// Default initialization scale `1/sqrt(d)`, which keeps initial scores O(1)
/// regardless of dimension.
pub fn default_init_scale(dim: usize) -> f64 {
    1.0 / (dim as f64).sqrt()
}

impl RescalModel {
    /// Fresh model with entries drawn i.i.d. uniform from `(-scale, scale)`,
    /// deterministic for a fixed seed. `scale = 0` yields all zeros.
    pub fn init(
        num_entities: usize,
        num_relations: usize,
        dim: usize,
        seed: u64,
        scale: f64,
    ) -> Result<Self> {
        if num_entities == 0 || num_relations == 0 || dim == 0 {
            return Err(Error::InvalidArgument(
                "entity count, relation count, and dimension must all be >= 1".into(),
            ));
        }
        if !scale.is_finite() || scale < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "init scale must be finite and non-negative, got {scale}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |buf: &mut [f64]| {
            if scale == 0.0 {
                buf.fill(0.0);
            } else {
                for x in buf.iter_mut() {
                    *x = rng.random_range(-scale..scale);
                }
            }
        };
        let mut embeddings = DMatrix::zeros(dim, num_entities);
        draw(embeddings.as_mut_slice());
        let mut relations = Vec::with_capacity(num_relations);
        for _ in 0..num_relations {
            let mut m = DMatrix::zeros(dim, dim);
            draw(m.as_mut_slice());
            relations.push(m);
        }
        Ok(Self {
            dim,
            embeddings,
            relations,
        })
    }

    pub fn from_parts(embeddings: DMatrix<f64>, relations: Vec<DMatrix<f64>>) -> Result<Self> {
        let dim = embeddings.nrows();
        if dim == 0 || embeddings.ncols() == 0 || relations.is_empty() {
            return Err(Error::InvalidArgument("empty model parts".into()));
        }
        for m in &relations {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "relation matrix is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        let finite = embeddings.iter().all(|x| x.is_finite())
            && relations.iter().all(|m| m.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::InvalidArgument(
                "model parameters must be finite".into(),
            ));
        }
        Ok(Self {
            dim,
            embeddings,
            relations,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn num_entities(&self) -> usize {
        self.embeddings.ncols()
    }

    #[inline]
    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn embeddings(&self) -> &DMatrix<f64> {
        &self.embeddings
    }

    pub fn embeddings_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.embeddings
    }

    pub fn entity(&self, v: EntityId) -> DVector<f64> {
        self.embeddings.column(v.index()).clone_owned()
    }

    pub fn relation(&self, r: Relation) -> &DMatrix<f64> {
        &self.relations[r.index()]
    }

    pub fn relation_mut(&mut self, r: Relation) -> &mut DMatrix<f64> {
        &mut self.relations[r.index()]
    }

    /// Split borrow for the optimizers.
    pub(crate) fn parts_mut(&mut self) -> (&mut DMatrix<f64>, &mut [DMatrix<f64>]) {
        (&mut self.embeddings, &mut self.relations)
    }

    fn check_entity(&self, v: EntityId) -> Result<()> {
        if v.index() >= self.num_entities() {
            return Err(Error::InvalidArgument(format!(
                "entity {v} out of range for V={}",
                self.num_entities()
            )));
        }
        Ok(())
    }

    fn check_relations(&self) -> Result<()> {
        if self.relations.len() < 2 {
            return Err(Error::InvalidArgument(
                "pair prediction needs both relation slots".into(),
            ));
        }
        Ok(())
    }

    /// Bilinear score `a_v^T M_r a_v'`.
    pub fn score(&self, sub: EntityId, rel: Relation, obj: EntityId) -> Result<f64> {
        self.check_entity(sub)?;
        self.check_entity(obj)?;
        if rel.index() >= self.relations.len() {
            return Err(Error::InvalidArgument(
                "relation slot out of range".into(),
            ));
        }
        Ok(self.score_unchecked(sub.index(), rel.index(), obj.index()))
    }

    #[inline]
    pub(crate) fn score_unchecked(&self, sub: usize, rel: usize, obj: usize) -> f64 {
        let a = self.embeddings.column(sub);
        let b = self.embeddings.column(obj);
        (&self.relations[rel] * b).dot(&a)
    }

    /// Highest-scoring relation slot; exact ties go to `Absent`.
    pub fn predict_relation(&self, sub: EntityId, obj: EntityId) -> Result<Relation> {
        Ok(if self.classify_pair(sub, obj)? {
            Relation::Present
        } else {
            Relation::Absent
        })
    }

    /// `true` iff the `Present` score strictly beats the `Absent` score.
    pub fn classify_pair(&self, sub: EntityId, obj: EntityId) -> Result<bool> {
        self.check_relations()?;
        let s1 = self.score(sub, Relation::Present, obj)?;
        let s0 = self.score(sub, Relation::Absent, obj)?;
        Ok(s1 > s0)
    }

    /// `M_present - M_absent`, the matrix whose bilinear sign drives every
    /// pair decision.
    pub fn difference_matrix(&self) -> Result<DMatrix<f64>> {
        self.check_relations()?;
        Ok(self.relation(Relation::Present) - self.relation(Relation::Absent))
    }

    /// Writes the model as a line-oriented text container; floats use the
    /// shortest representation that parses back bit-exactly.
    pub fn write_to<W: Write>(&self, mut w: W, meta: &[(String, String)]) -> Result<()> {
        writeln!(w, "rescal-model 1")?;
        writeln!(w, "dim {}", self.dim)?;
        writeln!(w, "entities {}", self.num_entities())?;
        writeln!(w, "relations {}", self.num_relations())?;
        for (k, v) in meta {
            writeln!(w, "meta {k}={v}")?;
        }
        writeln!(w, "embeddings")?;
        for v in 0..self.num_entities() {
            write_row(&mut w, self.embeddings.column(v).iter())?;
        }
        for (k, m) in self.relations.iter().enumerate() {
            writeln!(w, "relation {k}")?;
            for i in 0..self.dim {
                write_row(&mut w, m.row(i).iter())?;
            }
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn save(&self, path: &Path, meta: &[(String, String)]) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(BufWriter::new(file), meta)
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<(Self, Vec<(String, String)>)> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::ModelFormat("unexpected end of file".into()))?
                .map_err(Error::from)
        };
        if next()?.trim() != "rescal-model 1" {
            return Err(Error::ModelFormat("unknown header".into()));
        }
        let dim = parse_header_field(&next()?, "dim")?;
        let entities = parse_header_field(&next()?, "entities")?;
        let relations = parse_header_field(&next()?, "relations")?;
        let mut meta = Vec::new();
        let mut line = next()?;
        while let Some(kv) = line.strip_prefix("meta ") {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::ModelFormat(format!("bad meta line `{kv}`")))?;
            meta.push((k.to_string(), v.to_string()));
            line = next()?;
        }
        if line.trim() != "embeddings" {
            return Err(Error::ModelFormat("expected `embeddings` section".into()));
        }
        let mut emb = DMatrix::zeros(dim, entities);
        for v in 0..entities {
            let row = parse_float_row(&next()?, dim)?;
            emb.column_mut(v).copy_from_slice(&row);
        }
        let mut rel = Vec::with_capacity(relations);
        for k in 0..relations {
            if next()?.trim() != format!("relation {k}") {
                return Err(Error::ModelFormat(format!("expected `relation {k}`")));
            }
            let mut m = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                let row = parse_float_row(&next()?, dim)?;
                for (j, x) in row.into_iter().enumerate() {
                    m[(i, j)] = x;
                }
            }
            rel.push(m);
        }
        if next()?.trim() != "end" {
            return Err(Error::ModelFormat("missing `end` marker".into()));
        }
        Ok((Self::from_parts(emb, rel)?, meta))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<(String, String)>)> {
        let file = std::fs::File::open(path)?;
        Self::read_from(BufReader::new(file))
    }
}

fn write_row<'a, W: Write>(w: &mut W, values: impl Iterator<Item = &'a f64>) -> Result<()> {
    let mut first = true;
    for x in values {
        if first {
            write!(w, "{x}")?;
            first = false;
        } else {
            write!(w, " {x}")?;
        }
    }
    writeln!(w)?;
    Ok(())
}

fn parse_header_field(line: &str, key: &str) -> Result<usize> {
    let rest = line
        .strip_prefix(key)
        .ok_or_else(|| Error::ModelFormat(format!("expected `{key} <n>`, got `{line}`")))?;
    rest.trim()
        .parse()
        .map_err(|_| Error::ModelFormat(format!("bad `{key}` value in `{line}`")))
}

fn parse_float_row(line: &str, expect: usize) -> Result<Vec<f64>> {
    let row: Vec<f64> = line
        .split_ascii_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::ModelFormat(format!("bad float: {e}")))?;
    if row.len() != expect {
        return Err(Error::ModelFormat(format!(
            "expected {expect} values per line, got {}",
            row.len()
        )));
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn naive_score(a: &[f64], m: &DMatrix<f64>, b: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            for j in 0..b.len() {
                s += a[i] * m[(i, j)] * b[j];
            }
        }
        s
    }

    #[test]
    fn same_seed_gives_bit_identical_models() {
        let a = RescalModel::init(17, 2, 5, 99, 0.3).unwrap();
        let b = RescalModel::init(17, 2, 5, 99, 0.3).unwrap();
        assert!(a
            .embeddings()
            .iter()
            .zip(b.embeddings().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        for r in Relation::ALL {
            assert!(a
                .relation(r)
                .iter()
                .zip(b.relation(r).iter())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        let c = RescalModel::init(17, 2, 5, 100, 0.3).unwrap();
        assert_ne!(a.embeddings(), c.embeddings());
    }

    #[test]
    fn zero_scale_means_zero_parameters() {
        let m = RescalModel::init(4, 2, 3, 0, 0.0).unwrap();
        assert!(m.embeddings().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn benchmark_shapes() {
        let m = RescalModel::init(2047, 2, 50, 1, 0.1).unwrap();
        assert_eq!(m.num_entities(), 2047);
        assert_eq!(m.dim(), 50);
        assert_eq!(m.relation(Relation::Absent).shape(), (50, 50));
        assert_eq!(m.relation(Relation::Present).shape(), (50, 50));
    }

    #[test]
    fn init_rejects_bad_scale() {
        assert!(RescalModel::init(3, 2, 2, 0, f64::NAN).is_err());
        assert!(RescalModel::init(3, 2, 2, 0, -1.0).is_err());
    }

    #[test]
    fn identity_matrix_scores_unit_vector() {
        let emb = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let rel = vec![DMatrix::zeros(2, 2), DMatrix::identity(2, 2)];
        let m = RescalModel::from_parts(emb, rel).unwrap();
        assert_eq!(
            m.score(EntityId(0), Relation::Present, EntityId(1)).unwrap(),
            1.0
        );
    }

    #[test]
    fn asymmetric_matrix_scores_asymmetrically() {
        // M = [[0,1],[0,0]], a=(1,0), b=(0,1): a^T M b = 1 but b^T M a = 0
        let emb = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let mut upper = DMatrix::zeros(2, 2);
        upper[(0, 1)] = 1.0;
        let m = RescalModel::from_parts(emb, vec![DMatrix::zeros(2, 2), upper]).unwrap();
        assert_eq!(
            m.score(EntityId(0), Relation::Present, EntityId(1)).unwrap(),
            1.0
        );
        assert_eq!(
            m.score(EntityId(1), Relation::Present, EntityId(0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn score_matches_double_loop_oracle() {
        let m = RescalModel::init(6, 2, 4, 5, 0.8).unwrap();
        for sub in 0..6u32 {
            for obj in 0..6u32 {
                for rel in Relation::ALL {
                    let got = m.score(EntityId(sub), rel, EntityId(obj)).unwrap();
                    let a: Vec<f64> = m.entity(EntityId(sub)).iter().copied().collect();
                    let b: Vec<f64> = m.entity(EntityId(obj)).iter().copied().collect();
                    let want = naive_score(&a, m.relation(rel), &b);
                    assert_relative_eq!(got, want, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn score_checks_ranges() {
        let m = RescalModel::init(3, 2, 2, 0, 0.1).unwrap();
        assert!(m.score(EntityId(3), Relation::Present, EntityId(0)).is_err());
        assert!(m.score(EntityId(0), Relation::Present, EntityId(9)).is_err());
    }

    #[test]
    fn prediction_and_ties() {
        let emb = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let m = RescalModel::from_parts(
            emb.clone(),
            vec![DMatrix::zeros(2, 2), DMatrix::identity(2, 2)],
        )
        .unwrap();
        assert_eq!(
            m.predict_relation(EntityId(0), EntityId(0)).unwrap(),
            Relation::Present
        );
        // exactly tied scores predict absence
        let tied = RescalModel::from_parts(emb, vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)])
            .unwrap();
        assert_eq!(
            tied.predict_relation(EntityId(0), EntityId(0)).unwrap(),
            Relation::Absent
        );
        assert!(!tied.classify_pair(EntityId(0), EntityId(0)).unwrap());
    }

    #[test]
    fn classify_agrees_with_argmax_on_random_model() {
        let m = RescalModel::init(8, 2, 3, 21, 0.7).unwrap();
        for sub in 0..8u32 {
            for obj in 0..8u32 {
                let s0 = m.score(EntityId(sub), Relation::Absent, EntityId(obj)).unwrap();
                let s1 = m.score(EntityId(sub), Relation::Present, EntityId(obj)).unwrap();
                let want = if s1 > s0 { Relation::Present } else { Relation::Absent };
                assert_eq!(m.predict_relation(EntityId(sub), EntityId(obj)).unwrap(), want);
                assert_eq!(
                    m.classify_pair(EntityId(sub), EntityId(obj)).unwrap(),
                    want == Relation::Present
                );
            }
        }
    }

    #[test]
    fn difference_matrix_examples() {
        let emb = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let same = RescalModel::from_parts(
            emb.clone(),
            vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)],
        )
        .unwrap();
        assert_eq!(same.difference_matrix().unwrap(), DMatrix::zeros(2, 2));
        let ident = RescalModel::from_parts(
            emb,
            vec![DMatrix::zeros(2, 2), DMatrix::identity(2, 2)],
        )
        .unwrap();
        assert_eq!(ident.difference_matrix().unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn difference_sign_agrees_with_classification() {
        let m = RescalModel::init(40, 2, 6, 77, 0.5).unwrap();
        let diff = m.difference_matrix().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let sub = EntityId(rng.random_range(0..40));
            let obj = EntityId(rng.random_range(0..40));
            let margin = (diff.clone() * m.entity(obj)).dot(&m.entity(sub));
            assert_eq!(m.classify_pair(sub, obj).unwrap(), margin > 0.0);
        }
    }

    #[test]
    fn serialization_round_trips_bit_exactly() {
        let m = RescalModel::init(9, 2, 4, 1234, 0.37).unwrap();
        let meta = vec![("seed".to_string(), "1234".to_string())];
        let mut buf = Vec::new();
        m.write_to(&mut buf, &meta).unwrap();
        let (back, meta_back) = RescalModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(meta_back, meta);
        assert!(m
            .embeddings()
            .iter()
            .zip(back.embeddings().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        for r in Relation::ALL {
            assert!(m
                .relation(r)
                .iter()
                .zip(back.relation(r).iter())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
