//! Executable transitivity theory for square matrices.
//!
//! Call a matrix `M` *transitive* when every vector triple `(a, b, c)` with
//! `a^T M b > 0` and `b^T M c > 0` also has `a^T M c > 0`. A bilinear pair
//! classifier can propagate relation chains for arbitrary embeddings exactly
//! when its difference matrix is transitive, and every transitive matrix is
//! symmetric. This module makes that fact operational in both directions:
//! it measures how asymmetric a matrix is, and for any measurably asymmetric
//! matrix it constructs a concrete triple certifying that transitivity
//! fails. All certificates are re-verified numerically before they are
//! returned; search failure is an error, never a fabricated witness.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default tolerance separating genuine sign information from floating-point
/// noise in the bilinear forms.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Three vectors certifying a transitivity violation: the first two bilinear
/// values clear the tolerance and the third is not positive.
#[derive(Debug, Clone)]
pub struct WitnessTriple {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    /// `(a^T M b, b^T M c, a^T M c)` as certified.
    pub values: (f64, f64, f64),
}

impl WitnessTriple {
    /// Recomputes the three bilinear forms and checks the certificate.
    pub fn verify(&self, m: &DMatrix<f64>, tol: f64) -> bool {
        let (v1, v2, v3) = witness_values(m, &self.a, &self.b, &self.c);
        v1 > tol && v2 > tol && v3 <= 0.0
    }
}

impl std::fmt::Display for WitnessTriple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let row = |v: &DVector<f64>| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(f, "a: {}", row(&self.a))?;
        writeln!(f, "b: {}", row(&self.b))?;
        writeln!(f, "c: {}", row(&self.c))?;
        write!(
            f,
            "values: {} {} {}",
            self.values.0, self.values.1, self.values.2
        )
    }
}

pub fn witness_values(
    m: &DMatrix<f64>,
    a: &DVector<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
) -> (f64, f64, f64) {
    ((m * b).dot(a), (m * c).dot(b), (m * c).dot(a))
}

fn certify(m: &DMatrix<f64>, a: DVector<f64>, b: DVector<f64>, c: DVector<f64>, tol: f64) -> Option<WitnessTriple> {
    // normalize so the certificate's scale is set by the tolerance, not by
    // the magnitude of the inputs; all three forms scale multiplicatively
    let mut a = a;
    let mut b = b;
    let mut c = c;
    for v in [&mut a, &mut b, &mut c] {
        let n = v.norm();
        if n > 0.0 {
            *v /= n;
        }
    }
    let (v1, v2, v3) = witness_values(m, &a, &b, &c);
    if v1 <= 0.0 || v2 <= 0.0 || v3 > 0.0 {
        return None;
    }
    let smallest = v1.min(v2);
    if smallest <= tol {
        // scale all three vectors so the hypotheses clear the tolerance
        let lambda = (4.0 * tol / smallest).sqrt().max(1.0);
        a *= lambda;
        b *= lambda;
        c *= lambda;
    }
    let values = witness_values(m, &a, &b, &c);
    let triple = WitnessTriple { a, b, c, values };
    triple.verify(m, tol).then_some(triple)
}

/// Relative asymmetry `||M - M^T||_F / max(||M||_F, 1e-12)`; zero exactly
/// for symmetric matrices and scale invariant otherwise.
pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).norm() / m.norm().max(1e-12)
}

/// Draws `n_samples` unit-vector triples and returns the first certified
/// violation, if any. Finding none refutes nothing; it is evidence only.
pub fn sampled_transitivity_check(
    m: &DMatrix<f64>,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> Option<WitnessTriple> {
    let d = m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_samples {
        let a = sphere_vector(&mut rng, d);
        let b = sphere_vector(&mut rng, d);
        let c = sphere_vector(&mut rng, d);
        let (v1, v2, v3) = witness_values(m, &a, &b, &c);
        if v1 > tol && v2 > tol && v3 <= 0.0 {
            return certify(m, a, b, c, tol);
        }
    }
    None
}

fn sphere_vector(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| gaussian(rng));
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// Box-Muller draw; two uniforms in, one standard normal out.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// For non-parallel `x`, `y`, returns `z = alpha x + beta y` with
/// `z^T x = 1` and `z^T y = -1`, the coefficients coming from the
/// Cauchy-Schwarz discriminant `D = (x^T y)^2 - (x^T x)(y^T y)`.
pub fn separating_vector(x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    let xy = x.dot(y);
    let xx = x.dot(x);
    let yy = y.dot(y);
    let disc = xy * xy - xx * yy;
    if disc.abs() <= 1e-12 {
        return Err(Error::ParallelVectors);
    }
    let alpha = -(xy + yy) / disc;
    let beta = (xy + xx) / disc;
    Ok(alpha * x + beta * y)
}

/// The chain probe `c = x, b = Mx, a = Mb`: its two hypothesis values are
/// `||Mb||^2` and `||b||^2`, both non-negative by construction, while the
/// conclusion value equals the quadratic form `b^T M b`. A matrix whose
/// quadratic form goes negative on some `b = Mx` therefore hands over a
/// certified violation; this is also why transitivity forces
/// `x^T M x >= 0` everywhere.
#[derive(Debug, Clone)]
pub struct ChainReport {
    pub x: DVector<f64>,
    pub b: DVector<f64>,
    pub a: DVector<f64>,
    /// `(||Mb||^2, ||b||^2)`.
    pub hypothesis: (f64, f64),
    /// `b^T M b`, which equals `a^T M c` for this triple.
    pub conclusion: f64,
    pub witness: Option<WitnessTriple>,
}

pub fn psd_chain_probe(m: &DMatrix<f64>, x: &DVector<f64>) -> ChainReport {
    let b = m * x;
    let a = m * &b;
    let hypothesis = (a.norm_squared(), b.norm_squared());
    let conclusion = (m * &b).dot(&b);
    // degenerate b = 0 or Mb = 0 never certifies anything
    let witness = if hypothesis.0 > DEFAULT_TOL && hypothesis.1 > DEFAULT_TOL && conclusion <= 0.0
    {
        certify(m, a.clone(), b.clone(), x.clone(), DEFAULT_TOL)
    } else {
        None
    };
    ChainReport {
        x: x.clone(),
        b,
        a,
        hypothesis,
        conclusion,
        witness,
    }
}

/// A pair `(x, y)` with `x^T M y > tol` and `x^T M^T y < -tol`, i.e. a pair
/// on which the matrix and its transpose disagree in sign. Returns `None`
/// for matrices that are symmetric within `tol`.
///
/// Construction: take the top singular pair `(u, v)` of the skew part
/// `S = (M - M^T)/2`, so `u^T S v` is maximal, then cancel the symmetric
/// component by correcting one of the vectors; if both quadratic forms of
/// the symmetric part vanish at `u` and `v`, the mixed pair
/// `(u + v, v - u)` cancels it identically. A seeded random search is the
/// fallback of last resort.
pub fn swap_sign_pair(m: &DMatrix<f64>, tol: f64) -> Option<(DVector<f64>, DVector<f64>)> {
    if symmetry_defect(m) <= tol {
        return None;
    }
    let skew = (m - m.transpose()) / 2.0;
    let sym = (m + m.transpose()) / 2.0;

    let svd = skew.clone().svd(true, true);
    let (mut top, mut top_idx) = (f64::NEG_INFINITY, 0);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > top {
            top = s;
            top_idx = i;
        }
    }
    let u = svd.u.as_ref()?.column(top_idx).clone_owned();
    let v = svd.v_t.as_ref()?.row(top_idx).transpose();

    let cross = (&sym * &v).dot(&u);
    let qf_u = (&sym * &u).dot(&u);
    let qf_v = (&sym * &v).dot(&v);

    let mut candidates: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
    if qf_u.abs() > 1e-14 {
        candidates.push((u.clone(), &v - (cross / qf_u) * &u));
    }
    if qf_v.abs() > 1e-14 {
        candidates.push((&u - (cross / qf_v) * &v, v.clone()));
    }
    candidates.push((&u + &v, &v - &u));
    candidates.push((u.clone(), v.clone()));

    let verified = |x: &DVector<f64>, y: &DVector<f64>| -> Option<(DVector<f64>, DVector<f64>)> {
        let (mut x, mut y) = (x.clone(), y.clone());
        for w in [&mut x, &mut y] {
            let n = w.norm();
            if n <= 1e-14 {
                return None;
            }
            *w /= n;
        }
        let forward = (m * &y).dot(&x);
        let backward = (m.transpose() * &y).dot(&x);
        if forward <= 0.0 || backward >= 0.0 {
            return None;
        }
        let smallest = forward.min(-backward);
        if smallest <= tol {
            let lambda = (4.0 * tol / smallest).sqrt().max(1.0);
            x *= lambda;
            y *= lambda;
        }
        let forward = (m * &y).dot(&x);
        let backward = (m.transpose() * &y).dot(&x);
        (forward > tol && backward < -tol).then_some((x, y))
    };

    for (x, y) in &candidates {
        if let Some(pair) = verified(x, y) {
            return Some(pair);
        }
    }
    // randomized fallback
    let d = m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a5a_0001);
    for _ in 0..200 * d.max(4) {
        let x = sphere_vector(&mut rng, d);
        let y = sphere_vector(&mut rng, d);
        if let Some(pair) = verified(&x, &y) {
            return Some(pair);
        }
    }
    None
}

/// Which construction produced a violation witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessStrategy {
    /// Sign-swap pair with a non-negative quadratic form at one endpoint.
    SwapPair,
    /// Non-negative eigendirection of the symmetric part, skew-coupled.
    SymmetricEigen,
    /// Negative-definite symmetric part, resolved through its inverse.
    NegativeDefinite,
    /// Chain probe `c, Mc, M(Mc)` over sampled directions.
    ChainProbe,
    /// Plain sampled search.
    Sampled,
}

impl WitnessStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            WitnessStrategy::SwapPair => "swap-pair",
            WitnessStrategy::SymmetricEigen => "symmetric-eigendirection",
            WitnessStrategy::NegativeDefinite => "negative-definite-inverse",
            WitnessStrategy::ChainProbe => "chain-probe",
            WitnessStrategy::Sampled => "sampled",
        }
    }
}

/// Constructs a certified transitivity violation for any matrix whose
/// symmetry defect exceeds `tol`. Asymmetry guarantees one exists; the
/// construction chain below finds it deterministically in practice, and the
/// final sampled fallback keeps the function honest: it errors out rather
/// than return an unverified triple.
pub fn transitivity_violation_witness(m: &DMatrix<f64>, tol: f64) -> Result<WitnessTriple> {
    violation_witness_detailed(m, tol).map(|(w, _)| w)
}

/// Same as [`transitivity_violation_witness`], also reporting which
/// construction succeeded, so callers can log fallback frequency.
pub fn violation_witness_detailed(
    m: &DMatrix<f64>,
    tol: f64,
) -> Result<(WitnessTriple, WitnessStrategy)> {
    if symmetry_defect(m) <= tol {
        return Err(Error::SymmetricInput);
    }
    let sym = (m + m.transpose()) / 2.0;

    // (i) a sign-swap pair (x, y) gives x^T M y > 0 and y^T M (-x) > 0; if
    // the quadratic form at x is non-negative, (x, y, -x) closes the triple
    // with a^T M c = -x^T M x <= 0. Symmetrically for (y, -x, -y).
    if let Some((x, y)) = swap_sign_pair(m, tol) {
        if (&sym * &x).dot(&x) >= 0.0 {
            if let Some(w) = certify(m, x.clone(), y.clone(), -&x, tol) {
                return Ok((w, WitnessStrategy::SwapPair));
            }
        }
        if (&sym * &y).dot(&y) >= 0.0 {
            if let Some(w) = certify(m, y.clone(), -&x, -&y, tol) {
                return Ok((w, WitnessStrategy::SwapPair));
            }
        }
    }

    // (ii) any direction p with p^T Sym p >= 0 whose skew image is not
    // parallel to its symmetric image yields (p, q, -p) with q orthogonal
    // to Sym p inside span{S^T p}.
    let skew = (m - m.transpose()) / 2.0;
    let eig = SymmetricEigen::new(sym.clone());
    let mut all_negative = true;
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < 0.0 {
            continue;
        }
        all_negative = false;
        let p = eig.eigenvectors.column(i).clone_owned();
        let g = skew.transpose() * &p;
        let h = &sym * &p;
        let q = if h.norm_squared() > 1e-28 {
            &g - (g.dot(&h) / h.norm_squared()) * &h
        } else {
            g.clone()
        };
        if q.norm() > 1e-12 && g.dot(&q) > 0.0 {
            if let Some(w) = certify(m, p.clone(), q, -&p, tol) {
                return Ok((w, WitnessStrategy::SymmetricEigen));
            }
        }
    }

    // (iii) strictly negative-definite symmetric part: every c = a closes
    // the triple since a^T M a < 0, and b = Sym^{-1} a makes both
    // hypotheses equal ||a||^2 once the direction a is rotated to null the
    // skew-coupled form a^T K a, K = sym(S Sym^{-1}); K is trace-free, so
    // such a direction always exists.
    if all_negative {
        let inv_diag: Vec<f64> = eig.eigenvalues.iter().map(|&l| 1.0 / l).collect();
        let q = &eig.eigenvectors;
        let apply_inv = |v: &DVector<f64>| -> DVector<f64> {
            let mut coeffs = q.transpose() * v;
            for (c, inv) in coeffs.iter_mut().zip(&inv_diag) {
                *c *= *inv;
            }
            q * coeffs
        };
        // K = sym(S T) with T = Sym^{-1}, built column by column
        let t_cols: Vec<DVector<f64>> = (0..m.ncols())
            .map(|j| {
                let mut e = DVector::zeros(m.nrows());
                e[j] = 1.0;
                apply_inv(&e)
            })
            .collect();
        let mut stm = DMatrix::zeros(m.nrows(), m.ncols());
        for (j, t) in t_cols.iter().enumerate() {
            stm.column_mut(j).copy_from(&(&skew * t));
        }
        let k = (&stm + stm.transpose()) / 2.0;
        let keig = SymmetricEigen::new(k);
        let (mut imax, mut imin) = (0, 0);
        for (i, &l) in keig.eigenvalues.iter().enumerate() {
            if l > keig.eigenvalues[imax] {
                imax = i;
            }
            if l < keig.eigenvalues[imin] {
                imin = i;
            }
        }
        let (lmax, lmin) = (keig.eigenvalues[imax], keig.eigenvalues[imin]);
        let a = if lmax <= 0.0 || lmin >= 0.0 {
            // K has one sign only; being trace-free it is then ~0, so any
            // direction has a negligible coupled form
            keig.eigenvectors.column(imax).clone_owned()
        } else {
            let t = (lmax / -lmin).sqrt().atan();
            t.cos() * keig.eigenvectors.column(imax) + t.sin() * keig.eigenvectors.column(imin)
        };
        let b = apply_inv(&a);
        if let Some(w) = certify(m, a.clone(), b, a.clone(), tol) {
            return Ok((w, WitnessStrategy::NegativeDefinite));
        }
    }

    // (iv) chain probes over sampled directions
    let d = m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a5a_0002);
    for _ in 0..64 * d.max(2) {
        let x = sphere_vector(&mut rng, d);
        if let Some(w) = psd_chain_probe(m, &x).witness {
            return Ok((w, WitnessStrategy::ChainProbe));
        }
    }

    // (v) last resort: plain sampling
    if let Some(w) = sampled_transitivity_check(m, 200_000, tol, 0x5a5a_0003) {
        return Ok((w, WitnessStrategy::Sampled));
    }
    Err(Error::WitnessSearchExhausted)
}

/// The probe-point scalar `x^T M1 M2 x / x^T M2 M2 x`; constant in `x`
/// (and equal to the proportionality factor) whenever `M1 = lambda M2`.
pub fn proportionality_factor(
    m1: &DMatrix<f64>,
    m2: &DMatrix<f64>,
    x: &DVector<f64>,
) -> Result<f64> {
    let m2x = m2 * x;
    let denom = (m2 * &m2x).dot(x);
    if denom.abs() <= 1e-12 {
        return Err(Error::UndefinedFactor);
    }
    Ok((m1 * &m2x).dot(x) / denom)
}

/// Parses a matrix from plain text: one row per line, entries separated by
/// whitespace.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_ascii_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", lineno + 1)))?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::InvalidArgument(format!(
                    "line {}: expected {} entries, got {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rotation2() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
    }

    fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(d, d, |_, _| gaussian(rng))
    }

    #[test]
    fn defect_is_zero_for_symmetric_matrices() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.5, 1.0, -1.0, 3.0, 0.5, 3.0, 0.0]);
        assert_eq!(symmetry_defect(&m), 0.0);
    }

    #[test]
    fn defect_of_plane_rotation_is_two() {
        // ||M - M^T|| = 2*sqrt(2), ||M|| = sqrt(2)
        assert_relative_eq!(symmetry_defect(&rotation2()), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn defect_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_matrix(&mut rng, 5);
        for lambda in [0.25, 3.0, 1e6] {
            assert_relative_eq!(
                symmetry_defect(&(lambda * &m)),
                symmetry_defect(&m),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn rank_one_psd_matrix_yields_no_sampled_violation() {
        // M = u u^T: a^T M b = (a.u)(b.u), so the two hypotheses force
        // (a.u)(c.u) > 0 by multiplying signs; no triple can violate
        let u = DVector::from_vec(vec![0.6, -0.3, 1.2]);
        let m = &u * u.transpose();
        assert!(sampled_transitivity_check(&m, 20_000, DEFAULT_TOL, 99).is_none());
    }

    #[test]
    fn identity_is_not_transitive_and_sampling_finds_it() {
        // hand instance: a=(1,0), b=(1,1), c=(-0.5,1) gives (1, 0.5, -0.5)
        let m = DMatrix::<f64>::identity(2, 2);
        let a = DVector::from_vec(vec![1.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        let c = DVector::from_vec(vec![-0.5, 1.0]);
        assert_eq!(witness_values(&m, &a, &b, &c), (1.0, 0.5, -0.5));
        let found = sampled_transitivity_check(&m, 10_000, DEFAULT_TOL, 7).unwrap();
        assert!(found.verify(&m, DEFAULT_TOL));
    }

    #[test]
    fn zero_matrix_never_satisfies_the_hypotheses() {
        let m = DMatrix::<f64>::zeros(3, 3);
        assert!(sampled_transitivity_check(&m, 5_000, DEFAULT_TOL, 1).is_none());
    }

    #[test]
    fn separating_vector_on_unit_axes() {
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let y = DVector::from_vec(vec![0.0, 1.0]);
        let z = separating_vector(&x, &y).unwrap();
        assert_relative_eq!(z[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(z[1], -1.0, max_relative = 1e-14);
    }

    #[test]
    fn separating_vector_rejects_parallel_inputs() {
        let y = DVector::from_vec(vec![0.3, -0.4, 0.5]);
        let x = 2.0 * &y;
        assert!(matches!(
            separating_vector(&x, &y),
            Err(Error::ParallelVectors)
        ));
    }

    #[test]
    fn separating_vector_hits_both_targets_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let d = 2 + (rng.random::<u32>() % 6) as usize;
            let x = sphere_vector(&mut rng, d);
            let y = sphere_vector(&mut rng, d);
            if (x.dot(&y).powi(2) - x.dot(&x) * y.dot(&y)).abs() <= 1e-12 {
                continue;
            }
            let z = separating_vector(&x, &y).unwrap();
            assert!((z.dot(&x) - 1.0).abs() <= 1e-9);
            assert!((z.dot(&y) + 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn chain_probe_on_identity_never_witnesses() {
        let m = DMatrix::<f64>::identity(3, 3);
        let x = DVector::from_vec(vec![0.2, -0.7, 0.4]);
        let report = psd_chain_probe(&m, &x);
        assert!(report.witness.is_none());
        assert!(report.conclusion >= 0.0);
        assert_relative_eq!(report.conclusion, x.norm_squared(), max_relative = 1e-12);
    }

    #[test]
    fn chain_probe_on_zero_matrix_takes_degenerate_branch() {
        let m = DMatrix::<f64>::zeros(3, 3);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let report = psd_chain_probe(&m, &x);
        assert_eq!(report.hypothesis, (0.0, 0.0));
        assert!(report.witness.is_none());
    }

    #[test]
    fn chain_probe_certifies_on_indefinite_quadratic_form() {
        // rotation plus a small negative symmetric part: quadratic form is
        // negative everywhere while the chain hypotheses stay positive
        let m = rotation2() - 0.2 * DMatrix::<f64>::identity(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let found = (0..200).find_map(|_| {
            let x = sphere_vector(&mut rng, 2);
            psd_chain_probe(&m, &x).witness
        });
        let w = found.expect("a chain witness should exist for this matrix");
        assert!(w.verify(&m, DEFAULT_TOL));
    }

    #[test]
    fn swap_sign_pair_on_plane_rotation() {
        let m = rotation2();
        let (x, y) = swap_sign_pair(&m, DEFAULT_TOL).unwrap();
        let forward = (&m * &y).dot(&x);
        let backward = (m.transpose() * &y).dot(&x);
        assert!(forward > DEFAULT_TOL);
        assert!(backward < -DEFAULT_TOL);
        assert_relative_eq!(forward, -backward, max_relative = 1e-10);
    }

    #[test]
    fn swap_sign_pair_declines_symmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -1.0]);
        assert!(swap_sign_pair(&m, DEFAULT_TOL).is_none());
    }

    #[test]
    fn swap_sign_pair_roles_flip_under_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let m = random_matrix(&mut rng, 4);
            if symmetry_defect(&m) < 0.1 {
                continue;
            }
            let (x, y) = swap_sign_pair(&m, DEFAULT_TOL).unwrap();
            let mt = m.transpose();
            // (y, x) on M^T satisfies the same two inequalities
            assert!((&mt * &x).dot(&y) > DEFAULT_TOL);
            assert!((mt.transpose() * &x).dot(&y) < -DEFAULT_TOL);
        }
    }

    #[test]
    fn witness_for_plane_rotation_matches_hand_construction() {
        let m = rotation2();
        let w = transitivity_violation_witness(&m, DEFAULT_TOL).unwrap();
        assert!(w.verify(&m, DEFAULT_TOL));
        // conclusion value is exactly the (negated) quadratic form: zero here
        assert_eq!(w.values.2, 0.0);
        assert_relative_eq!(w.values.0, w.values.1, max_relative = 1e-10);
    }

    #[test]
    fn witness_rejects_symmetric_input() {
        let m = DMatrix::<f64>::identity(4, 4);
        assert!(matches!(
            transitivity_violation_witness(&m, DEFAULT_TOL),
            Err(Error::SymmetricInput)
        ));
    }

    #[test]
    fn witness_survives_negative_definite_symmetric_part() {
        // symmetric part -I dominates; no direction has x^T M x >= 0
        let m = rotation2() - 3.0 * DMatrix::<f64>::identity(2, 2);
        let (w, _strategy) = violation_witness_detailed(&m, DEFAULT_TOL).unwrap();
        assert!(w.verify(&m, DEFAULT_TOL));
    }

    #[test]
    fn witnesses_verify_across_random_asymmetric_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut produced = 0;
        while produced < 40 {
            let d = 2 + (rng.random::<u32>() % 7) as usize;
            let m = random_matrix(&mut rng, d);
            if symmetry_defect(&m) <= 0.1 {
                continue;
            }
            let w = transitivity_violation_witness(&m, DEFAULT_TOL).unwrap();
            assert!(w.verify(&m, DEFAULT_TOL));
            produced += 1;
        }
    }

    #[test]
    fn proportionality_factor_recovers_the_scalar() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m2 = random_matrix(&mut rng, 4);
        let m1 = 2.0 * &m2;
        for _ in 0..20 {
            let x = sphere_vector(&mut rng, 4);
            match proportionality_factor(&m1, &m2, &x) {
                Ok(f) => assert_relative_eq!(f, 2.0, max_relative = 1e-9),
                Err(Error::UndefinedFactor) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn proportionality_factor_is_one_for_identical_matrices() {
        let m = DMatrix::<f64>::identity(3, 3);
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert_relative_eq!(
            proportionality_factor(&m, &m, &x).unwrap(),
            1.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn proportionality_factor_errors_on_vanishing_denominator() {
        let m2 = DMatrix::<f64>::zeros(2, 2);
        let m1 = DMatrix::<f64>::identity(2, 2);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            proportionality_factor(&m1, &m2, &x),
            Err(Error::UndefinedFactor)
        ));
    }

    #[test]
    fn proportionality_factor_is_constant_over_probe_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let m2 = random_matrix(&mut rng, 5);
            let lambda = 0.1 + rng.random::<f64>() * 5.0;
            let m1 = lambda * &m2;
            for _ in 0..100 {
                let x = sphere_vector(&mut rng, 5);
                if let Ok(f) = proportionality_factor(&m1, &m2, &x) {
                    assert_relative_eq!(f, lambda, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn matrix_text_round_trip() {
        let m = rotation2();
        let text = format_matrix(&m);
        assert_eq!(text, "0 1\n-1 0\n");
        let back = parse_matrix(&text).unwrap();
        assert_eq!(back, m);
        assert!(parse_matrix("1 2\n3\n").is_err());
        assert!(parse_matrix("").is_err());
    }
}
