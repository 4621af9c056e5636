//! Pointwise exterior algebra over an `m`-dimensional space with a diagonal
//! (possibly indefinite) metric.
//!
//! Basis `k`-forms are indexed by strictly increasing multi-indices, stored as
//! bitmasks over the axes `0..m`, and laid out in lexicographic order of the
//! increasing index tuples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported fiber dimension.
pub const MAX_DIM: usize = 6;

/// Binomial coefficient `C(n, k)`; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Same as [`binomial`] but for possibly negative arguments, zero outside the
/// Pascal triangle.
pub fn binomial_i(n: i64, k: i64) -> usize {
    if n < 0 || k < 0 || k > n {
        0
    } else {
        binomial(n as usize, k as usize)
    }
}

/// A strictly increasing set of axis labels, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub u32);

impl MultiIndex {
    pub fn from_axes(axes: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        let mut last: Option<usize> = None;
        for &a in axes {
            if let Some(l) = last {
                if a <= l {
                    return Err(Error::InvalidArgument(format!(
                        "multi-index {axes:?} is not strictly increasing"
                    )));
                }
            }
            mask |= 1 << a;
            last = Some(a);
        }
        Ok(MultiIndex(mask))
    }

    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, axis: usize) -> bool {
        self.0 & (1 << axis) != 0
    }

    pub fn axes(self) -> impl Iterator<Item = usize> {
        let mask = self.0;
        (0..32).filter(move |a| mask & (1 << a) != 0)
    }

    /// Position of `axis` inside the increasing tuple, if present.
    pub fn position(self, axis: usize) -> Option<usize> {
        if self.contains(axis) {
            Some((self.0 & ((1 << axis) - 1)).count_ones() as usize)
        } else {
            None
        }
    }

    pub fn complement(self, m: usize) -> Self {
        MultiIndex(!self.0 & ((1u32 << m) - 1))
    }

    pub fn with(self, axis: usize) -> Self {
        MultiIndex(self.0 | (1 << axis))
    }

    pub fn without(self, axis: usize) -> Self {
        MultiIndex(self.0 & !(1 << axis))
    }
}

/// All multi-indices of degree `k` in `m` dimensions, in lexicographic order.
pub fn basis(m: usize, k: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(binomial(m, k));
    let mut tuple: Vec<usize> = (0..k).collect();
    if k > m {
        return out;
    }
    loop {
        out.push(MultiIndex(tuple.iter().fold(0, |acc, &a| acc | (1 << a))));
        // advance to the next increasing tuple
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if tuple[i] < m - k + i {
                tuple[i] += 1;
                for j in i + 1..k {
                    tuple[j] = tuple[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Rank of `idx` inside `basis(m, idx.degree())`.
pub fn basis_rank(m: usize, idx: MultiIndex) -> usize {
    // combinatorial number system on the increasing tuple
    let k = idx.degree();
    let mut rank = 0;
    let mut prev: i64 = -1;
    for (i, a) in idx.axes().enumerate() {
        for skipped in (prev + 1) as usize..a {
            rank += binomial(m - skipped - 1, k - i - 1);
        }
        prev = a as i64;
    }
    rank
}

/// Sign of the permutation sorting the concatenation `(I, J)` of two disjoint
/// increasing tuples, i.e. `e_I ∧ e_J = shuffle_sign(I, J) e_{I∪J}`.
pub fn shuffle_sign(i: MultiIndex, j: MultiIndex) -> f64 {
    let mut inversions = 0u32;
    for a in j.axes() {
        // elements of I strictly greater than a
        inversions += (i.0 >> (a + 1)).count_ones();
    }
    if inversions.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// A `k`-form at a point, dense over the lexicographic basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraForm {
    m: usize,
    k: usize,
    coeffs: Vec<f64>,
}

impl AlgebraForm {
    pub fn zero(m: usize, k: usize) -> Result<Self> {
        if m == 0 || m > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "fiber dimension {m} outside [1,{MAX_DIM}]"
            )));
        }
        if k > m {
            return Err(Error::DegreeOverflow { degree: k, max: m });
        }
        Ok(AlgebraForm { m, k, coeffs: vec![0.0; binomial(m, k)] })
    }

    pub fn from_coeffs(m: usize, k: usize, coeffs: Vec<f64>) -> Result<Self> {
        let mut f = Self::zero(m, k)?;
        if coeffs.len() != f.coeffs.len() {
            return Err(Error::LengthMismatch { expected: f.coeffs.len(), got: coeffs.len() });
        }
        f.coeffs = coeffs;
        Ok(f)
    }

    /// The basis form `e_I`.
    pub fn basis_form(m: usize, idx: MultiIndex) -> Result<Self> {
        let mut f = Self::zero(m, idx.degree())?;
        if idx.0 >> m != 0 {
            return Err(Error::InvalidArgument(format!("axis out of range for m={m}")));
        }
        f.coeffs[basis_rank(m, idx)] = 1.0;
        Ok(f)
    }

    /// The coordinate covector `dx^axis`.
    pub fn covector(m: usize, comps: &[f64]) -> Result<Self> {
        Self::from_coeffs(m, 1, comps.to_vec())
    }

    pub fn scalar(m: usize, value: f64) -> Result<Self> {
        Self::from_coeffs(m, 0, vec![value])
    }

    pub fn random<R: Rng>(m: usize, k: usize, rng: &mut R) -> Result<Self> {
        let mut f = Self::zero(m, k)?;
        f.coeffs.iter_mut().for_each(|c| *c = rng.gen_range(-1.0..1.0));
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn coeff(&self, idx: MultiIndex) -> f64 {
        self.coeffs[basis_rank(self.m, idx)]
    }

    pub fn terms(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        basis(self.m, self.k).into_iter().zip(self.coeffs.iter().copied())
    }

    pub fn scale(&self, s: f64) -> Self {
        AlgebraForm { m: self.m, k: self.k, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(AlgebraForm {
            m: self.m,
            k: self.k,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.m != other.m {
            return Err(Error::DimensionMismatch { left: self.m, right: other.m });
        }
        if self.k != other.k {
            return Err(Error::DegreeMismatch { left: self.k, right: other.k });
        }
        Ok(())
    }
}

/// A tangent vector at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberVector {
    pub comps: Vec<f64>,
}

impl FiberVector {
    pub fn new(comps: Vec<f64>) -> Self {
        FiberVector { comps }
    }

    pub fn axis(m: usize, axis: usize) -> Self {
        let mut comps = vec![0.0; m];
        comps[axis] = 1.0;
        FiberVector { comps }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }
}

/// Diagonal metric with an orientation.
///
/// The signature index is the number of negative diagonal entries. The
/// orientation is a permutation of the axes; the positively oriented coframe
/// is `(dx^{orientation[0]}, ..., dx^{orientation[m-1]})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberMetric {
    diag: Vec<f64>,
    sigma: usize,
    orientation: Vec<usize>,
    orientation_sign: f64,
}

impl FiberMetric {
    pub fn new(diag: Vec<f64>, orientation: Vec<usize>) -> Result<Self> {
        let m = diag.len();
        if m == 0 || m > MAX_DIM {
            return Err(Error::InvalidArgument(format!("fiber dimension {m} outside [1,{MAX_DIM}]")));
        }
        if diag.iter().any(|&g| g == 0.0 || !g.is_finite()) {
            return Err(Error::InvalidArgument("metric diagonal entries must be finite and non-zero".into()));
        }
        let mut seen = vec![false; m];
        if orientation.len() != m {
            return Err(Error::InvalidArgument("orientation must permute all axes".into()));
        }
        for &a in &orientation {
            if a >= m || seen[a] {
                return Err(Error::InvalidArgument(format!("orientation {orientation:?} is not a permutation")));
            }
            seen[a] = true;
        }
        let sigma = diag.iter().filter(|&&g| g < 0.0).count();
        let orientation_sign = permutation_sign(&orientation);
        Ok(FiberMetric { diag, sigma, orientation, orientation_sign })
    }

    /// Metric `diag` with the standard orientation `(0, 1, ..., m-1)`.
    pub fn diagonal(diag: Vec<f64>) -> Result<Self> {
        let m = diag.len();
        Self::new(diag, (0..m).collect())
    }

    pub fn euclidean(m: usize) -> Result<Self> {
        Self::diagonal(vec![1.0; m])
    }

    /// `diag(-1, 1, ..., 1)`, time as axis 0.
    pub fn minkowski(m: usize) -> Result<Self> {
        let mut d = vec![1.0; m];
        d[0] = -1.0;
        Self::diagonal(d)
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn sigma(&self) -> usize {
        self.sigma
    }

    pub fn orientation(&self) -> &[usize] {
        &self.orientation
    }

    /// Inverse-metric factor `g^{II} = ∏_{i∈I} 1/g_ii`.
    pub fn inverse_factor(&self, idx: MultiIndex) -> f64 {
        idx.axes().map(|a| 1.0 / self.diag[a]).product()
    }

    /// `sqrt|det g|`.
    pub fn volume_factor(&self) -> f64 {
        self.diag.iter().map(|g| g.abs()).product::<f64>().sqrt()
    }

    /// The oriented unit volume form.
    pub fn volume_form(&self) -> AlgebraForm {
        let m = self.dim();
        let top = MultiIndex((1 << m) - 1);
        AlgebraForm::basis_form(m, top)
            .expect("top form")
            .scale(self.orientation_sign * self.volume_factor())
    }

    fn check(&self, a: &AlgebraForm) -> Result<()> {
        if a.m != self.dim() {
            return Err(Error::DimensionMismatch { left: a.m, right: self.dim() });
        }
        Ok(())
    }
}

fn permutation_sign(p: &[usize]) -> f64 {
    let mut inv = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Exterior product.
pub fn wedge(a: &AlgebraForm, b: &AlgebraForm) -> Result<AlgebraForm> {
    if a.m != b.m {
        return Err(Error::DimensionMismatch { left: a.m, right: b.m });
    }
    let m = a.m;
    let k = a.k + b.k;
    if k > m {
        return Err(Error::DegreeOverflow { degree: k, max: m });
    }
    let mut out = AlgebraForm::zero(m, k)?;
    for (i, ca) in a.terms() {
        if ca == 0.0 {
            continue;
        }
        for (j, cb) in b.terms() {
            if cb == 0.0 || i.0 & j.0 != 0 {
                continue;
            }
            let r = basis_rank(m, MultiIndex(i.0 | j.0));
            out.coeffs[r] += shuffle_sign(i, j) * ca * cb;
        }
    }
    Ok(out)
}

/// Interior product `X ⌟ a`.
///
/// Contraction needs no metric; the argument is kept so callers that raise a
/// covector first can pass the same metric through.
pub fn interior(x: &FiberVector, a: &AlgebraForm, _g: &FiberMetric) -> Result<AlgebraForm> {
    contract(x, a)
}

pub(crate) fn contract(x: &FiberVector, a: &AlgebraForm) -> Result<AlgebraForm> {
    if a.k == 0 {
        return Err(Error::DegreeUnderflow { op: "interior product", degree: 0 });
    }
    if x.dim() != a.m {
        return Err(Error::DimensionMismatch { left: x.dim(), right: a.m });
    }
    let m = a.m;
    let mut out = AlgebraForm::zero(m, a.k - 1)?;
    for (idx, c) in a.terms() {
        if c == 0.0 {
            continue;
        }
        for (p, axis) in idx.axes().enumerate() {
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            let r = basis_rank(m, idx.without(axis));
            out.coeffs[r] += sign * x.comps[axis] * c;
        }
    }
    Ok(out)
}

/// Hodge dual: `ω ∧ *ω' = ⟨ω, ω'⟩ vol`.
pub fn hodge(a: &AlgebraForm, g: &FiberMetric) -> Result<AlgebraForm> {
    g.check(a)?;
    let m = a.m;
    let mut out = AlgebraForm::zero(m, m - a.k)?;
    let scale = g.orientation_sign * g.volume_factor();
    for (idx, c) in a.terms() {
        let comp = idx.complement(m);
        let r = basis_rank(m, comp);
        out.coeffs[r] += c * g.inverse_factor(idx) * scale * shuffle_sign(idx, comp);
    }
    Ok(out)
}

/// Inverse of [`hodge`], computed from the double-dual sign.
pub fn hodge_inverse(a: &AlgebraForm, g: &FiberMetric) -> Result<AlgebraForm> {
    let m = a.m;
    let k = m - a.k; // degree of the preimage
    let sign = if (k * (m - k) + g.sigma()).is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(hodge(a, g)?.scale(sign))
}

/// The pointwise inner product `(-1)^σ *(a ∧ *b)`.
pub fn inner(a: &AlgebraForm, b: &AlgebraForm, g: &FiberMetric) -> Result<f64> {
    if a.k != b.k {
        return Err(Error::DegreeMismatch { left: a.k, right: b.k });
    }
    g.check(a)?;
    g.check(b)?;
    let top = wedge(a, &hodge(b, g)?)?;
    let s = hodge(&top, g)?.coeffs[0];
    Ok(if g.sigma().is_multiple_of(2) { s } else { -s })
}

/// Gram-matrix form of the inner product, `Σ_I g^{II} a_I b_I`.
pub fn inner_diagonal(a: &AlgebraForm, b: &AlgebraForm, g: &FiberMetric) -> Result<f64> {
    if a.k != b.k {
        return Err(Error::DegreeMismatch { left: a.k, right: b.k });
    }
    g.check(a)?;
    Ok(a.terms().zip(b.coeffs.iter()).map(|((idx, ca), cb)| g.inverse_factor(idx) * ca * cb).sum())
}

/// Raise a covector with the metric.
pub fn musical_sharp(a: &AlgebraForm, g: &FiberMetric) -> Result<FiberVector> {
    if a.k != 1 {
        return Err(Error::InvalidArgument(format!("sharp needs a 1-form, got degree {}", a.k)));
    }
    g.check(a)?;
    Ok(FiberVector::new(a.coeffs.iter().zip(&g.diag).map(|(c, d)| c / d).collect()))
}

/// Lower a vector with the metric.
pub fn musical_flat(x: &FiberVector, g: &FiberMetric) -> Result<AlgebraForm> {
    if x.dim() != g.dim() {
        return Err(Error::DimensionMismatch { left: x.dim(), right: g.dim() });
    }
    AlgebraForm::covector(g.dim(), &x.comps.iter().zip(&g.diag).map(|(c, d)| c * d).collect::<Vec<_>>())
}

/// Maximum absolute defect of each pointwise identity over random samples.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub m: usize,
    pub sigma: usize,
    pub trials: usize,
    pub double_hodge: f64,
    pub wedge_hodge_interior: f64,
    pub hodge_wedge_interior: f64,
    pub wedge_interior_adjoint: f64,
    pub hodge_transpose: f64,
    pub inner_gram: f64,
}

impl IdentityReport {
    pub fn max_defect(&self) -> f64 {
        [
            self.double_hodge,
            self.wedge_hodge_interior,
            self.hodge_wedge_interior,
            self.wedge_interior_adjoint,
            self.hodge_transpose,
            self.inner_gram,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("double_hodge", self.double_hodge),
            ("wedge_hodge_interior", self.wedge_hodge_interior),
            ("hodge_wedge_interior", self.hodge_wedge_interior),
            ("wedge_interior_adjoint", self.wedge_interior_adjoint),
            ("hodge_transpose", self.hodge_transpose),
            ("inner_gram", self.inner_gram),
        ]
    }
}

/// Evaluate the pointwise Hodge/interior/wedge sign identities on random
/// forms and vectors of every degree.
pub fn identity_audit(g: &FiberMetric, trials: usize, seed: u64) -> Result<IdentityReport> {
    use rand::SeedableRng;
    if trials == 0 {
        return Err(Error::InvalidArgument("identity audit needs at least one trial".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let m = g.dim();
    let sigma = g.sigma();
    let sgn = |e: usize| if e.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut rep = IdentityReport { m, sigma, trials, ..Default::default() };
    for _ in 0..trials {
        let x = FiberVector::new((0..m).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let xflat = musical_flat(&x, g)?;
        for k in 0..=m {
            let w = AlgebraForm::random(m, k, &mut rng)?;
            let hw = hodge(&w, g)?;

            let dd = hodge(&hw, g)?.sub(&w.scale(sgn(k * (m - k) + sigma)))?;
            rep.double_hodge = rep.double_hodge.max(dd.max_abs());

            let w2 = AlgebraForm::random(m, m - k, &mut rng)?;
            let lhs = inner(&hw, &w2, g)?;
            let rhs = sgn(k * (m - k)) * inner(&w, &hodge(&w2, g)?, g)?;
            rep.hodge_transpose = rep.hodge_transpose.max((lhs - rhs).abs());

            let wk = AlgebraForm::random(m, k, &mut rng)?;
            let gram = inner(&w, &wk, g)? - inner_diagonal(&w, &wk, g)?;
            rep.inner_gram = rep.inner_gram.max(gram.abs());

            if k >= 1 {
                let lhs = wedge(&xflat, &hw)?;
                let rhs = hodge(&contract(&x, &w)?, g)?.scale(sgn(k + 1));
                rep.wedge_hodge_interior = rep.wedge_hodge_interior.max(lhs.sub(&rhs)?.max_abs());
            }
            if k < m {
                let lhs = hodge(&wedge(&xflat, &w)?, g)?;
                let rhs = contract(&x, &hw)?.scale(sgn(k));
                rep.hodge_wedge_interior = rep.hodge_wedge_interior.max(lhs.sub(&rhs)?.max_abs());

                let up = AlgebraForm::random(m, k + 1, &mut rng)?;
                let lhs = inner(&wedge(&xflat, &w)?, &up, g)?;
                let rhs = inner(&w, &contract(&x, &up)?, g)?;
                rep.wedge_interior_adjoint = rep.wedge_interior_adjoint.max((lhs - rhs).abs());
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn e(m: usize, axes: &[usize]) -> AlgebraForm {
        AlgebraForm::basis_form(m, MultiIndex::from_axes(axes).unwrap()).unwrap()
    }

    #[test]
    fn basis_ranks_are_lexicographic() {
        for m in 1..=MAX_DIM {
            for k in 0..=m {
                let b = basis(m, k);
                assert_eq!(b.len(), binomial(m, k));
                for (r, idx) in b.iter().enumerate() {
                    assert_eq!(basis_rank(m, *idx), r);
                }
            }
        }
        let b = basis(4, 2);
        let tuples: Vec<Vec<usize>> = b.iter().map(|i| i.axes().collect()).collect();
        assert_eq!(tuples, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn wedge_examples() {
        let w = wedge(&e(2, &[0]), &e(2, &[1])).unwrap();
        assert_eq!(w, e(2, &[0, 1]));
        let a = e(2, &[0]).add(&e(2, &[1])).unwrap();
        assert_eq!(wedge(&a, &e(2, &[0])).unwrap(), e(2, &[0, 1]).scale(-1.0));
        assert_eq!(wedge(&e(4, &[0, 1]), &e(4, &[2, 3])).unwrap(), e(4, &[0, 1, 2, 3]));
    }

    #[test]
    fn wedge_errors() {
        assert!(matches!(wedge(&e(2, &[0]), &e(3, &[0])), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(wedge(&e(2, &[0, 1]), &e(2, &[0])), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn interior_examples() {
        let g = FiberMetric::euclidean(2).unwrap();
        let r = interior(&FiberVector::axis(2, 0), &e(2, &[0, 1]), &g).unwrap();
        assert_eq!(r, e(2, &[1]));
        let r = interior(&FiberVector::axis(2, 1), &e(2, &[0, 1]), &g).unwrap();
        assert_eq!(r, e(2, &[0]).scale(-1.0));
        assert!(interior(&FiberVector::axis(2, 0), &AlgebraForm::scalar(2, 1.0).unwrap(), &g).is_err());
    }

    #[test]
    fn hodge_examples() {
        let g = FiberMetric::euclidean(2).unwrap();
        assert_eq!(hodge(&e(2, &[0]), &g).unwrap(), e(2, &[1]));
        assert_eq!(hodge(&e(2, &[1]), &g).unwrap(), e(2, &[0]).scale(-1.0));

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let lor = FiberMetric::minkowski(4).unwrap();
        for _ in 0..20 {
            let w = AlgebraForm::random(4, 2, &mut rng).unwrap();
            let dd = hodge(&hodge(&w, &lor).unwrap(), &lor).unwrap();
            assert!(dd.add(&w).unwrap().max_abs() < 1e-14);
        }
    }

    #[test]
    fn hodge_respects_orientation() {
        let flipped = FiberMetric::new(vec![1.0, 1.0], vec![1, 0]).unwrap();
        assert_eq!(hodge(&e(2, &[0]), &flipped).unwrap(), e(2, &[1]).scale(-1.0));
    }

    #[test]
    fn wedge_with_hodge_is_inner_times_volume() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for g in [
            FiberMetric::diagonal(vec![-2.0, 0.5, 3.0]).unwrap(),
            FiberMetric::diagonal(vec![1.5, 2.0, 0.25, 4.0]).unwrap(),
        ] {
            for k in 0..=g.dim() {
                let a = AlgebraForm::random(g.dim(), k, &mut rng).unwrap();
                let b = AlgebraForm::random(g.dim(), k, &mut rng).unwrap();
                let lhs = wedge(&a, &hodge(&b, &g).unwrap()).unwrap();
                let rhs = g.volume_form().scale(inner(&a, &b, &g).unwrap());
                assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inner_examples() {
        let g = FiberMetric::euclidean(2).unwrap();
        assert!((inner(&e(2, &[0, 1]), &e(2, &[0, 1]), &g).unwrap() - 1.0).abs() < 1e-15);
        let lor = FiberMetric::minkowski(4).unwrap();
        assert!((inner(&e(4, &[0]), &e(4, &[0]), &lor).unwrap() + 1.0).abs() < 1e-15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a = AlgebraForm::random(4, 2, &mut rng).unwrap();
        let b = AlgebraForm::random(4, 2, &mut rng).unwrap();
        assert_eq!(inner_diagonal(&a, &b, &lor).unwrap(), inner_diagonal(&b, &a, &lor).unwrap());
        assert!((inner(&a, &b, &lor).unwrap() - inner(&b, &a, &lor).unwrap()).abs() < 1e-14);
        assert!(matches!(inner(&a, &e(4, &[0]), &lor), Err(Error::DegreeMismatch { .. })));
    }

    #[test]
    fn gram_matrix_is_diagonal_signs() {
        let lor = FiberMetric::minkowski(3).unwrap();
        for k in 0..=3 {
            for i in basis(3, k) {
                for j in basis(3, k) {
                    let v = inner(&AlgebraForm::basis_form(3, i).unwrap(), &AlgebraForm::basis_form(3, j).unwrap(), &lor)
                        .unwrap();
                    if i == j {
                        let expect = if i.contains(0) { -1.0 } else { 1.0 };
                        assert!((v - expect).abs() < 1e-15);
                    } else {
                        assert_eq!(v, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn musical_examples() {
        let g = FiberMetric::euclidean(2).unwrap();
        assert_eq!(musical_sharp(&e(2, &[0]), &g).unwrap(), FiberVector::axis(2, 0));
        let g = FiberMetric::diagonal(vec![4.0, 1.0]).unwrap();
        assert_eq!(musical_sharp(&e(2, &[0]), &g).unwrap().comps, vec![0.25, 0.0]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let g = FiberMetric::diagonal(vec![-3.0, 0.7, 2.5]).unwrap();
        for _ in 0..10 {
            let a = AlgebraForm::random(3, 1, &mut rng).unwrap();
            let back = musical_flat(&musical_sharp(&a, &g).unwrap(), &g).unwrap();
            assert!(back.sub(&a).unwrap().max_abs() < 1e-15);
        }
    }

    #[test]
    fn audit_is_at_roundoff() {
        for g in [FiberMetric::euclidean(3).unwrap(), FiberMetric::minkowski(4).unwrap()] {
            let rep = identity_audit(&g, 100, 1).unwrap();
            assert!(rep.max_defect() < 1e-12, "{rep:?}");
        }
        assert!(identity_audit(&FiberMetric::euclidean(2).unwrap(), 0, 0).is_err());
    }

    // Hand expansion in the Euclidean plane, ω = dx¹:
    //   *dx¹ = dx², *dx² = -dx¹, *1 = dx¹∧dx², *(dx¹∧dx²) = 1.
    //   ∂₁⌟*dx¹ = ∂₁⌟dx² = 0 and *(dx¹∧dx¹) = 0, so (-1)^1·0 = 0.
    //   ∂₂⌟*dx¹ = ∂₂⌟dx² = 1 and *(dx²∧dx¹) = *(-dx¹∧dx²) = -1 = (-1)^1·1.
    #[test]
    fn planar_sign_table() {
        let g = FiberMetric::euclidean(2).unwrap();
        let w = e(2, &[0]);
        let hw = hodge(&w, &g).unwrap();
        let c1 = interior(&FiberVector::axis(2, 0), &hw, &g).unwrap();
        assert_eq!(c1.coeffs(), &[0.0]);
        assert_eq!(hodge(&c1, &g).unwrap().coeffs(), &[0.0]);
        let c2 = interior(&FiberVector::axis(2, 1), &hw, &g).unwrap();
        assert_eq!(c2.coeffs(), &[1.0]);
        let lhs = hodge(&wedge(&e(2, &[1]), &w).unwrap(), &g).unwrap();
        assert_eq!(lhs.coeffs(), &[-1.0]);
        assert_eq!(lhs, c2.scale(-1.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn form(m: usize, k: usize) -> impl Strategy<Value = AlgebraForm> {
            proptest::collection::vec(-2.0f64..2.0, binomial(m, k))
                .prop_map(move |c| AlgebraForm::from_coeffs(m, k, c).unwrap())
        }

        proptest! {
            #[test]
            fn graded_commutativity(ka in 0usize..=2, kb in 0usize..=2, seed in any::<u64>()) {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let a = AlgebraForm::random(5, ka, &mut rng).unwrap();
                let b = AlgebraForm::random(5, kb, &mut rng).unwrap();
                let ab = wedge(&a, &b).unwrap();
                let ba = wedge(&b, &a).unwrap().scale(if (ka * kb) % 2 == 0 { 1.0 } else { -1.0 });
                prop_assert!(ab.sub(&ba).unwrap().max_abs() < 1e-14);
            }

            #[test]
            fn wedge_is_associative(a in form(4, 1), b in form(4, 1), c in form(4, 2)) {
                let l = wedge(&wedge(&a, &b).unwrap(), &c).unwrap();
                let r = wedge(&a, &wedge(&b, &c).unwrap()).unwrap();
                prop_assert!(l.sub(&r).unwrap().max_abs() < 1e-13);
            }

            #[test]
            fn interior_is_antiderivation(a in form(4, 2), b in form(4, 1),
                                          x in proptest::collection::vec(-2.0f64..2.0, 4)) {
                let x = FiberVector::new(x);
                let lhs = contract(&x, &wedge(&a, &b).unwrap()).unwrap();
                let rhs = wedge(&contract(&x, &a).unwrap(), &b).unwrap()
                    .add(&wedge(&a, &contract(&x, &b).unwrap()).unwrap()).unwrap();
                prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-13);
            }

            #[test]
            fn double_hodge_sign(m in 2usize..=5, lorentz in any::<bool>(), seed in any::<u64>()) {
                let g = if lorentz { FiberMetric::minkowski(m).unwrap() } else { FiberMetric::euclidean(m).unwrap() };
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                for k in 0..=m {
                    let w = AlgebraForm::random(m, k, &mut rng).unwrap();
                    let s = if (k * (m - k) + g.sigma()) % 2 == 0 { 1.0 } else { -1.0 };
                    let dd = hodge(&hodge(&w, &g).unwrap(), &g).unwrap();
                    prop_assert!(dd.sub(&w.scale(s)).unwrap().max_abs() < 1e-12);
                    let back = hodge_inverse(&hodge(&w, &g).unwrap(), &g).unwrap();
                    prop_assert!(back.sub(&w).unwrap().max_abs() < 1e-12);
                }
            }
        }
    }
}
