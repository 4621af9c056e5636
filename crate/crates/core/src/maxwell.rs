//! Electric/magnetic split of the degree-`k` Faraday form and the first-order
//! system it satisfies.
//!
//! On the grid, `fe` (degree `n-k`) is a primal cochain and `fb` (degree `k`)
//! a dual cochain; the boundary condition `𝚗⌟F_B = 0` is the relative
//! projection of the dual complex. Source components:
//! `je` primal `n+1-k`, `jb` dual `k-1`, `ze` primal `n-k-1`, `zb` dual `k+1`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::complex::{parity, Cochain, Face, Grid, Kind};
use crate::error::{Error, Result};
use crate::exterior::{basis, binomial, binomial_i, hodge, wedge, AlgebraForm, FiberMetric};
use crate::metric::MetricField;

/// Sign in front of `β^{-1} d_Σ(* β F_B)`: `(-1)^{(n-k+1)(k+1)+1}`.
pub fn s_sign(n: usize, k: usize) -> f64 {
    parity((n - k + 1) * (k + 1) + 1)
}

/// Sign in front of `* j_B`: `(-1)^{(n-k)(k+1)}`.
pub fn jb_sign(n: usize, k: usize) -> f64 {
    parity((n - k) * (k + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    pub k: usize,
    pub fe: Cochain,
    pub fb: Cochain,
}

impl FieldState {
    pub fn scale(&self, a: f64) -> Self {
        FieldState { t: self.t, k: self.k, fe: self.fe.scale(a), fb: self.fb.scale(a) }
    }

    pub fn axpy(&mut self, a: f64, x: &FieldState) {
        self.fe.axpy(a, &x.fe);
        self.fb.axpy(a, &x.fb);
    }

    pub fn sub(&self, other: &FieldState) -> Result<FieldState> {
        Ok(FieldState { t: self.t, k: self.k, fe: self.fe.sub(&other.fe)?, fb: self.fb.sub(&other.fb)? })
    }

    pub fn max_abs(&self) -> f64 {
        self.fe.max_abs().max(self.fb.max_abs())
    }

    /// Unweighted Euclidean norm of all values.
    pub fn l2(&self) -> f64 {
        (self.fe.l2().powi(2) + self.fb.l2().powi(2)).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.fe.is_zero() && self.fb.is_zero()
    }
}

/// Source components at one time; `None` means identically zero (also used
/// for components whose degree is out of range).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceSlice {
    pub je: Option<Cochain>,
    pub jb: Option<Cochain>,
    pub ze: Option<Cochain>,
    pub zb: Option<Cochain>,
}

impl SourceSlice {
    pub fn is_zero(&self) -> bool {
        [&self.je, &self.jb, &self.ze, &self.zb].iter().all(|c| c.as_ref().is_none_or(|c| c.is_zero()))
    }

    pub fn scale(&self, a: f64) -> Self {
        let f = |c: &Option<Cochain>| c.as_ref().map(|c| c.scale(a));
        SourceSlice { je: f(&self.je), jb: f(&self.jb), ze: f(&self.ze), zb: f(&self.zb) }
    }

    pub fn add(&self, other: &SourceSlice) -> Result<SourceSlice> {
        fn sum(a: &Option<Cochain>, b: &Option<Cochain>) -> Result<Option<Cochain>> {
            Ok(match (a, b) {
                (Some(a), Some(b)) => Some(a.add(b)?),
                (Some(a), None) => Some(a.clone()),
                (None, Some(b)) => Some(b.clone()),
                (None, None) => None,
            })
        }
        Ok(SourceSlice {
            je: sum(&self.je, &other.je)?,
            jb: sum(&self.jb, &other.jb)?,
            ze: sum(&self.ze, &other.ze)?,
            zb: sum(&self.zb, &other.zb)?,
        })
    }
}

type SourceFn = dyn Fn(f64) -> SourceSlice + Send + Sync;

/// Time-indexed source family with a declared support window. Evaluation
/// outside the window returns exact zeros without calling the family.
#[derive(Clone)]
pub struct SourceData {
    pub window: (f64, f64),
    /// Spatial bounding box `(lo, hi)` of the support, if known.
    pub bbox: Option<(Vec<f64>, Vec<f64>)>,
    family: Option<Arc<SourceFn>>,
}

impl std::fmt::Debug for SourceData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SourceData").field("window", &self.window).field("bbox", &self.bbox).finish()
    }
}

impl SourceData {
    pub fn zero() -> Self {
        SourceData { window: (0.0, 0.0), bbox: None, family: None }
    }

    pub fn new<F>(window: (f64, f64), bbox: Option<(Vec<f64>, Vec<f64>)>, family: F) -> Result<Self>
    where
        F: Fn(f64) -> SourceSlice + Send + Sync + 'static,
    {
        if !(window.0.is_finite() && window.1.is_finite() && window.0 <= window.1) {
            return Err(Error::InvalidArgument(format!("source window {window:?} is not a finite interval")));
        }
        Ok(SourceData { window, bbox, family: Some(Arc::new(family)) })
    }

    pub fn is_zero(&self) -> bool {
        self.family.is_none()
    }

    pub fn active(&self, t: f64) -> bool {
        self.family.is_some() && t >= self.window.0 && t <= self.window.1
    }

    pub fn eval(&self, t: f64) -> SourceSlice {
        match &self.family {
            Some(f) if self.active(t) => f(t),
            _ => SourceSlice::default(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        match &self.family {
            None => self.clone(),
            Some(f) => {
                let f = f.clone();
                SourceData { window: self.window, bbox: self.bbox.clone(), family: Some(Arc::new(move |t| f(t).scale(a))) }
            }
        }
    }

    pub fn add(&self, other: &SourceData) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let (a, b) = (self.clone(), other.clone());
        let window = (self.window.0.min(other.window.0), self.window.1.max(other.window.1));
        let bbox = match (&self.bbox, &other.bbox) {
            (Some((l1, h1)), Some((l2, h2))) => Some((
                l1.iter().zip(l2).map(|(a, b)| a.min(*b)).collect(),
                h1.iter().zip(h2).map(|(a, b)| a.max(*b)).collect(),
            )),
            _ => None,
        };
        SourceData {
            window,
            bbox,
            family: Some(Arc::new(move |t| a.eval(t).add(&b.eval(t)).expect("matching source layouts"))),
        }
    }
}

/// Residuals of the constraint equations at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraints {
    /// `d(β^{-1} fe) - (-1)^{n-k} β^{-1} je`, absent when `k = 1`.
    pub r_e: Option<Cochain>,
    /// `P(d fb - zb)`, absent when `k = n-1`.
    pub r_b: Option<Cochain>,
    /// Trace of `fe` on every face, empty when `k = 1`.
    pub r_bdy: Vec<crate::complex::BoundaryCochain>,
}

/// Norms of [`Constraints`] in the grid pairing (boundary: Euclidean norm of
/// the face values).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintNorms {
    pub r_e: f64,
    pub r_b: f64,
    pub r_bdy: f64,
}

/// Degree-`k` Maxwell system on a grid with a fixed metric.
#[derive(Debug, Clone)]
pub struct Maxwell {
    grid: Grid,
    metric: MetricField,
    k: usize,
    centers: Vec<Vec<Vec<f64>>>,
}

impl Maxwell {
    pub fn new(grid: Grid, metric: MetricField, k: usize) -> Result<Self> {
        let n = grid.n();
        if k < 1 || k > n - 1 {
            return Err(Error::InvalidArgument(format!("Faraday degree k={k} outside [1,{}]", n - 1)));
        }
        let centers = (0..=grid.d()).map(|j| grid.centers(j)).collect();
        Ok(Maxwell { grid, metric, k, centers })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Layout degree of `fe` cells (`n-k`).
    pub fn fe_degree(&self) -> usize {
        self.n() - self.k
    }

    /// Layout degree of `fb` cells (`d-k`).
    fn fb_layout(&self) -> usize {
        self.grid.d() - self.k
    }

    pub fn zero_state(&self, t: f64) -> FieldState {
        FieldState {
            t,
            k: self.k,
            fe: Cochain::zeros(&self.grid, Kind::Primal, self.fe_degree()),
            fb: Cochain::zeros(&self.grid, Kind::Dual, self.k),
        }
    }

    pub fn state(&self, t: f64, fe: Cochain, fb: Cochain) -> Result<FieldState> {
        self.check_state(&FieldState { t, k: self.k, fe: fe.clone(), fb: fb.clone() })?;
        Ok(FieldState { t, k: self.k, fe, fb })
    }

    pub fn check_state(&self, s: &FieldState) -> Result<()> {
        let want = (Kind::Primal, self.fe_degree(), Kind::Dual, self.k);
        let got = (s.fe.kind, s.fe.degree, s.fb.kind, s.fb.degree);
        if want != got || s.k != self.k {
            return Err(Error::InvalidArgument(format!("state degrees {got:?} do not match system {want:?}")));
        }
        let le = self.grid.cochain_len(Kind::Primal, self.fe_degree());
        let lb = self.grid.cochain_len(Kind::Dual, self.k);
        if s.fe.values.len() != le || s.fb.values.len() != lb {
            return Err(Error::LengthMismatch { expected: le + lb, got: s.fe.values.len() + s.fb.values.len() });
        }
        Ok(())
    }

    /// β at the centres of primal `j`-cells.
    pub fn beta_on(&self, j: usize, t: f64) -> Vec<f64> {
        self.centers[j].iter().map(|x| self.metric.beta(t, x)).collect()
    }

    fn dbeta_over_beta(&self, j: usize, t: f64) -> Option<Vec<f64>> {
        if let crate::metric::Lapse::Breathing { .. } = self.metric.beta {
            Some(self.centers[j].iter().map(|x| self.metric.dbeta_dt(t, x) / self.metric.beta(t, x)).collect())
        } else {
            None
        }
    }

    pub fn centers(&self, j: usize) -> &[Vec<f64>] {
        &self.centers[j]
    }

    /// Wave-speed bound `max β / a` over cell centres and sample times.
    pub fn c_max(&self, t0: f64, t1: f64) -> f64 {
        let mut c = 0.0f64;
        for i in 0..=8 {
            let t = t0 + (t1 - t0) * i as f64 / 8.0;
            let a = self.metric.a(t);
            for x in &self.centers[0] {
                c = c.max(self.metric.beta(t, x) / a);
            }
        }
        c
    }

    fn mul(c: &Cochain, w: &[f64]) -> Cochain {
        Cochain { kind: c.kind, degree: c.degree, values: c.values.iter().zip(w).map(|(v, w)| v * w).collect() }
    }

    fn check_slice(&self, src: &SourceSlice) -> Result<()> {
        let n = self.n();
        let k = self.k;
        let expect = [
            (&src.je, Kind::Primal, n as i64 + 1 - k as i64),
            (&src.jb, Kind::Dual, k as i64 - 1),
            (&src.ze, Kind::Primal, n as i64 - k as i64 - 1),
            (&src.zb, Kind::Dual, k as i64 + 1),
        ];
        for (c, kind, deg) in expect {
            if let Some(c) = c {
                if c.kind != kind || c.degree as i64 != deg || deg > self.grid.d() as i64 {
                    return Err(Error::InvalidArgument(format!(
                        "source component {:?}/{} where {kind:?}/{deg} expected",
                        c.kind, c.degree
                    )));
                }
            }
        }
        Ok(())
    }

    /// Time derivative of the state from the evolution equations, with the
    /// normal part of `∂t fb` projected away.
    pub fn derivative(&self, s: &FieldState, src: &SourceSlice) -> Result<FieldState> {
        self.check_state(s)?;
        self.check_slice(src)?;
        let (g, m, t, n, k) = (&self.grid, &self.metric, s.t, self.n(), self.k);
        let fe_deg = self.fe_degree();
        let beta_e = self.beta_on(fe_deg, t);
        let beta_b = self.beta_on(self.fb_layout(), t);

        let g_star = g.hodge_sigma(&Self::mul(&s.fb, &beta_b), t, m)?;
        let curl = g.d_primal(&g_star)?;
        let mut dfe = Self::mul(&curl, &beta_e).scale(-s_sign(n, k));
        if let Some(jb) = &src.jb {
            let sj = g.hodge_sigma(jb, t, m)?;
            let b2: Vec<f64> = beta_e.iter().map(|b| b * b).collect();
            dfe.axpy(jb_sign(n, k), &Self::mul(&sj, &b2));
        }
        if let Some(r) = self.dbeta_over_beta(fe_deg, t) {
            dfe.axpy(1.0, &Self::mul(&s.fe, &r));
        }

        let mut dfb = g.d_dual_full(&g.hodge_sigma(&s.fe, t, m)?)?;
        if let Some(ze) = &src.ze {
            dfb.axpy(1.0, &g.hodge_sigma(ze, t, m)?);
        }
        g.project_relative(&mut dfb);
        Ok(FieldState { t, k, fe: dfe, fb: dfb })
    }

    /// The operator `𝖲` with the time-derivative slot supplied by the caller:
    /// `(β^{-1}∂t(β^{-1} fe) + s β^{-1} d(*β fb), ∂t fb - P d * fe)`.
    pub fn apply_s(&self, s: &FieldState, ds: &FieldState) -> Result<(Cochain, Cochain)> {
        self.check_state(s)?;
        self.check_state(ds)?;
        let (g, m, t, n, k) = (&self.grid, &self.metric, s.t, self.n(), self.k);
        let fe_deg = self.fe_degree();
        let beta_e = self.beta_on(fe_deg, t);
        let beta_b = self.beta_on(self.fb_layout(), t);
        let inv_b2: Vec<f64> = beta_e.iter().map(|b| 1.0 / (b * b)).collect();
        let mut first = Self::mul(&ds.fe, &inv_b2);
        if let Some(r) = self.dbeta_over_beta(fe_deg, t) {
            let w: Vec<f64> = r.iter().zip(&inv_b2).map(|(r, i)| -r * i).collect();
            first.axpy(1.0, &Self::mul(&s.fe, &w));
        }
        let curl = g.d_primal(&g.hodge_sigma(&Self::mul(&s.fb, &beta_b), t, m)?)?;
        let inv_b: Vec<f64> = beta_e.iter().map(|b| 1.0 / b).collect();
        first.axpy(s_sign(n, k), &Self::mul(&curl, &inv_b));

        let mut second = ds.fb.clone();
        second.axpy(-1.0, &g.d_dual(&g.hodge_sigma(&s.fe, t, m)?)?);
        Ok((first, second))
    }

    /// Right-hand side `((-1)^{(n-k)(k+1)} * jb, P * ze)` of `𝖲(fe, fb)`.
    pub fn rhs_sources(&self, src: &SourceSlice, t: f64) -> Result<(Cochain, Cochain)> {
        self.check_slice(src)?;
        let g = &self.grid;
        let m = &self.metric;
        let mut first = Cochain::zeros(g, Kind::Primal, self.fe_degree());
        if let Some(jb) = &src.jb {
            first.axpy(jb_sign(self.n(), self.k), &g.hodge_sigma(jb, t, m)?);
        }
        let mut second = Cochain::zeros(g, Kind::Dual, self.k);
        if let Some(ze) = &src.ze {
            second.axpy(1.0, &g.hodge_sigma(ze, t, m)?);
            g.project_relative(&mut second);
        }
        Ok((first, second))
    }

    pub fn constraint_residuals(&self, s: &FieldState, src: &SourceSlice) -> Result<Constraints> {
        self.check_state(s)?;
        self.check_slice(src)?;
        let (g, t, n, k, d) = (&self.grid, s.t, self.n(), self.k, self.grid.d());
        let fe_deg = self.fe_degree();
        let r_e = if fe_deg < d {
            let inv_b: Vec<f64> = self.beta_on(fe_deg, t).iter().map(|b| 1.0 / b).collect();
            let mut r = g.d_primal(&Self::mul(&s.fe, &inv_b))?;
            if let Some(je) = &src.je {
                let inv: Vec<f64> = self.beta_on(fe_deg + 1, t).iter().map(|b| 1.0 / b).collect();
                r.axpy(-parity(n - k), &Self::mul(je, &inv));
            }
            Some(r)
        } else {
            None
        };
        let r_b = if k < d {
            let mut r = g.d_dual_full(&s.fb)?;
            if let Some(zb) = &src.zb {
                r.axpy(-1.0, zb);
            }
            g.project_relative(&mut r);
            Some(r)
        } else {
            None
        };
        let mut r_bdy = Vec::new();
        if fe_deg < d {
            for f in g.faces() {
                r_bdy.push(g.trace_pullback(&s.fe, f)?);
            }
        }
        Ok(Constraints { r_e, r_b, r_bdy })
    }

    pub fn constraint_norms(&self, s: &FieldState, src: &SourceSlice) -> Result<ConstraintNorms> {
        let c = self.constraint_residuals(s, src)?;
        let (g, m, t) = (&self.grid, &self.metric, s.t);
        Ok(ConstraintNorms {
            r_e: c.r_e.as_ref().map(|r| g.norm_sigma(r, t, m)).transpose()?.unwrap_or(0.0),
            r_b: c.r_b.as_ref().map(|r| g.norm_sigma(r, t, m)).transpose()?.unwrap_or(0.0),
            r_bdy: c.r_bdy.iter().map(|b| b.l2().powi(2)).sum::<f64>().sqrt(),
        })
    }

    /// `∫ ⟨σ_𝖲(dt) u, u⟩ β dvol = ⟨fe, β^{-1} fe⟩ + ⟨fb, β fb⟩`.
    pub fn energy(&self, s: &FieldState) -> Result<f64> {
        self.check_state(s)?;
        let (g, m, t) = (&self.grid, &self.metric, s.t);
        let inv: Vec<f64> = self.beta_on(self.fe_degree(), t).iter().map(|b| 1.0 / b).collect();
        let bb = self.beta_on(self.fb_layout(), t);
        Ok(g.pair_weighted(&s.fe, &s.fe, t, m, &inv)? + g.pair_weighted(&s.fb, &s.fb, t, m, &bb)?)
    }

    /// Norm of the state in the unweighted grid pairing.
    pub fn state_norm(&self, s: &FieldState) -> Result<f64> {
        let (g, m, t) = (&self.grid, &self.metric, s.t);
        Ok((g.pair_sigma(&s.fe, &s.fe, t, m)? + g.pair_sigma(&s.fb, &s.fb, t, m)?).sqrt())
    }

    /// `(F_E, F_B)` from the dual cochains of `∂t⌟F` (degree `k-1`) and of
    /// the spatial part (degree `k`): `fe = *^{-1}(∂t⌟F)`, `fb = F_B`.
    pub fn split(&self, t: f64, dt_part: &Cochain, spatial: &Cochain) -> Result<FieldState> {
        if dt_part.kind != Kind::Dual || dt_part.degree + 1 != self.k {
            return Err(Error::InvalidArgument("dt-part must be a dual (k-1)-cochain".into()));
        }
        if spatial.kind != Kind::Dual || spatial.degree != self.k {
            return Err(Error::InvalidArgument("spatial part must be a dual k-cochain".into()));
        }
        let fe = self.grid.hodge_sigma_inv(dt_part, t, &self.metric)?;
        self.state(t, fe, spatial.clone())
    }

    /// Inverse of [`Maxwell::split`].
    pub fn assemble(&self, s: &FieldState) -> Result<(Cochain, Cochain)> {
        self.check_state(s)?;
        Ok((self.grid.hodge_sigma(&s.fe, s.t, &self.metric)?, s.fb.clone()))
    }

    /// Fiber metric of `h_t` at time `t`.
    pub fn fiber(&self, t: f64) -> Result<FiberMetric> {
        let a = self.metric.a(t);
        FiberMetric::diagonal(vec![a * a; self.grid.d()])
    }
}

// ---- principal symbol ----

/// Eigen-structure summary of `σ_𝖲(ξ)` at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolReport {
    pub point: Vec<f64>,
    pub xi: Vec<f64>,
    pub symmetry_defect: f64,
    pub eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    pub plus_dim: usize,
    pub minus_dim: usize,
    pub admissibility: Option<Admissibility>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    /// `max |⟨σ(ν) b, b'⟩|` over an orthonormal basis of 𝖡.
    pub quadratic_defect: f64,
    pub rank_b: usize,
    /// `C(n-1,k-1) + C(n-2,k)`.
    pub rank_formula: usize,
    /// `C(n-2,k) + C(n-2,k-1) + C(n-2,n-k)`.
    pub rank_formula_alt: usize,
    pub nonnegative_count: usize,
    /// Distance between the orthogonal projectors onto 𝖡 and 𝖡†.
    pub adjoint_gap: f64,
    pub i: bool,
    pub ii: bool,
    pub iii: bool,
}

/// Fiber data of the symbol: lapse, conformal factor and degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolFiber {
    pub n: usize,
    pub k: usize,
    pub beta: f64,
    pub a: f64,
}

impl SymbolFiber {
    pub fn at(sys: &Maxwell, t: f64, x: &[f64]) -> Self {
        SymbolFiber { n: sys.n(), k: sys.k(), beta: sys.metric().beta(t, x), a: sys.metric().a(t) }
    }

    pub fn size(&self) -> usize {
        let d = self.n - 1;
        binomial(d, self.n - self.k) + binomial(d, self.k)
    }

    /// Unit-length spatial covector `side · a · dx^axis` (the outward conormal).
    pub fn conormal(&self, axis: usize, side: f64) -> Vec<f64> {
        let mut xi = vec![0.0; self.n];
        xi[1 + axis] = side * self.a;
        xi
    }
}

/// `σ_𝖲(ξ)` in an orthonormal basis of `Λ^{n-k} ⊕ Λ^k` for `h = a² δ`.
/// `xi[0] = ξ(∂t)`, `xi[1..]` the spatial components.
pub fn principal_symbol(xi: &[f64], f: &SymbolFiber) -> Result<DMatrix<f64>> {
    let (n, k) = (f.n, f.k);
    let d = n - 1;
    if xi.len() != n {
        return Err(Error::DimensionMismatch { left: xi.len(), right: n });
    }
    if !xi.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("covector".into()));
    }
    let h = FiberMetric::diagonal(vec![f.a * f.a; d])?;
    let xs = AlgebraForm::covector(d, &xi[1..])?;
    let be = basis(d, n - k);
    let bb = basis(d, k);
    let (ne, nb) = (be.len(), bb.len());
    let mut m = DMatrix::zeros(ne + nb, ne + nb);
    let s = s_sign(n, k);
    for (c, idx) in be.iter().enumerate() {
        m[(c, c)] = xi[0] / (f.beta * f.beta);
        let col = wedge(&xs, &hodge(&AlgebraForm::basis_form(d, *idx)?, &h)?)?;
        for (r, v) in col.coeffs().iter().enumerate() {
            m[(ne + r, c)] = -v;
        }
    }
    for (c, idx) in bb.iter().enumerate() {
        m[(ne + c, ne + c)] = xi[0];
        let col = wedge(&xs, &hodge(&AlgebraForm::basis_form(d, *idx)?, &h)?)?;
        for (r, v) in col.coeffs().iter().enumerate() {
            m[(r, ne + c)] = s * v;
        }
    }
    // coordinate basis e^I has squared length a^{-2|I|}
    let w: Vec<f64> = be
        .iter()
        .chain(bb.iter())
        .map(|idx| f.a.powi(-(idx.degree() as i32)))
        .collect();
    for r in 0..ne + nb {
        for c in 0..ne + nb {
            m[(r, c)] *= w[r] / w[c];
        }
    }
    Ok(m)
}

fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Symmetry defect, sorted eigenvalues and signed counts of `σ_𝖲(ξ)`.
pub fn symbol_report(xi: &[f64], point: &[f64], f: &SymbolFiber, tol: f64) -> Result<SymbolReport> {
    let m = principal_symbol(xi, f)?;
    let symmetry_defect = (&m - m.transpose()).abs().max();
    let (eigenvalues, _) = symmetric_eigen(&m);
    let kernel_dim = eigenvalues.iter().filter(|e| e.abs() <= tol).count();
    let plus_dim = eigenvalues.iter().filter(|&&e| e > tol).count();
    let minus_dim = eigenvalues.iter().filter(|&&e| e < -tol).count();
    Ok(SymbolReport {
        point: point.to_vec(),
        xi: xi.to_vec(),
        symmetry_defect,
        eigenvalues,
        kernel_dim,
        plus_dim,
        minus_dim,
        admissibility: None,
    })
}

/// Expected `(ker, +, -)` dimensions of `σ_𝖲(ν)` for a unit spacelike `ν`.
pub fn expected_counts(n: usize, k: usize) -> (usize, usize, usize) {
    let (n, k) = (n as i64, k as i64);
    let ker = binomial_i(n - 2, n - k) + binomial_i(n - 2, k);
    let pm = binomial_i(n - 2, k - 1);
    (ker, pm, pm)
}

fn rank_and_range(m: &DMatrix<f64>, tol: f64) -> (usize, DMatrix<f64>) {
    if m.ncols() == 0 || m.nrows() == 0 {
        return (0, DMatrix::zeros(m.nrows(), 0));
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let scale = svd.singular_values.max().max(1.0);
    let cols: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > tol * scale).collect();
    let range = DMatrix::from_fn(m.nrows(), cols.len(), |r, c| u[(r, cols[c])]);
    (cols.len(), range)
}

/// Admissibility of `𝖡 = {𝚗⌟F_B = 0}` at a boundary point of `face`.
pub fn admissibility_audit(sys: &Maxwell, face: Face, t: f64, point: &[f64], tol: f64) -> Result<SymbolReport> {
    let g = sys.grid();
    let d = g.d();
    if face.axis >= d || g.spec().periodic[face.axis] {
        return Err(Error::InvalidArgument(format!("invalid face {face:?}")));
    }
    let wall = match face.side {
        crate::complex::Side::Low => 0.0,
        crate::complex::Side::High => g.spec().lengths[face.axis],
    };
    if point.len() != d || (point[face.axis] - wall).abs() > 1e-12 * wall.abs().max(1.0) {
        return Err(Error::InvalidArgument(format!("point {point:?} is not on face {face:?}")));
    }
    let f = SymbolFiber::at(sys, t, point);
    let nu = f.conormal(face.axis, face.side.sign());
    let mut rep = symbol_report(&nu, point, &f, tol)?;
    rep.admissibility = Some(admissibility(&f, face.axis, face.side.sign(), tol)?);
    Ok(rep)
}

/// Fiber-level admissibility check for the face with normal `axis`.
pub fn admissibility(f: &SymbolFiber, axis: usize, side: f64, tol: f64) -> Result<Admissibility> {
    let (n, k) = (f.n, f.k);
    let d = n - 1;
    let nu = f.conormal(axis, side);
    let sigma = principal_symbol(&nu, f)?;
    let be = basis(d, n - k);
    let bb = basis(d, k);
    let ne = be.len();
    // 𝖡: every F_E, and F_B without a leg along the normal
    let mut cols: Vec<usize> = (0..ne).collect();
    cols.extend(bb.iter().enumerate().filter(|(_, idx)| !idx.contains(axis)).map(|(i, _)| ne + i));
    let size = ne + bb.len();
    let b = DMatrix::from_fn(size, cols.len(), |r, c| if r == cols[c] { 1.0 } else { 0.0 });

    let q = b.transpose() * &sigma * &b;
    let quadratic_defect = if q.is_empty() { 0.0 } else { q.abs().max() };
    let (rank_b, range_b) = rank_and_range(&b, tol);
    let (nn, kk) = (n as i64, k as i64);
    let rank_formula = binomial_i(nn - 1, kk - 1) + binomial_i(nn - 2, kk);
    let rank_formula_alt = binomial_i(nn - 2, kk) + binomial_i(nn - 2, kk - 1) + binomial_i(nn - 2, nn - kk);
    let (eig, _) = symmetric_eigen(&sigma);
    let nonnegative_count = eig.iter().filter(|&&e| e >= -tol).count();

    // 𝖡† = [σ(𝚗♭) 𝖡]^⊥ ; 𝚗♭ = ν for the unit normal
    let sb = &sigma * &b;
    let (_, range_sb) = rank_and_range(&sb, tol);
    let id = DMatrix::<f64>::identity(size, size);
    let p_dag = &id - &range_sb * range_sb.transpose();
    let p_b = &range_b * range_b.transpose();
    let adjoint_gap = (&p_b - &p_dag).abs().max();

    Ok(Admissibility {
        quadratic_defect,
        rank_b,
        rank_formula,
        rank_formula_alt,
        nonnegative_count,
        adjoint_gap,
        i: quadratic_defect < tol,
        ii: rank_b == rank_formula && rank_b == rank_formula_alt && rank_b == nonnegative_count,
        iii: adjoint_gap < tol,
    })
}

/// `(n, k)` pairs covered by the symbol audit.
pub const SYMBOL_TABLE: [(usize, usize); 6] = [(2, 1), (3, 1), (3, 2), (4, 1), (4, 2), (4, 3)];

/// Aggregate symbol checks over random points, times and covectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolAudit {
    pub n: usize,
    pub k: usize,
    pub covectors: usize,
    pub max_symmetry_defect: f64,
    /// Smallest eigenvalue over future-timelike covectors.
    pub min_timelike_eigenvalue: f64,
    /// `(ker, +, -)` expected for unit spacelike covectors.
    pub expected_counts: (usize, usize, usize),
    pub count_mismatches: usize,
    pub boundary_samples: usize,
    pub admissibility_failures: usize,
    pub max_quadratic_defect: f64,
    pub max_adjoint_gap: f64,
}

impl SymbolAudit {
    pub fn pass(&self, symmetry_tol: f64) -> bool {
        self.max_symmetry_defect < symmetry_tol
            && self.min_timelike_eigenvalue > 0.0
            && self.count_mismatches == 0
            && self.admissibility_failures == 0
    }
}

/// For each random covector `ξ` at a random point and time: the symmetry
/// defect of `σ_𝖲(ξ)`, positivity after tilting `ξ` future-timelike, and
/// the eigenspace counts after projecting it to a unit spatial covector.
/// Admissibility is checked at `boundary_per_face` points on every face.
pub fn symbol_audit(
    n: usize,
    k: usize,
    metric: MetricField,
    covectors: usize,
    boundary_per_face: usize,
    seed: u64,
    tol: f64,
) -> Result<SymbolAudit> {
    use rand::{Rng, SeedableRng};
    if !SYMBOL_TABLE.contains(&(n, k)) {
        return Err(Error::InvalidArgument(format!("(n, k) = ({n}, {k}) is not in the symbol table")));
    }
    let grid = Grid::new(crate::complex::GridSpec::cube(n, 8, 1.0, 0.05))?;
    let sys = Maxwell::new(grid, metric, k)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = n - 1;
    let expected = expected_counts(n, k);
    let mut out = SymbolAudit {
        n,
        k,
        covectors,
        max_symmetry_defect: 0.0,
        min_timelike_eigenvalue: f64::INFINITY,
        expected_counts: expected,
        count_mismatches: 0,
        boundary_samples: 0,
        admissibility_failures: 0,
        max_quadratic_defect: 0.0,
        max_adjoint_gap: 0.0,
    };
    for _ in 0..covectors {
        let t = rng.gen_range(0.0..1.0);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let f = SymbolFiber::at(&sys, t, &x);
        let xi: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let rep = symbol_report(&xi, &x, &f, tol)?;
        out.max_symmetry_defect = out.max_symmetry_defect.max(rep.symmetry_defect);

        let spatial = xi[1..].iter().map(|v| v * v).sum::<f64>().sqrt() / f.a;
        let mut tl = xi.clone();
        tl[0] = f.beta * spatial * rng.gen_range(1.01..3.0) + 1e-3;
        let rep = symbol_report(&tl, &x, &f, tol)?;
        out.max_symmetry_defect = out.max_symmetry_defect.max(rep.symmetry_defect);
        out.min_timelike_eigenvalue = out.min_timelike_eigenvalue.min(rep.eigenvalues[0]);

        if spatial > 0.0 {
            let mut sp = xi.clone();
            sp[0] = 0.0;
            sp.iter_mut().for_each(|v| *v /= spatial);
            let rep = symbol_report(&sp, &x, &f, tol)?;
            if (rep.kernel_dim, rep.plus_dim, rep.minus_dim) != expected {
                out.count_mismatches += 1;
            }
        }
    }
    for face in sys.grid().faces() {
        for _ in 0..boundary_per_face {
            let t = rng.gen_range(0.0..1.0);
            let mut p: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            p[face.axis] = match face.side {
                crate::complex::Side::Low => 0.0,
                crate::complex::Side::High => sys.grid().spec().lengths[face.axis],
            };
            let rep = admissibility_audit(&sys, face, t, &p, tol)?;
            let adm = rep.admissibility.expect("boundary audit");
            out.boundary_samples += 1;
            out.max_quadratic_defect = out.max_quadratic_defect.max(adm.quadratic_defect);
            out.max_adjoint_gap = out.max_adjoint_gap.max(adm.adjoint_gap);
            if !(adm.i && adm.ii && adm.iii) {
                out.admissibility_failures += 1;
            }
        }
    }
    Ok(out)
}
