//! Continuum oracle for the split equations: smooth spacetime forms, their
//! spacetime `d` and `δ` by fourth-order finite differences, and the
//! convergence study of the discrete split residuals.
//!
//! Spacetime axis 0 is time; the metric is `diag(-β², a², ..., a²)` with the
//! orientation `(dt, dx¹, ...)`.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::complex::{Cochain, Grid, GridSpec, Kind};
use crate::error::{Error, Result};
use crate::exterior::{basis, basis_rank, contract, hodge, hodge_inverse, AlgebraForm, FiberMetric, FiberVector, MultiIndex};
use crate::maxwell::{FieldState, Maxwell, SourceSlice};
use crate::metric::MetricField;

/// Step of the finite-difference derivatives.
pub const FD_STEP: f64 = 1e-3;

/// `Σ_I c_I sin(2π k_I·x / L + ω_I t + φ_I) e^I` over the spacetime basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedForm {
    pub n: usize,
    pub k: usize,
    pub length: f64,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub index: MultiIndex,
    pub amp: f64,
    pub wave: Vec<f64>,
    pub omega: f64,
    pub phase: f64,
}

impl ManufacturedForm {
    /// Random plane-wave superposition, one term per basis element, with
    /// wave numbers `±1` per axis so the field is periodic on the box.
    pub fn plane_waves(n: usize, k: usize, length: f64, seed: u64) -> Result<Self> {
        if k > n {
            return Err(Error::DegreeOverflow { degree: k, max: n });
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let terms = basis(n, k)
            .into_iter()
            .map(|index| Term {
                index,
                amp: rng.gen_range(0.5..1.0),
                wave: (0..n - 1).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect(),
                omega: rng.gen_range(-3.0..3.0),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            })
            .collect();
        Ok(ManufacturedForm { n, k, length, terms })
    }

    /// Constant coefficients.
    pub fn constant(n: usize, k: usize, coeffs: &[f64]) -> Result<Self> {
        let terms = basis(n, k)
            .into_iter()
            .zip(coeffs)
            .map(|(index, &amp)| Term {
                index,
                amp,
                wave: vec![0.0; n - 1],
                omega: 0.0,
                phase: std::f64::consts::FRAC_PI_2,
            })
            .collect();
        Ok(ManufacturedForm { n, k, length: 1.0, terms })
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> AlgebraForm {
        let mut f = AlgebraForm::zero(self.n, self.k).expect("valid degree");
        let tau = std::f64::consts::TAU / self.length;
        for term in &self.terms {
            let arg = tau * term.wave.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + term.omega * t + term.phase;
            f.coeffs_mut()[basis_rank(self.n, term.index)] += term.amp * arg.sin();
        }
        f
    }
}

/// `diag(-β², a², ..., a²)` at `(t, x)`.
pub fn spacetime_metric(m: &MetricField, t: f64, x: &[f64]) -> Result<FiberMetric> {
    let b = m.beta(t, x);
    let a = m.a(t);
    let mut diag = vec![a * a; x.len() + 1];
    diag[0] = -b * b;
    FiberMetric::diagonal(diag)
}

fn fd_partial<F: Fn(f64, &[f64]) -> AlgebraForm>(f: &F, t: f64, x: &[f64], axis: usize) -> AlgebraForm {
    let h = FD_STEP;
    let at = |s: f64| {
        if axis == 0 {
            f(t + s, x)
        } else {
            let mut y = x.to_vec();
            y[axis - 1] += s;
            f(t, &y)
        }
    };
    let (p1, m1, p2, m2) = (at(h), at(-h), at(2.0 * h), at(-2.0 * h));
    let c: Vec<f64> = (0..p1.coeffs().len())
        .map(|i| (8.0 * (p1.coeffs()[i] - m1.coeffs()[i]) - (p2.coeffs()[i] - m2.coeffs()[i])) / (12.0 * h))
        .collect();
    AlgebraForm::from_coeffs(p1.dim(), p1.degree(), c).expect("same shape")
}

/// Spacetime exterior derivative by central differences.
pub fn ext_d<F: Fn(f64, &[f64]) -> AlgebraForm>(f: &F, t: f64, x: &[f64]) -> Result<AlgebraForm> {
    let v = f(t, x);
    let m = v.dim();
    let mut out = AlgebraForm::zero(m, v.degree() + 1)?;
    for axis in 0..m {
        let p = fd_partial(f, t, x, axis);
        let e = AlgebraForm::basis_form(m, MultiIndex(1 << axis))?;
        out = out.add(&crate::exterior::wedge(&e, &p)?)?;
    }
    Ok(out)
}

/// Spacetime codifferential `δ = (-1)^k *^{-1} d *`.
pub fn codiff<F: Fn(f64, &[f64]) -> AlgebraForm>(f: &F, m: &MetricField, t: f64, x: &[f64]) -> Result<AlgebraForm> {
    let k = f(t, x).degree();
    if k == 0 {
        return Err(Error::DegreeUnderflow { op: "codifferential", degree: 0 });
    }
    let star = |s: f64, y: &[f64]| hodge(&f(s, y), &spacetime_metric(m, s, y).expect("metric")).expect("hodge");
    let dstar = ext_d(&star, t, x)?;
    let g = spacetime_metric(m, t, x)?;
    Ok(hodge_inverse(&dstar, &g)?.scale(if k.is_multiple_of(2) { 1.0 } else { -1.0 }))
}

/// Restrict a spacetime form to its purely spatial components, as a form
/// on Σ (axis `i+1` becomes axis `i`).
pub fn spatial_part(x: &AlgebraForm) -> Result<AlgebraForm> {
    let m = x.dim();
    let mut out = AlgebraForm::zero(m - 1, x.degree().min(m - 1))?;
    if x.degree() > m - 1 {
        return Ok(out);
    }
    for (idx, c) in x.terms() {
        if !idx.contains(0) {
            let r = basis_rank(m - 1, MultiIndex(idx.0 >> 1));
            out.coeffs_mut()[r] = c;
        }
    }
    Ok(out)
}

/// Electric and magnetic components `(X_E, X_B)` of a spacetime `p`-form:
/// `*_h X_E = ∂t⌟X`, `X_B = X - dt ∧ ∂t⌟X`. Out-of-range degrees are `None`.
pub fn split_point(x: &AlgebraForm, a: f64) -> Result<(Option<AlgebraForm>, Option<AlgebraForm>)> {
    let n = x.dim();
    let d = n - 1;
    let p = x.degree();
    let h = FiberMetric::diagonal(vec![a * a; d])?;
    let e = if p >= 1 {
        let c = contract(&FiberVector::axis(n, 0), x)?;
        Some(hodge_inverse(&spatial_part(&c)?, &h)?)
    } else {
        None
    };
    let b = if p <= d { Some(spatial_part(x)?) } else { None };
    Ok((e, b))
}

/// Residuals of the discrete split system for one grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub cells: usize,
    /// RMS density residual of each split equation; `None` when the
    /// equation is vacuous for this degree.
    pub evolution_e: f64,
    pub evolution_b: f64,
    pub constraint_e: Option<f64>,
    pub constraint_b: Option<f64>,
    /// RMS density of the largest term, for scale.
    pub scale: f64,
}

impl LemmaRow {
    pub fn total(&self) -> f64 {
        (self.evolution_e.powi(2)
            + self.evolution_b.powi(2)
            + self.constraint_e.unwrap_or(0.0).powi(2)
            + self.constraint_b.unwrap_or(0.0).powi(2))
        .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaTable {
    pub n: usize,
    pub k: usize,
    pub rows: Vec<LemmaRow>,
}

impl LemmaTable {
    /// Observed order between the first and last rows.
    pub fn order(&self) -> f64 {
        let (a, b) = (self.rows.first().expect("rows"), self.rows.last().expect("rows"));
        (a.total() / b.total()).ln() / (b.cells as f64 / a.cells as f64).ln()
    }
}

fn rms_density(g: &Grid, c: &Cochain) -> f64 {
    let d = g.densities(c);
    (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt()
}

fn sample(g: &Grid, kind: Kind, deg: usize, f: impl Fn(&[f64]) -> AlgebraForm) -> Cochain {
    match kind {
        Kind::Primal => g.sample_primal(deg, f),
        Kind::Dual => g.sample_dual(deg, f),
    }
}

/// Evaluate the discrete split equations on samples of `F` and of
/// `j = δF`, `ζ = dF` at time `t` on a periodic grid with `cells` per axis.
pub fn lemma_row(form: &ManufacturedForm, metric: &MetricField, cells: usize, t: f64) -> Result<LemmaRow> {
    let (n, k) = (form.n, form.k);
    if k < 1 || k > n - 1 {
        return Err(Error::InvalidArgument(format!("k={k} outside [1,{}]", n - 1)));
    }
    let grid = Grid::new(GridSpec { t0: t, ..GridSpec::periodic_cube(n, cells, form.length, 0.1) })?;
    let sys = Maxwell::new(grid, *metric, k)?;
    let g = sys.grid();
    let m = metric;

    let field = |s: f64, x: &[f64]| form.eval(s, x);
    let fe = |s: f64, x: &[f64]| split_point(&form.eval(s, x), m.a(s)).expect("split").0.expect("fe");
    let fb = |s: f64, x: &[f64]| split_point(&form.eval(s, x), m.a(s)).expect("split").1.expect("fb");
    let j = |x: &[f64]| codiff(&field, m, t, x).expect("codiff");
    let zeta = |x: &[f64]| ext_d(&field, t, x).expect("d");

    let state = FieldState {
        t,
        k,
        fe: g.sample_primal(n - k, |x| fe(t, x)),
        fb: g.sample_dual(k, |x| fb(t, x)),
    };
    let dstate = FieldState {
        t,
        k,
        fe: g.sample_primal(n - k, |x| fd_partial(&fe, t, x, 0)),
        fb: g.sample_dual(k, |x| fd_partial(&fb, t, x, 0)),
    };
    let d = n - 1;
    let part = |f: &dyn Fn(&[f64]) -> AlgebraForm, kind: Kind, deg: i64, electric: bool| -> Option<Cochain> {
        if deg < 0 || deg > d as i64 {
            return None;
        }
        Some(sample(g, kind, deg as usize, |x| {
            let (e, b) = split_point(&f(x), m.a(t)).expect("split");
            if electric { e } else { b }.expect("component in range")
        }))
    };
    let src = SourceSlice {
        je: part(&j, Kind::Primal, n as i64 + 1 - k as i64, true),
        jb: part(&j, Kind::Dual, k as i64 - 1, false),
        ze: part(&zeta, Kind::Primal, n as i64 - k as i64 - 1, true),
        zb: part(&zeta, Kind::Dual, k as i64 + 1, false),
    };

    let (a, b) = sys.apply_s(&state, &dstate)?;
    let (ra, rb) = sys.rhs_sources(&src, t)?;
    let c = sys.constraint_residuals(&state, &src)?;
    let scale = [rms_density(g, &a), rms_density(g, &ra), rms_density(g, &state.fe), rms_density(g, &state.fb)]
        .into_iter()
        .fold(0.0, f64::max);
    Ok(LemmaRow {
        cells,
        evolution_e: rms_density(g, &a.sub(&ra)?),
        evolution_b: rms_density(g, &b.sub(&rb)?),
        constraint_e: c.r_e.as_ref().map(|r| rms_density(g, r)),
        constraint_b: c.r_b.as_ref().map(|r| rms_density(g, r)),
        scale,
    })
}

/// Convergence table over a grid sequence.
pub fn lemma_equivalence_check(
    form: &ManufacturedForm,
    metric: &MetricField,
    grids: &[usize],
    t: f64,
) -> Result<LemmaTable> {
    let rows = grids.iter().map(|&c| lemma_row(form, metric, c, t)).collect::<Result<Vec<_>>>()?;
    Ok(LemmaTable { n: form.n, k: form.k, rows })
}
