//! Advanced and retarded Green operators built from initial-value solves on
//! a slice grid, the causal propagator `G = G⁺ - G⁻`, the identities tying
//! them to the discrete spacetime operator, and the pre-symplectic pairing
//! on solution bundles of all degrees.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{parity, Cochain, Grid};
use crate::error::{Error, Result};
use crate::evolution::{compatible_bump_data, raw_bump_state, BoundaryMode, Bump, EvolveConfig, Solver};
use crate::exterior::{binomial, AlgebraForm};
use crate::maxwell::{jb_sign, FieldState, Maxwell, SourceData, SourceSlice};
use crate::metric::MetricField;

/// Zero slices required between a source's declared window and the start
/// slice of a one-sided solve.
pub const GREEN_MARGIN: usize = 2;

/// Default Courant number for Green solves. Smaller than the evolution
/// default so the RK4 / time-difference mismatch stays well under the
/// identity tolerances on 16-cell grids.
pub const GREEN_CFL: f64 = 0.25;

/// Largest `‖D_h F‖ T / ‖F‖` accepted for a history treated as a solution.
pub const SOLUTION_TOL: f64 = 0.05;

/// Slices by which interpolation and the time stencil widen a support.
pub const STENCIL_REACH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub slices: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, slices: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite() && t0.is_finite()) {
            return Err(Error::InvalidArgument(format!("time grid step {dt} must be positive")));
        }
        if slices < 5 {
            return Err(Error::InvalidArgument("time grid needs at least 5 slices".into()));
        }
        Ok(TimeGrid { t0, dt, slices })
    }

    /// Slices spaced `dt` covering `[t0, t0 + span]`, with `dt` adjusted down
    /// so the span is hit exactly.
    pub fn covering(t0: f64, span: f64, max_dt: f64) -> Result<Self> {
        let n = ((span / max_dt) - 1e-9).ceil().max(1.0) as usize;
        Self::new(t0, span / n as f64, n + 1)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.slices - 1)
    }

    /// Trapezoid quadrature weights.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![self.dt; self.slices];
        w[0] *= 0.5;
        w[self.slices - 1] *= 0.5;
        w
    }

    pub fn nearest(&self, t: f64) -> usize {
        (((t - self.t0) / self.dt).round().max(0.0) as usize).min(self.slices - 1)
    }

    /// Slice index `i` and fraction `θ ∈ [0, 1)` with `t = t_i + θ dt`.
    /// Times within roundoff of a slice snap to it.
    fn locate(&self, t: f64) -> (usize, f64) {
        let u = (t - self.t0) / self.dt;
        let r = u.round();
        if (u - r).abs() < 1e-9 {
            return (r.max(0.0) as usize, 0.0);
        }
        let i = u.floor().max(0.0) as usize;
        (i, u - i as f64)
    }
}

/// Smooth step from 0 (before `t_c - width/2`) to 1 (after `t_c + width/2`),
/// the quintic `6s⁵ - 15s⁴ + 10s³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub t_c: f64,
    pub width: f64,
}

impl CutoffProfile {
    pub fn new(t_c: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite() && t_c.is_finite()) {
            return Err(Error::InvalidArgument(format!("cutoff width {width} must be positive")));
        }
        Ok(CutoffProfile { t_c, width })
    }

    /// Default width of ten slices.
    pub fn default_for(time: &TimeGrid, t_c: f64) -> Self {
        CutoffProfile { t_c, width: 10.0 * time.dt }
    }

    pub fn value(&self, t: f64) -> f64 {
        let s = ((t - (self.t_c - 0.5 * self.width)) / self.width).clamp(0.0, 1.0);
        s * s * s * (s * (6.0 * s - 15.0) + 10.0)
    }

    pub fn on(&self, time: &TimeGrid) -> Vec<f64> {
        (0..time.slices).map(|i| self.value(time.time(i))).collect()
    }
}

/// Field states on every slice of a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub time: TimeGrid,
    pub states: Vec<FieldState>,
}

impl History {
    pub fn zeros(sys: &Maxwell, time: TimeGrid) -> Self {
        History { time, states: (0..time.slices).map(|i| sys.zero_state(time.time(i))).collect() }
    }

    pub fn k(&self) -> usize {
        self.states[0].k
    }

    pub fn scale(&self, a: f64) -> Self {
        History { time: self.time, states: self.states.iter().map(|s| s.scale(a)).collect() }
    }

    /// Multiply slice `i` by `f[i]`.
    pub fn modulate(&self, f: &[f64]) -> Self {
        History { time: self.time, states: self.states.iter().zip(f).map(|(s, a)| s.scale(*a)).collect() }
    }

    pub fn add(&self, other: &History) -> Result<Self> {
        self.zip(other, 1.0)
    }

    pub fn sub(&self, other: &History) -> Result<Self> {
        self.zip(other, -1.0)
    }

    fn zip(&self, other: &History, a: f64) -> Result<Self> {
        if self.time != other.time || self.k() != other.k() {
            return Err(Error::InvalidArgument("histories live on different grids or degrees".into()));
        }
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(x, y)| {
                let mut s = x.clone();
                s.axpy(a, y);
                s
            })
            .collect();
        Ok(History { time: self.time, states })
    }

    pub fn first_nonzero(&self) -> Option<usize> {
        self.states.iter().position(|s| !s.is_zero())
    }

    pub fn last_nonzero(&self) -> Option<usize> {
        self.states.iter().rposition(|s| !s.is_zero())
    }

    pub fn max_abs(&self) -> f64 {
        self.states.iter().map(|s| s.max_abs()).fold(0.0, f64::max)
    }
}

/// Source slices `(je, jb, ze, zb)` on every slice of a time grid: the
/// `δ`-part `(je, jb)` and the `d`-part `(ze, zb)` of a spacetime source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceHistory {
    pub k: usize,
    pub time: TimeGrid,
    pub slices: Vec<SourceSlice>,
}

pub type SourcePair = SourceHistory;

impl SourceHistory {
    pub fn zeros(k: usize, time: TimeGrid) -> Self {
        SourceHistory { k, time, slices: vec![SourceSlice::default(); time.slices] }
    }

    pub fn first_nonzero(&self) -> Option<usize> {
        self.slices.iter().position(|s| !s.is_zero())
    }

    pub fn last_nonzero(&self) -> Option<usize> {
        self.slices.iter().rposition(|s| !s.is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.first_nonzero().is_none()
    }

    pub fn scale(&self, a: f64) -> Self {
        SourceHistory { k: self.k, time: self.time, slices: self.slices.iter().map(|s| s.scale(a)).collect() }
    }

    pub fn add(&self, other: &SourceHistory) -> Result<Self> {
        if self.time != other.time || self.k != other.k {
            return Err(Error::InvalidArgument("source histories live on different grids or degrees".into()));
        }
        let slices = self.slices.iter().zip(&other.slices).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        Ok(SourceHistory { k: self.k, time: self.time, slices })
    }

    pub fn sub(&self, other: &SourceHistory) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Continuous-time source, cubic Lagrange between slices, declared on
    /// `[t_{a-2}, t_{b+2}]` around the nonzero slices `a..=b`.
    pub fn to_source(&self) -> SourceData {
        let (a, b) = match (self.first_nonzero(), self.last_nonzero()) {
            (Some(a), Some(b)) => (a, b),
            _ => return SourceData::zero(),
        };
        let time = self.time;
        let last = time.slices - 1;
        let window = (time.time(a.saturating_sub(STENCIL_REACH)), time.time((b + STENCIL_REACH).min(last)));
        let slices = Arc::new(self.slices.clone());
        SourceData::new(window, None, move |t| {
            let (i, th) = time.locate(t);
            if i >= last {
                return slices[last].clone();
            }
            if th == 0.0 {
                return slices[i].clone();
            }
            cubic(&slices, i, th)
        })
        .expect("finite window")
    }
}

/// Cubic through the four slices around `[i, i+1]`, shifted inward at the ends.
fn cubic(slices: &[SourceSlice], i: usize, th: f64) -> SourceSlice {
    let base = i.saturating_sub(1).min(slices.len() - 4);
    let u = (i - base) as f64 + th;
    let w: Vec<f64> = (0..4)
        .map(|m| {
            (0..4).filter(|l| *l != m).map(|l| (u - l as f64) / (m as f64 - l as f64)).product()
        })
        .collect();
    let mix = |pick: fn(&SourceSlice) -> &Option<Cochain>| {
        let mut out: Option<Cochain> = None;
        for (m, wm) in w.iter().enumerate() {
            if let Some(c) = pick(&slices[base + m]) {
                match &mut out {
                    None => out = Some(c.scale(*wm)),
                    Some(o) => o.axpy(*wm, c),
                }
            }
        }
        out
    };
    SourceSlice { je: mix(|s| &s.je), jb: mix(|s| &s.jb), ze: mix(|s| &s.ze), zb: mix(|s| &s.zb) }
}

fn slice_max(s: &SourceSlice) -> f64 {
    [&s.je, &s.jb, &s.ze, &s.zb].into_iter().flatten().map(|c| c.max_abs()).fold(0.0, f64::max)
}

fn mul(c: &Cochain, w: &[f64]) -> Cochain {
    let mut out = c.clone();
    for (v, w) in out.values.iter_mut().zip(w) {
        *v *= w;
    }
    out
}

fn recip(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|b| 1.0 / b).collect()
}

/// Fourth-order time-derivative stencil at slice `n`: central in the
/// interior, one-sided on the two slices nearest each end.
fn stencil(n: usize, len: usize, dt: f64) -> [(usize, f64); 5] {
    const LEFT: [[f64; 5]; 2] = [[-25.0, 48.0, -36.0, 16.0, -3.0], [-3.0, -10.0, 18.0, -6.0, 1.0]];
    let h = 1.0 / (12.0 * dt);
    let mut out = [(0usize, 0.0f64); 5];
    if n < 2 {
        for (m, c) in LEFT[n].iter().enumerate() {
            out[m] = (m, c * h);
        }
    } else if n + 2 >= len {
        let r = len - 1 - n;
        for (m, c) in LEFT[r].iter().enumerate() {
            out[m] = (len - 1 - m, -c * h);
        }
    } else {
        for (m, c) in [1.0, -8.0, 0.0, 8.0, -1.0].iter().enumerate() {
            out[m] = (n + m - 2, c * h);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RightInverseReport {
    /// `‖G⁺(D ω) - ω‖ / ‖ω‖`
    pub defect: f64,
    pub norm: f64,
    pub slices: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSequenceReport {
    pub trials: usize,
    /// max `‖G(D ω)‖ / ‖ω‖` over compact `ω`
    pub g_after_d: f64,
    /// max `‖D(G S)‖ / ‖S‖` over admissible `S`
    pub d_after_g: f64,
    /// max `‖G⁺(D χF) + G⁻(D (1-χ)F) - F‖ / ‖F‖` over solutions `F`
    pub reconstruction: f64,
}

/// Green operators of one degree on a fixed slice grid.
#[derive(Debug, Clone)]
pub struct Green {
    sys: Maxwell,
    time: TimeGrid,
    cfl: f64,
    mode: BoundaryMode,
}

impl Green {
    pub fn new(sys: Maxwell, time: TimeGrid, cfl: f64) -> Result<Self> {
        let mode = if sys.grid().spec().periodic.iter().all(|p| *p) {
            BoundaryMode::PeriodicTest
        } else {
            BoundaryMode::ProjectB
        };
        let g = Green { sys, time, cfl, mode };
        g.solver()?.check_cfl(time.dt)?;
        Ok(g)
    }

    pub fn system(&self) -> &Maxwell {
        &self.sys
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn boundary_mode(&self) -> BoundaryMode {
        self.mode
    }

    fn solver(&self) -> Result<Solver<'_>> {
        let cfg = EvolveConfig { t_final: self.time.end(), cfl: self.cfl, boundary_mode: self.mode, monitor_stride: 1, seed: 0 };
        Solver::over(&self.sys, cfg, self.time.t0)
    }

    fn check_history(&self, h: &History) -> Result<()> {
        if h.time != self.time || h.k() != self.sys.k() {
            return Err(Error::InvalidArgument("history does not match the Green operator's grid or degree".into()));
        }
        Ok(())
    }

    fn check_sources(&self, s: &SourceHistory) -> Result<()> {
        if s.time != self.time || s.k != self.sys.k() {
            return Err(Error::InvalidArgument("source history does not match the Green operator's grid or degree".into()));
        }
        Ok(())
    }

    pub fn zeros(&self) -> History {
        History::zeros(&self.sys, self.time)
    }

    /// `sqrt(Σ w_n ‖F_n‖²)` with trapezoid weights.
    pub fn history_norm(&self, h: &History) -> Result<f64> {
        let w = self.time.weights();
        let mut acc = 0.0;
        for (s, w) in h.states.iter().zip(&w) {
            acc += w * self.sys.state_norm(s)?.powi(2);
        }
        Ok(acc.sqrt())
    }

    pub fn source_norm(&self, s: &SourceHistory) -> Result<f64> {
        let (g, m) = (self.sys.grid(), self.sys.metric());
        let w = self.time.weights();
        let mut acc = 0.0;
        for (i, sl) in s.slices.iter().enumerate() {
            let t = self.time.time(i);
            for c in [&sl.je, &sl.jb, &sl.ze, &sl.zb].into_iter().flatten() {
                acc += w[i] * g.pair_sigma(c, c, t, m)?;
            }
        }
        Ok(acc.sqrt())
    }

    /// Sources `(je, jb, ze, zb)` read off a state and a supplied time
    /// derivative by inverting the split equations and the constraints.
    pub fn sources_from(&self, s: &FieldState, ds: &FieldState) -> Result<SourceSlice> {
        let sys = &self.sys;
        let (g, m, t, n, k, d) = (sys.grid(), sys.metric(), s.t, sys.n(), sys.k(), sys.grid().d());
        let (first, second) = sys.apply_s(s, ds)?;
        let jb = g.hodge_sigma_inv(&first, t, m)?.scale(jb_sign(n, k));
        let ze = g.hodge_sigma_inv(&second, t, m)?;
        let fe_deg = sys.fe_degree();
        let je = if fe_deg < d {
            let c = g.d_primal(&mul(&s.fe, &recip(sys.beta_on(fe_deg, t))))?;
            Some(mul(&c, &sys.beta_on(fe_deg + 1, t)).scale(parity(n - k)))
        } else {
            None
        };
        let zb = if k < d { Some(g.d_dual(&s.fb)?) } else { None };
        Ok(SourceSlice { je, jb: Some(jb), ze: Some(ze), zb })
    }

    fn derivative_at(&self, h: &History, n: usize, weight: impl Fn(usize) -> f64) -> FieldState {
        let mut ds = self.sys.zero_state(h.states[n].t);
        for (j, c) in stencil(n, h.states.len(), self.time.dt) {
            let w = c * weight(j);
            if w != 0.0 {
                ds.fe.axpy(w, &h.states[j].fe);
                ds.fb.axpy(w, &h.states[j].fb);
            }
        }
        ds
    }

    /// The discrete spacetime operator `D_h` applied slice by slice.
    pub fn d_op(&self, h: &History) -> Result<SourceHistory> {
        self.check_history(h)?;
        let mut slices = Vec::with_capacity(h.states.len());
        for n in 0..h.states.len() {
            let ds = self.derivative_at(h, n, |_| 1.0);
            slices.push(self.sources_from(&h.states[n], &ds)?);
        }
        Ok(SourceHistory { k: h.k(), time: self.time, slices })
    }

    /// `[D_h, χ] F = D_h(χF) - χ D_h F`. Only the time difference sees `χ`,
    /// so the result has no constraint components and vanishes wherever `χ`
    /// is locally constant.
    pub fn commutator(&self, h: &History, chi: &[f64]) -> Result<SourceHistory> {
        self.check_history(h)?;
        let mut slices = Vec::with_capacity(h.states.len());
        for n in 0..h.states.len() {
            let ds = self.derivative_at(h, n, |j| chi[j] - chi[n]);
            if ds.is_zero() {
                slices.push(SourceSlice::default());
                continue;
            }
            let zero = self.sys.zero_state(h.states[n].t);
            let mut sl = self.sources_from(&zero, &ds)?;
            sl.je = None;
            sl.zb = None;
            slices.push(sl);
        }
        Ok(SourceHistory { k: h.k(), time: self.time, slices })
    }

    /// Homogeneous solution through `s0` on slice 0.
    pub fn solution(&self, s0: &FieldState) -> Result<History> {
        self.sys.check_state(s0)?;
        let mut states = vec![self.sys.zero_state(self.time.t0); self.time.slices];
        let mut s = s0.clone();
        s.t = self.time.t0;
        states[0] = s;
        self.sweep(&mut states, 0, true, &SourceData::zero())?;
        Ok(History { time: self.time, states })
    }

    /// Step from `states[start]` to the end of the grid (`forward`) or back
    /// to slice 0, pinning slice times exactly.
    fn sweep(&self, states: &mut [FieldState], start: usize, forward: bool, src: &SourceData) -> Result<()> {
        let solver = self.solver()?;
        let dt = if forward { self.time.dt } else { -self.time.dt };
        let order: Vec<usize> =
            if forward { (start + 1..states.len()).collect() } else { (0..start).rev().collect() };
        for i in order {
            let prev = if forward { i - 1 } else { i + 1 };
            let mut next = solver.step(&states[prev], src, dt)?;
            if !next.max_abs().is_finite() {
                return Err(Error::Unstable { at: self.time.time(i), last_stable: self.time.time(prev) });
            }
            next.t = self.time.time(i);
            states[i] = next;
        }
        Ok(())
    }

    /// Retarded solution: zero before the source, evolved forward.
    pub fn g_plus(&self, src: &SourceHistory) -> Result<History> {
        self.check_sources(src)?;
        let a = match src.first_nonzero() {
            None => return Ok(self.zeros()),
            Some(a) => a,
        };
        let lead = GREEN_MARGIN + STENCIL_REACH;
        if a < lead {
            return Err(Error::Precondition(format!("source starts on slice {a}; G⁺ needs {lead} zero slices before it")));
        }
        let mut h = self.zeros();
        self.sweep(&mut h.states, a - lead, true, &src.to_source())?;
        Ok(h)
    }

    /// Advanced solution: zero after the source, evolved backward.
    pub fn g_minus(&self, src: &SourceHistory) -> Result<History> {
        self.check_sources(src)?;
        let b = match src.last_nonzero() {
            None => return Ok(self.zeros()),
            Some(b) => b,
        };
        let lead = GREEN_MARGIN + STENCIL_REACH;
        if b + lead > self.time.slices - 1 {
            return Err(Error::Precondition(format!("source ends on slice {b}; G⁻ needs {lead} zero slices after it")));
        }
        let mut h = self.zeros();
        self.sweep(&mut h.states, b + lead, false, &src.to_source())?;
        Ok(h)
    }

    /// `G = G⁺ - G⁻`.
    pub fn causal(&self, src: &SourceHistory) -> Result<History> {
        self.g_plus(src)?.sub(&self.g_minus(src)?)
    }

    /// `‖G⁺(D_h ω) - ω‖ / ‖ω‖` for `ω` compactly supported in time and
    /// space with `𝚗⌟ω = 0`.
    pub fn right_inverse_check(&self, omega: &History) -> Result<RightInverseReport> {
        self.check_history(omega)?;
        let g = self.sys.grid();
        if self.mode == BoundaryMode::ProjectB {
            for s in &omega.states {
                let mut p = s.fb.clone();
                g.project_relative(&mut p);
                if p != s.fb {
                    return Err(Error::Precondition("ω has a nonzero normal component 𝚗⌟ω on ∂Σ".into()));
                }
                if s.fe.degree < g.d() && g.max_trace(&s.fe)? > 0.0 {
                    return Err(Error::Precondition("ω is not compactly supported in space".into()));
                }
            }
        }
        match (omega.first_nonzero(), omega.last_nonzero()) {
            (None, _) | (_, None) => {
                return Ok(RightInverseReport { defect: 0.0, norm: 0.0, slices: self.time.slices, dt: self.time.dt })
            }
            (Some(a), Some(b)) => {
                let lead = GREEN_MARGIN + 2 * STENCIL_REACH;
                if a < lead || b + lead > self.time.slices - 1 {
                    return Err(Error::Precondition(format!(
                        "ω occupies slices {a}..={b}; its support must stay {lead} slices inside the time range"
                    )));
                }
            }
        }
        let back = self.g_plus(&self.d_op(omega)?)?;
        let norm = self.history_norm(omega)?;
        Ok(RightInverseReport {
            defect: self.history_norm(&back.sub(omega)?)? / norm,
            norm,
            slices: self.time.slices,
            dt: self.time.dt,
        })
    }

    /// `G⁺(D_h(χω)) + G⁻(D_h((1-χ)ω))`.
    pub fn reconstruct(&self, omega: &History, chi: &[f64]) -> Result<History> {
        self.check_history(omega)?;
        let future = omega.modulate(chi);
        let one_minus: Vec<f64> = chi.iter().map(|c| 1.0 - c).collect();
        let past = omega.modulate(&one_minus);
        self.g_plus(&self.d_op(&future)?)?.add(&self.g_minus(&self.d_op(&past)?)?)
    }

    /// `φ(t) U` with `U` a raw bump state and `φ` a compact polynomial
    /// pulse `(1 - ((t - t_c)/τ)²)⁴`.
    pub fn pulse(&self, bump: &Bump, seed: u64, t_c: f64, tau: f64) -> Result<History> {
        let u = raw_bump_state(&self.sys, bump, seed, self.time.t0)?;
        let states = (0..self.time.slices)
            .map(|i| {
                let t = self.time.time(i);
                let r = (t - t_c) / tau;
                let phi = if r.abs() < 1.0 { (1.0 - r * r).powi(4) } else { 0.0 };
                let mut s = u.scale(phi);
                s.t = t;
                s
            })
            .collect();
        Ok(History { time: self.time, states })
    }

    /// `max_i ‖G(S)_{N-1-i} + R G(S)_i‖ / max ‖G(S)‖` where `R` flips the sign
    /// of `fb`. Vanishes for a static metric and a source that is symmetric
    /// under the mirror `t ↦ t_0 + t_end - t` (electric parts even, magnetic
    /// parts odd).
    pub fn reflection_defect(&self, src: &SourceHistory) -> Result<f64> {
        self.check_sources(src)?;
        if !self.sys.metric().is_static() {
            return Err(Error::Precondition("time reflection needs a static metric".into()));
        }
        let n = self.time.slices;
        for i in 0..n {
            let (x, y) = (&src.slices[i], &src.slices[n - 1 - i]);
            let mirrored = SourceSlice {
                je: x.je.clone(),
                jb: x.jb.as_ref().map(|c| c.scale(-1.0)),
                ze: x.ze.clone(),
                zb: x.zb.as_ref().map(|c| c.scale(-1.0)),
            };
            if slice_max(&mirrored.add(&y.scale(-1.0))?) > 0.0 {
                return Err(Error::Precondition("source is not symmetric under time reflection".into()));
            }
        }
        let g = self.causal(src)?;
        let scale = g.max_abs();
        if scale == 0.0 {
            return Ok(0.0);
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            let (a, b) = (&g.states[n - 1 - i], &g.states[i]);
            worst = worst.max(a.fe.add(&b.fe)?.max_abs()).max(a.fb.sub(&b.fb)?.max_abs());
        }
        Ok(worst / scale)
    }

    /// Solution through constraint-compatible bump data.
    pub fn bump_solution(&self, bump: &Bump, seed: u64) -> Result<History> {
        self.solution(&compatible_bump_data(&self.sys, bump, seed, self.time.t0)?.state)
    }

    /// Randomized checks of `G D = 0`, `D G = 0` on admissible sources and
    /// exact reconstruction of solutions from a time cutoff.
    pub fn exact_sequence_suite(&self, trials: usize, seed: u64) -> Result<ExactSequenceReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = self.sys.grid();
        let (t0, t1) = (self.time.t0, self.time.end());
        let span = t1 - t0;
        let mut rep = ExactSequenceReport { trials, g_after_d: 0.0, d_after_g: 0.0, reconstruction: 0.0 };
        for _ in 0..trials {
            let bump = random_bump(grid, &mut rng);
            let t_c = t0 + span * rng.gen_range(0.45..0.55);
            let omega = self.pulse(&bump, rng.gen(), t_c, 0.25 * span)?;
            let g = self.causal(&self.d_op(&omega)?)?;
            rep.g_after_d = rep.g_after_d.max(self.history_norm(&g)? / self.history_norm(&omega)?);

            let f = self.bump_solution(&bump, rng.gen())?;
            let chi = CutoffProfile::new(t_c, 0.2 * span)?.on(&self.time);
            let s = self.commutator(&f, &chi)?;
            let gs = self.causal(&s)?;
            let r = self.d_op(&gs)?;
            rep.d_after_g = rep.d_after_g.max(self.source_norm(&r)? / self.source_norm(&s)?);

            let back = self.reconstruct(&f, &chi)?;
            rep.reconstruction = rep.reconstruction.max(self.history_norm(&back.sub(&f)?)? / self.history_norm(&f)?);
        }
        Ok(rep)
    }

    /// `Σ_n w_n [-⟨XE, β^{-1} FE⟩ + ⟨XB, β FB⟩]` for a component pair
    /// `(xe, xb)` of this system's degree.
    fn pair_components(&self, xe: &[Option<&Cochain>], xb: &[Option<&Cochain>], h: &History) -> Result<f64> {
        let sys = &self.sys;
        let (g, m) = (sys.grid(), sys.metric());
        let w = self.time.weights();
        let mut acc = 0.0;
        for (i, s) in h.states.iter().enumerate() {
            let t = s.t;
            if let Some(x) = xe[i] {
                acc -= w[i] * g.pair_weighted(x, &s.fe, t, m, &recip(sys.beta_on(sys.fe_degree(), t)))?;
            }
            if let Some(x) = xb[i] {
                acc += w[i] * g.pair_weighted(x, &s.fb, t, m, &sys.beta_on(g.d() - sys.k(), t))?;
            }
        }
        Ok(acc)
    }
}

/// Smooth random bump well inside the box, resolved on the coarsest grids
/// the identities are checked on.
fn random_bump<R: Rng>(grid: &Grid, rng: &mut R) -> Bump {
    let lengths = &grid.spec().lengths;
    let short = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    let center = lengths.iter().map(|l| l * (0.5 + rng.gen_range(-0.03..0.03))).collect();
    Bump { center, radius: short * rng.gen_range(0.38..0.42), power: 6 }
}

/// `∫_{t_i}^{t_{i+1}}` weights of the cubic through the four slices around
/// the interval, as `(first slice, weights)`.
fn interval_weights(i: usize, len: usize, dt: f64) -> (usize, [f64; 4]) {
    let base = i.saturating_sub(1).min(len - 4);
    let mid = (i - base) as f64 + 0.5;
    let off = 0.5 / 3f64.sqrt();
    let mut w = [0.0; 4];
    for u in [mid - off, mid + off] {
        for (m, wm) in w.iter_mut().enumerate() {
            let l: f64 = (0..4).filter(|l| *l != m).map(|l| (u - l as f64) / (m as f64 - l as f64)).product();
            *wm += 0.5 * dt * l;
        }
    }
    (base, w)
}

/// Histories of degrees `1..=n-1` on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub parts: Vec<History>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceBundle {
    pub parts: Vec<SourceHistory>,
}

impl SourceBundle {
    pub fn scale_all(&self, a: f64) -> Self {
        SourceBundle { parts: self.parts.iter().map(|p| p.scale(a)).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub k: usize,
    /// `‖D_h F‖ T / ‖F‖` with `T` the time span
    pub solution_residual: f64,
    pub boundary_normal: f64,
    /// `max |σ(F', F)| / (‖F'(t_c)‖ ‖F(t_c)‖)` over the probes
    pub max_relative: f64,
    pub values: Vec<f64>,
}

/// Green operators for every degree `1..=n-1` sharing one grid.
#[derive(Debug, Clone)]
pub struct GreenBundle {
    pub degrees: Vec<Green>,
}

impl GreenBundle {
    pub fn new(grid: &Grid, metric: MetricField, time: TimeGrid, cfl: f64) -> Result<Self> {
        let n = grid.n();
        let degrees =
            (1..n).map(|k| Green::new(Maxwell::new(grid.clone(), metric, k)?, time, cfl)).collect::<Result<_>>()?;
        Ok(GreenBundle { degrees })
    }

    pub fn n(&self) -> usize {
        self.degrees.len() + 1
    }

    pub fn time(&self) -> &TimeGrid {
        self.degrees[0].time()
    }

    fn degree(&self, k: usize) -> Option<&Green> {
        if k >= 1 && k < self.n() {
            Some(&self.degrees[k - 1])
        } else {
            None
        }
    }

    fn check(&self, f: &Bundle) -> Result<()> {
        if f.parts.len() != self.degrees.len() {
            return Err(Error::InvalidArgument(format!("bundle has {} degrees, expected {}", f.parts.len(), self.degrees.len())));
        }
        Ok(())
    }

    pub fn zeros(&self) -> Bundle {
        Bundle { parts: self.degrees.iter().map(|g| g.zeros()).collect() }
    }

    /// Bundle that is zero except for `h` in its own degree.
    pub fn single(&self, h: History) -> Result<Bundle> {
        let mut b = self.zeros();
        let k = h.k();
        if self.degree(k).is_none() {
            return Err(Error::InvalidArgument(format!("degree {k} outside 1..{}", self.n())));
        }
        b.parts[k - 1] = h;
        Ok(b)
    }

    /// `(S, F)_⊕ = Σ_k (α_k, F_{k-1}) + (ζ_k, F_{k+1})`, where `α_k = (je, jb)`
    /// and `ζ_k = (ze, zb)` are the source components of degree `k`.
    pub fn pair(&self, s: &SourceBundle, f: &Bundle) -> Result<f64> {
        self.check(f)?;
        let mut acc = 0.0;
        for (i, src) in s.parts.iter().enumerate() {
            let k = i + 1;
            if let Some(g) = self.degree(k - 1) {
                let xe: Vec<_> = src.slices.iter().map(|s| s.je.as_ref()).collect();
                let xb: Vec<_> = src.slices.iter().map(|s| s.jb.as_ref()).collect();
                acc += g.pair_components(&xe, &xb, &f.parts[k - 2])?;
            }
            if let Some(g) = self.degree(k + 1) {
                let xe: Vec<_> = src.slices.iter().map(|s| s.ze.as_ref()).collect();
                let xb: Vec<_> = src.slices.iter().map(|s| s.zb.as_ref()).collect();
                acc += g.pair_components(&xe, &xb, &f.parts[k])?;
            }
        }
        Ok(acc)
    }

    pub fn commutator(&self, f: &Bundle, chi: &[f64]) -> Result<SourceBundle> {
        self.check(f)?;
        let parts = self.degrees.iter().zip(&f.parts).map(|(g, h)| g.commutator(h, chi)).collect::<Result<_>>()?;
        Ok(SourceBundle { parts })
    }

    pub fn causal(&self, s: &SourceBundle) -> Result<Bundle> {
        let parts = self.degrees.iter().zip(&s.parts).map(|(g, s)| g.causal(s)).collect::<Result<_>>()?;
        Ok(Bundle { parts })
    }

    /// `σ(F1, F2) = ([D_h, χ] F1, F2)_⊕`.
    pub fn presymplectic(&self, f1: &Bundle, f2: &Bundle, chi: &CutoffProfile) -> Result<f64> {
        self.pair(&self.commutator(f1, &chi.on(self.time()))?, f2)
    }

    /// `ς(S1, S2) = (S1, G S2)_⊕`.
    pub fn source_form(&self, s1: &SourceBundle, s2: &SourceBundle) -> Result<f64> {
        self.pair(s1, &self.causal(s2)?)
    }

    /// Spatial norm of the bundle on one slice.
    pub fn norm_at(&self, f: &Bundle, slice: usize) -> Result<f64> {
        let mut acc = 0.0;
        for (g, h) in self.degrees.iter().zip(&f.parts) {
            acc += g.system().state_norm(&h.states[slice])?.powi(2);
        }
        Ok(acc.sqrt())
    }

    /// Random solutions of every degree from compatible bump data, plus
    /// (optionally) random constant fields, which are harmonic when the box
    /// is a torus and the lapse is constant.
    pub fn random_solution(&self, seed: u64, harmonic: bool) -> Result<Bundle> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut parts = Vec::new();
        for g in &self.degrees {
            let sys = g.system();
            let grid = sys.grid();
            let bump = random_bump(grid, &mut rng);
            let mut s0 = compatible_bump_data(sys, &bump, rng.gen(), g.time().t0)?.state;
            if harmonic {
                let d = grid.d();
                let (pe, pb) = (sys.fe_degree(), sys.k());
                let ce = AlgebraForm::from_coeffs(d, pe, (0..binomial(d, pe)).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
                let cb = AlgebraForm::from_coeffs(d, pb, (0..binomial(d, pb)).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
                let t0 = g.time().t0;
                let fe = mul(&grid.sample_primal(pe, |_| ce.clone()), &sys.beta_on(pe, t0));
                let mut fb = grid.sample_dual(pb, |_| cb.clone());
                grid.project_relative(&mut fb);
                s0.fe.axpy(1.0, &fe);
                s0.fb.axpy(1.0, &fb);
            }
            parts.push(g.solution(&s0)?);
        }
        Ok(Bundle { parts })
    }

    /// Potential `A` of degree `k-1` whose image `D_h A` is a (numerical)
    /// solution of degree `k`: `a_E = 0` and `a_B` the running time integral
    /// of `* fe` along a compatible solution (cubic quadrature), started from
    /// its potential `v`.
    pub fn admissible_potential(&self, k: usize, seed: u64) -> Result<History> {
        let (g, ga) = match (self.degree(k), self.degree(k.wrapping_sub(1))) {
            (Some(g), Some(ga)) => (g, ga),
            _ => return Err(Error::InvalidArgument(format!("potential needs 2 <= k <= {}", self.n() - 1))),
        };
        let sys = g.system();
        let (grid, m) = (sys.grid(), sys.metric());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bump = random_bump(grid, &mut rng);
        let data = compatible_bump_data(sys, &bump, rng.gen(), g.time().t0)?;
        let sol = g.solution(&data.state)?;
        let time = *g.time();
        let mut a = ga.zeros();
        let mut star = Vec::with_capacity(time.slices);
        for (i, st) in sol.states.iter().enumerate() {
            star.push(grid.hodge_sigma(&st.fe, time.time(i), m)?);
        }
        let mut acc = data.v.clone();
        a.states[0].fb = acc.clone();
        for i in 1..time.slices {
            let (base, w) = interval_weights(i - 1, time.slices, time.dt);
            for (m, wm) in w.iter().enumerate() {
                acc.axpy(*wm, &star[base + m]);
            }
            a.states[i].fb = acc.clone();
        }
        if ga.boundary_mode() == BoundaryMode::ProjectB {
            for s in &mut a.states {
                grid.project_relative(&mut s.fb);
            }
        }
        Ok(a)
    }

    /// `F = ζ`-part of `D_h A`, checked to be a solution, then paired
    /// against each probe: `σ(F', F)` must vanish when `F` is exact.
    pub fn degeneracy_forward_check(&self, a: &History, probes: &[Bundle], chi: &CutoffProfile) -> Result<DegeneracyReport> {
        let ga = self.degree(a.k()).ok_or_else(|| Error::InvalidArgument("potential degree out of range".into()))?;
        let k = a.k() + 1;
        let g = self.degree(k).ok_or_else(|| Error::InvalidArgument(format!("degree {k} has no Green operator")))?;
        let da = ga.d_op(a)?;
        let mut states = Vec::with_capacity(da.slices.len());
        for (i, sl) in da.slices.iter().enumerate() {
            let t = ga.time().time(i);
            let fe = sl.ze.clone().ok_or_else(|| Error::InvalidArgument("potential has no ζ_E component".into()))?;
            let fb = sl.zb.clone().ok_or_else(|| Error::InvalidArgument("potential has no ζ_B component".into()))?;
            states.push(g.system().state(t, fe, fb)?);
        }
        let f = History { time: *g.time(), states };
        self.degeneracy_of(&f, probes, chi)
    }

    /// The probe pairing of [`GreenBundle::degeneracy_forward_check`] for a
    /// given degree-`k` solution history.
    pub fn degeneracy_of(&self, f: &History, probes: &[Bundle], chi: &CutoffProfile) -> Result<DegeneracyReport> {
        let k = f.k();
        let g = self.degree(k).ok_or_else(|| Error::InvalidArgument(format!("degree {k} has no Green operator")))?;
        let grid = g.system().grid();
        let span = g.time().end() - g.time().t0;
        let fnorm = g.history_norm(f)?;
        if fnorm == 0.0 {
            return Ok(DegeneracyReport {
                k,
                solution_residual: 0.0,
                boundary_normal: 0.0,
                max_relative: 0.0,
                values: vec![0.0; probes.len()],
            });
        }
        let solution_residual = g.source_norm(&g.d_op(f)?)? * span / fnorm;
        let boundary_normal = if g.boundary_mode() == BoundaryMode::ProjectB {
            f.states
                .iter()
                .map(|s| {
                    let mut p = s.fb.clone();
                    grid.project_relative(&mut p);
                    p.sub(&s.fb).map(|c| c.max_abs())
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max)
                / f.max_abs()
        } else {
            0.0
        };
        if solution_residual > SOLUTION_TOL || boundary_normal > 1e-12 {
            return Err(Error::Precondition(format!(
                "F fails solution tolerance: residual {solution_residual:.3e} (limit {SOLUTION_TOL:.0e}), normal trace {boundary_normal:.3e}"
            )));
        }
        let fb = self.single(f.clone())?;
        let slice = g.time().nearest(chi.t_c);
        let nf = self.norm_at(&fb, slice)?;
        let mut values = Vec::new();
        let mut max_relative = 0.0f64;
        for p in probes {
            let v = self.presymplectic(p, &fb, chi)?;
            max_relative = max_relative.max(v.abs() / (self.norm_at(p, slice)? * nf));
            values.push(v);
        }
        Ok(DegeneracyReport { k, solution_residual, boundary_normal, max_relative, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{GridSpec, Kind};

    fn box_green(cells: usize, k: usize) -> Green {
        let h = 1.0 / cells as f64;
        let grid = Grid::new(GridSpec::cube(3, cells, 1.0, GREEN_CFL * h)).unwrap();
        let sys = Maxwell::new(grid, MetricField::unit(), k).unwrap();
        let time = TimeGrid::covering(0.0, 0.8, GREEN_CFL * h).unwrap();
        Green::new(sys, time, GREEN_CFL).unwrap()
    }

    fn torus(cells: usize) -> GreenBundle {
        let h = 1.0 / cells as f64;
        let grid = Grid::new(GridSpec::periodic_cube(3, cells, 1.0, GREEN_CFL * h)).unwrap();
        let time = TimeGrid::covering(0.0, 1.0, GREEN_CFL * h).unwrap();
        GreenBundle::new(&grid, MetricField::unit(), time, GREEN_CFL).unwrap()
    }

    fn smooth() -> Bump {
        Bump { center: vec![0.5, 0.5], radius: 0.4, power: 6 }
    }

    fn pulse(g: &Green) -> History {
        g.pulse(&smooth(), 3, 0.4, 0.2).unwrap()
    }

    fn ze_source(g: &Green, slices: &[(usize, f64)]) -> SourceHistory {
        let grid = g.system().grid();
        let mut s = SourceHistory::zeros(g.system().k(), *g.time());
        let shape = grid.sample_primal(0, |x| AlgebraForm::scalar(grid.d(), smooth().value(x)).unwrap());
        for (i, a) in slices {
            s.slices[*i].ze = Some(shape.scale(*a));
        }
        s
    }

    #[test]
    fn time_grid_and_cutoff() {
        let tg = TimeGrid::covering(0.0, 1.0, 0.03).unwrap();
        assert!((tg.end() - 1.0).abs() < 1e-14);
        assert!((tg.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert_eq!(tg.locate(tg.time(7) * (1.0 + 1e-15)), (7, 0.0));
        let chi = CutoffProfile::new(0.5, 0.2).unwrap();
        assert_eq!(chi.value(0.39), 0.0);
        assert_eq!(chi.value(0.61), 1.0);
        assert!((chi.value(0.5) - 0.5).abs() < 1e-15);
        assert!(TimeGrid::new(0.0, -1.0, 10).is_err());
    }

    #[test]
    fn stencil_and_quadrature_are_exact_on_quartics() {
        let (len, dt) = (9, 0.1);
        let f = |t: f64| 1.0 + t - 2.0 * t * t + 0.5 * t.powi(3) + t.powi(4);
        let df = |t: f64| 1.0 - 4.0 * t + 1.5 * t * t + 4.0 * t.powi(3);
        for n in 0..len {
            let v: f64 = stencil(n, len, dt).iter().map(|(j, c)| c * f(*j as f64 * dt)).sum();
            assert!((v - df(n as f64 * dt)).abs() < 1e-11, "{n}");
        }
        let cubic = |t: f64| 2.0 - t + 3.0 * t.powi(3);
        let int = |t: f64| 2.0 * t - 0.5 * t * t + 0.75 * t.powi(4);
        for i in 0..len - 1 {
            let (base, w) = interval_weights(i, len, dt);
            let v: f64 = w.iter().enumerate().map(|(m, w)| w * cubic((base + m) as f64 * dt)).sum();
            assert!((v - (int((i + 1) as f64 * dt) - int(i as f64 * dt))).abs() < 1e-13);
        }
    }

    #[test]
    fn d_op_of_solution_is_fourth_order() {
        let rel = |cells| {
            let g = box_green(cells, 2);
            let f = g.bump_solution(&smooth(), 1).unwrap();
            let r = g.d_op(&f).unwrap();
            // constraint parts vanish to roundoff for compatible data
            let je = r.slices.iter().map(|s| s.je.as_ref().unwrap().max_abs()).fold(0.0, f64::max);
            assert!(je < 1e-9, "{je}");
            g.source_norm(&r).unwrap() / g.history_norm(&f).unwrap()
        };
        let (a, b) = (rel(16), rel(32));
        assert!(a / b > 10.0, "{a} {b}");
    }

    #[test]
    fn zero_and_linearity() {
        let g = box_green(8, 2);
        let z = SourceHistory::zeros(2, *g.time());
        assert!(g.g_plus(&z).unwrap().states.iter().all(|s| s.is_zero()));
        assert!(g.causal(&z).unwrap().states.iter().all(|s| s.is_zero()));
        assert_eq!(g.right_inverse_check(&g.zeros()).unwrap().defect, 0.0);
        let s1 = g.d_op(&pulse(&g)).unwrap();
        let s2 = ze_source(&g, &[(10, 1.0), (11, -0.5)]);
        let lhs = g.g_plus(&s1.scale(2.0).add(&s2.scale(-3.0)).unwrap()).unwrap();
        let rhs = g.g_plus(&s1).unwrap().scale(2.0).sub(&g.g_plus(&s2).unwrap().scale(3.0)).unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12 * lhs.max_abs());
        // exact when ω solves nothing but is zero: G D 0 = 0
        assert!(g.causal(&g.d_op(&g.zeros()).unwrap()).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn one_sided_solves_vanish_on_the_far_side() {
        let g = box_green(8, 2);
        let s = g.d_op(&pulse(&g)).unwrap();
        let (a, b) = (s.first_nonzero().unwrap(), s.last_nonzero().unwrap());
        let gp = g.g_plus(&s).unwrap();
        let gm = g.g_minus(&s).unwrap();
        // nothing before the declared window of the interpolated source
        assert!(gp.states[..=a - STENCIL_REACH].iter().all(|s| s.is_zero()));
        assert!(gm.states[b + STENCIL_REACH..].iter().all(|s| s.is_zero()));
        assert!(!gp.states[b].is_zero() && !gm.states[a].is_zero());
    }

    #[test]
    fn margins_are_enforced() {
        let g = box_green(8, 2);
        let s = ze_source(&g, &[(3, 1.0)]);
        assert!(matches!(g.g_plus(&s), Err(Error::Precondition(_))));
        assert!(g.g_minus(&s).is_ok());
        let last = g.time().slices - 1;
        let s = ze_source(&g, &[(last - 3, 1.0)]);
        assert!(matches!(g.g_minus(&s), Err(Error::Precondition(_))));
    }

    #[test]
    fn right_inverse_converges() {
        let coarse = box_green(16, 2);
        let fine = box_green(32, 2);
        let dc = coarse.right_inverse_check(&pulse(&coarse)).unwrap().defect;
        let df = fine.right_inverse_check(&pulse(&fine)).unwrap().defect;
        assert!(dc < 5e-3, "{dc}");
        assert!(df < dc * 0.25, "{dc} {df}");
    }

    #[test]
    fn right_inverse_rejects_bad_data() {
        let g = box_green(8, 2);
        let mut w = pulse(&g);
        let wide = Bump { center: vec![0.5, 0.5], radius: 0.9, power: 2 };
        let u = raw_bump_state(g.system(), &wide, 1, 0.0).unwrap();
        w.states[10].fe = u.fe.clone();
        assert!(matches!(g.right_inverse_check(&w), Err(Error::Precondition(_))));
        let mut w = pulse(&g);
        let grid = g.system().grid();
        let i = (0..w.states[10].fb.values.len()).find(|i| grid.boundary_mask(grid.layout_degree(Kind::Dual, 2))[*i]).unwrap();
        w.states[10].fb.values[i] = 1.0;
        assert!(matches!(g.right_inverse_check(&w), Err(Error::Precondition(_))));
        let late = g.pulse(&smooth(), 3, 0.78, 0.2).unwrap();
        assert!(matches!(g.right_inverse_check(&late), Err(Error::Precondition(_))));
    }

    #[test]
    fn reconstruct_with_unit_cutoff_is_right_inverse() {
        let g = box_green(8, 2);
        let w = pulse(&g);
        let one = vec![1.0; g.time().slices];
        let r = g.reconstruct(&w, &one).unwrap();
        assert_eq!(r, g.g_plus(&g.d_op(&w).unwrap()).unwrap());
    }

    #[test]
    fn exact_sequence_on_sixteen_cells() {
        let g = box_green(16, 2);
        let r = g.exact_sequence_suite(2, 7).unwrap();
        assert!(r.g_after_d < 5e-3 && r.d_after_g < 5e-3 && r.reconstruction < 5e-3, "{r:?}");
    }

    #[test]
    fn causal_is_odd_under_time_reflection() {
        let g = box_green(8, 2);
        let n = g.time().slices;
        let mid = n / 2;
        let s = ze_source(&g, &[(mid - 1, 0.5), (mid, 1.0), (mid + 1, 0.5)]);
        assert!(g.reflection_defect(&s).unwrap() < 1e-12);
        let s = ze_source(&g, &[(mid - 1, 0.5), (mid, 1.0)]);
        assert!(matches!(g.reflection_defect(&s), Err(Error::Precondition(_))));
    }

    #[test]
    fn commutator_is_time_compact() {
        let g = box_green(8, 2);
        let f = g.bump_solution(&smooth(), 2).unwrap();
        let chi = CutoffProfile::new(0.4, 0.2).unwrap();
        let c = g.commutator(&f, &chi.on(g.time())).unwrap();
        let (a, b) = (c.first_nonzero().unwrap(), c.last_nonzero().unwrap());
        assert!(g.time().time(a) >= 0.2 && g.time().time(b) <= 0.6);
        // D(χF) = χ D F + [D, χ] F
        let chis = chi.on(g.time());
        let lhs = g.d_op(&f.modulate(&chis)).unwrap();
        let df = g.d_op(&f).unwrap();
        let rhs = SourceHistory { k: 2, time: *g.time(), slices: df.slices.iter().zip(&chis).map(|(s, x)| s.scale(*x)).collect() };
        let rhs = rhs.add(&c).unwrap();
        let e = g.source_norm(&lhs.sub(&rhs).unwrap()).unwrap() / g.source_norm(&lhs).unwrap();
        assert!(e < 1e-12, "{e}");
    }

    #[test]
    fn presymplectic_is_skew_and_cutoff_independent() {
        let gb = torus(8);
        let f1 = gb.random_solution(1, true).unwrap();
        let f2 = gb.random_solution(2, true).unwrap();
        let t = *gb.time();
        let c1 = CutoffProfile::default_for(&t, 0.5);
        let c2 = CutoffProfile::new(0.5, 2.0 * c1.width).unwrap();
        let s12 = gb.presymplectic(&f1, &f2, &c1).unwrap();
        let s21 = gb.presymplectic(&f2, &f1, &c1).unwrap();
        let s12b = gb.presymplectic(&f1, &f2, &c2).unwrap();
        let scale = gb.norm_at(&f1, t.nearest(0.5)).unwrap() * gb.norm_at(&f2, t.nearest(0.5)).unwrap();
        assert!(s12.abs() > 1e-3 * scale, "{s12}");
        assert!((s12 + s21).abs() < 1e-10 * scale, "{s12} {s21}");
        assert!((s12 - s12b).abs() < 1e-9 * scale, "{s12} {s12b}");
        let f11 = gb.presymplectic(&f1, &f1, &c1).unwrap();
        assert!(f11.abs() < 1e-10 * gb.norm_at(&f1, t.nearest(0.5)).unwrap().powi(2));
        // without harmonic parts every solution on the torus is exact
        let e1 = gb.random_solution(1, false).unwrap();
        assert!(gb.presymplectic(&e1, &f2, &c1).unwrap().abs() < 1e-10 * scale);
    }

    #[test]
    fn source_form_matches_presymplectic_of_causal() {
        let gb = torus(8);
        let t = *gb.time();
        let cs = CutoffProfile::new(0.35, 10.0 * t.dt).unwrap().on(&t);
        let s1 = gb.commutator(&gb.random_solution(3, true).unwrap(), &cs).unwrap();
        let s2 = gb.commutator(&gb.random_solution(4, true).unwrap(), &cs).unwrap();
        let v = gb.source_form(&s1, &s2).unwrap();
        let (g1, g2) = (gb.causal(&s1).unwrap(), gb.causal(&s2).unwrap());
        let w = gb.presymplectic(&g1, &g2, &CutoffProfile::default_for(&t, 0.6)).unwrap();
        let scale = gb.norm_at(&g1, t.nearest(0.6)).unwrap() * gb.norm_at(&g2, t.nearest(0.6)).unwrap();
        assert!((v - w).abs() < 5e-3 * scale, "{v} {w}");
        let zero = SourceBundle { parts: s2.parts.iter().map(|p| p.scale(0.0)).collect() };
        assert_eq!(gb.source_form(&s1, &zero).unwrap(), 0.0);
        let lin = gb.source_form(&s1, &s2.scale_all(2.0)).unwrap();
        assert!((lin - 2.0 * v).abs() < 1e-12 * v.abs().max(1.0));
    }

    #[test]
    fn degeneracy_forward_and_falsified() {
        let gb = torus(16);
        let t = *gb.time();
        let chi = CutoffProfile::default_for(&t, 0.5);
        let probes: Vec<_> = (10..13).map(|s| gb.random_solution(s, true).unwrap()).collect();
        let a = gb.admissible_potential(2, 5).unwrap();
        let r = gb.degeneracy_forward_check(&a, &probes, &chi).unwrap();
        assert!(r.max_relative < 5e-3, "{r:?}");
        let zero = gb.degeneracy_forward_check(&gb.degrees[0].zeros(), &probes, &chi).unwrap();
        assert!(zero.values.iter().all(|v| *v == 0.0));
        let genuine = gb.random_solution(20, true).unwrap().parts[1].clone();
        assert!(gb.degeneracy_of(&genuine, &probes, &chi).unwrap().max_relative > 5e-3);
        let junk = gb.degrees[1].pulse(&smooth(), 1, 0.5, 0.2).unwrap();
        assert!(matches!(gb.degeneracy_of(&junk, &probes, &chi), Err(Error::Precondition(_))));
    }
}
