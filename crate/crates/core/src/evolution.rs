//! Explicit RK4 integration of the split system with strong enforcement of
//! `𝚗⌟F_B = 0`, and the diagnostics that ride along with it: constraint
//! norms, energy, and the cone tracker.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{parity, Cochain, Grid, Kind};
use crate::error::{Error, Result};
use crate::exterior::{binomial, AlgebraForm};
use crate::maxwell::{jb_sign, ConstraintNorms, FieldState, Maxwell, SourceData, SourceSlice};
pub use crate::tolerances::CONE_LEAK_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryMode {
    /// Zero the normal-leg values of `fb` after every stage.
    ProjectB,
    /// Fully periodic box; no boundary at all.
    PeriodicTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub t_final: f64,
    pub cfl: f64,
    pub boundary_mode: BoundaryMode,
    pub monitor_stride: usize,
    pub seed: u64,
}

impl EvolveConfig {
    pub fn new(t_final: f64) -> Self {
        EvolveConfig { t_final, cfl: 0.4, boundary_mode: BoundaryMode::ProjectB, monitor_stride: 1, seed: 0 }
    }

    /// Courant number above which RK4 on the staggered curl is unstable:
    /// the operator's spectral radius is `2 √d c / h` and RK4 covers the
    /// imaginary axis up to `2√2`. Capped by the accepted `cfl` range.
    pub fn stability_limit(d: usize) -> f64 {
        (2.0 / d.max(1) as f64).sqrt().min(0.9)
    }

    pub fn validate(&self, t0: f64) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 0.9) {
            return Err(Error::InvalidArgument(format!("cfl={} outside (0, 0.9]", self.cfl)));
        }
        if !(self.t_final > t0) {
            return Err(Error::InvalidArgument(format!("t_final={} not after t0={t0}", self.t_final)));
        }
        if self.monitor_stride == 0 {
            return Err(Error::InvalidArgument("monitor_stride must be positive".into()));
        }
        Ok(())
    }
}

// ---- support tracking ----

/// Axis-aligned box containing a support set; distances are measured to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Support {
    pub fn empty(d: usize) -> Self {
        Support { lo: vec![f64::INFINITY; d], hi: vec![f64::NEG_INFINITY; d] }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn include_point(&mut self, x: &[f64]) {
        for a in 0..self.lo.len() {
            self.lo[a] = self.lo[a].min(x[a]);
            self.hi[a] = self.hi[a].max(x[a]);
        }
    }

    pub fn include_box(&mut self, lo: &[f64], hi: &[f64]) {
        self.include_point(lo);
        self.include_point(hi);
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        if self.is_empty() {
            return f64::INFINITY;
        }
        let mut r2 = 0.0;
        for a in 0..self.lo.len() {
            let e = (self.lo[a] - x[a]).max(x[a] - self.hi[a]).max(0.0);
            r2 += e * e;
        }
        r2.sqrt()
    }

    /// Centres of all cells carrying a nonzero value.
    pub fn of_state(sys: &Maxwell, s: &FieldState) -> Self {
        let mut sup = Support::empty(sys.grid().d());
        let d = sys.grid().d();
        for (c, j) in [(&s.fe, sys.fe_degree()), (&s.fb, d - sys.k())] {
            for (v, x) in c.values.iter().zip(sys.centers(j)) {
                if *v != 0.0 {
                    sup.include_point(x);
                }
            }
        }
        sup
    }

    /// Support of the state together with the source box (whole domain if the
    /// source has no declared box).
    pub fn of_problem(sys: &Maxwell, s: &FieldState, src: &SourceData) -> Self {
        let mut sup = Self::of_state(sys, s);
        if !src.is_zero() {
            match &src.bbox {
                Some((lo, hi)) => sup.include_box(lo, hi),
                None => {
                    let lo = vec![0.0; sys.grid().d()];
                    sup.include_box(&lo, &sys.grid().spec().lengths);
                }
            }
        }
        sup
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSample {
    pub t: f64,
    pub r_e: f64,
    pub r_b: f64,
    pub r_bdy: f64,
    pub energy: f64,
    /// Max coefficient density over all cells.
    pub state_max: f64,
    pub state_norm: f64,
    /// Largest distance from the support box at which the density exceeds
    /// `1e-7 * state_max`.
    pub support_radius: f64,
    /// Max density outside the cone of the solver's `c_max`.
    pub cone_leak: f64,
    /// Max `|normal_contract(fb)|` over all faces.
    pub fb_normal: f64,
    /// Max density per distance bin of width `bin`.
    pub envelope: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSeries {
    pub t0: f64,
    pub c_max: f64,
    pub halo: f64,
    pub bin: f64,
    pub support: Support,
    pub samples: Vec<MonitorSample>,
}

impl MonitorSeries {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Max density strictly outside radius `r` of the support box.
    pub fn leak_beyond(&self, sample: &MonitorSample, r: f64) -> f64 {
        sample
            .envelope
            .iter()
            .enumerate()
            .filter(|(b, _)| *b as f64 * self.bin >= r)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportVerdict {
    pub pass: bool,
    pub c_max: f64,
    /// Worst `leak / state_max` over the samples.
    pub worst_ratio: f64,
    pub worst_time: f64,
    pub threshold: f64,
}

/// Checks that the state outside `r0 + c_max (t - t0) + halo` stays below
/// `1e-7` of its maximum at every sample.
pub fn support_audit(series: &MonitorSeries, c_max: f64) -> SupportVerdict {
    let mut worst = 0.0f64;
    let mut worst_t = series.t0;
    let mut pass = true;
    for s in &series.samples {
        let r = c_max * (s.t - series.t0).abs() + series.halo;
        let leak = series.leak_beyond(s, r);
        let ratio = if s.state_max > 0.0 { leak / s.state_max } else { 0.0 };
        if ratio >= CONE_LEAK_TOL {
            pass = false;
        }
        if ratio > worst {
            worst = ratio;
            worst_t = s.t;
        }
    }
    SupportVerdict { pass, c_max, worst_ratio: worst, worst_time: worst_t, threshold: CONE_LEAK_TOL }
}

struct Tracker {
    support: Support,
    bin: f64,
    nbins: usize,
    fe_bins: Vec<Option<usize>>,
    fb_bins: Vec<Option<usize>>,
}

impl Tracker {
    fn new(sys: &Maxwell, support: Support) -> Self {
        let g = sys.grid();
        let bin = g.h_min() / 8.0;
        let locate = |j: usize| -> Vec<Option<usize>> {
            sys.centers(j)
                .iter()
                .map(|x| {
                    let r = support.distance(x);
                    r.is_finite().then(|| (r / bin).floor() as usize)
                })
                .collect()
        };
        let fe_bins = locate(sys.fe_degree());
        let fb_bins = locate(g.d() - sys.k());
        let nbins = fe_bins.iter().chain(&fb_bins).flatten().max().map_or(0, |m| m + 1);
        Tracker { support, bin, nbins, fe_bins, fb_bins }
    }

    fn envelope(&self, g: &Grid, s: &FieldState) -> (Vec<f64>, f64) {
        let mut env = vec![0.0f64; self.nbins];
        let mut all = 0.0f64;
        for (c, bins) in [(&s.fe, &self.fe_bins), (&s.fb, &self.fb_bins)] {
            for (v, b) in g.densities(c).iter().zip(bins) {
                let v = v.abs();
                all = all.max(v);
                if let Some(b) = b {
                    env[*b] = env[*b].max(v);
                }
            }
        }
        if self.support.is_empty() {
            // every cell is outside an empty support
            env = vec![all];
        }
        (env, all)
    }
}

// ---- solver ----

/// RK4 integrator for one Maxwell system.
#[derive(Debug, Clone)]
pub struct Solver<'a> {
    sys: &'a Maxwell,
    cfg: EvolveConfig,
    c_max: f64,
}

impl<'a> Solver<'a> {
    /// Wave-speed bound is taken over `[t0, t_final]` with `t0` the grid's start time.
    pub fn new(sys: &'a Maxwell, cfg: EvolveConfig) -> Result<Self> {
        Self::over(sys, cfg, sys.grid().spec().t0)
    }

    /// As [`Solver::new`] with an explicit start time.
    pub fn over(sys: &'a Maxwell, cfg: EvolveConfig, t0: f64) -> Result<Self> {
        cfg.validate(t0)?;
        let periodic = &sys.grid().spec().periodic;
        if cfg.boundary_mode == BoundaryMode::PeriodicTest && !periodic.iter().all(|p| *p) {
            return Err(Error::InvalidArgument("periodic_test mode needs a fully periodic grid".into()));
        }
        let c_max = sys.c_max(t0.min(cfg.t_final), t0.max(cfg.t_final));
        Ok(Solver { sys, cfg, c_max })
    }

    pub fn system(&self) -> &Maxwell {
        self.sys
    }

    pub fn config(&self) -> &EvolveConfig {
        &self.cfg
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    /// Largest admissible `|dt|`: `cfl * h_min / c_max`.
    pub fn dt_limit(&self) -> f64 {
        self.cfg.cfl * self.sys.grid().h_min() / self.c_max
    }

    pub fn check_cfl(&self, dt: f64) -> Result<()> {
        let limit = self.dt_limit();
        if !(dt.abs() <= limit * (1.0 + 1e-12)) || dt == 0.0 {
            return Err(Error::CflViolation { dt: dt.abs(), limit });
        }
        Ok(())
    }

    fn project(&self, s: &mut FieldState) {
        if self.cfg.boundary_mode == BoundaryMode::ProjectB {
            self.sys.grid().project_relative(&mut s.fb);
        }
    }

    fn stage(&self, s: &FieldState, h: f64, k: &FieldState, t: f64) -> FieldState {
        let mut out = s.clone();
        out.axpy(h, k);
        out.t = t;
        self.project(&mut out);
        out
    }

    /// One classical RK4 step of size `dt` (negative steps run backward).
    pub fn step(&self, s: &FieldState, src: &SourceData, dt: f64) -> Result<FieldState> {
        self.check_cfl(dt)?;
        self.step_unchecked(s, src, dt)
    }

    fn step_unchecked(&self, s: &FieldState, src: &SourceData, dt: f64) -> Result<FieldState> {
        let t = s.t;
        let th = t + 0.5 * dt;
        let (s0, sh, s1) = (src.eval(t), src.eval(th), src.eval(t + dt));
        let k1 = self.sys.derivative(s, &s0)?;
        let k2 = self.sys.derivative(&self.stage(s, 0.5 * dt, &k1, th), &sh)?;
        let k3 = self.sys.derivative(&self.stage(s, 0.5 * dt, &k2, th), &sh)?;
        let k4 = self.sys.derivative(&self.stage(s, dt, &k3, t + dt), &s1)?;
        let mut out = s.clone();
        out.axpy(dt / 6.0, &k1);
        out.axpy(dt / 3.0, &k2);
        out.axpy(dt / 3.0, &k3);
        out.axpy(dt / 6.0, &k4);
        out.t = t + dt;
        self.project(&mut out);
        Ok(out)
    }

    /// Uniform step count and size covering `[t_start, t_end]` with steps
    /// no longer than the grid's nominal `dt`.
    pub fn schedule(&self, t_start: f64, t_end: f64) -> (usize, f64) {
        let span = t_end - t_start;
        let nominal = self.sys.grid().spec().dt;
        let n = ((span.abs() / nominal) - 1e-9).ceil().max(1.0) as usize;
        (n, span / n as f64)
    }

    /// Integrate `nsteps` steps of size `dt`, calling `visit` on the initial
    /// and every accepted state.
    pub fn integrate<F>(&self, s0: &FieldState, src: &SourceData, dt: f64, nsteps: usize, mut visit: F) -> Result<FieldState>
    where
        F: FnMut(usize, &FieldState) -> Result<()>,
    {
        self.sys.check_state(s0)?;
        self.check_cfl(dt)?;
        let mut s = s0.clone();
        self.project(&mut s);
        visit(0, &s)?;
        for i in 1..=nsteps {
            let next = self.step_unchecked(&s, src, dt)?;
            if !next.max_abs().is_finite() {
                return Err(Error::Unstable { at: next.t, last_stable: s.t });
            }
            s = next;
            visit(i, &s)?;
        }
        Ok(s)
    }

    /// Full run to `t_final` with monitors every `monitor_stride` steps and at
    /// the end.
    pub fn evolve(&self, s0: &FieldState, src: &SourceData) -> Result<(FieldState, MonitorSeries)> {
        let (nsteps, dt) = self.schedule(s0.t, self.cfg.t_final);
        let support = Support::of_problem(self.sys, s0, src);
        let tracker = Tracker::new(self.sys, support.clone());
        let g = self.sys.grid();
        let h_max = g.h().iter().cloned().fold(0.0, f64::max);
        let mut series =
            MonitorSeries { t0: s0.t, c_max: self.c_max, halo: 4.0 * h_max, bin: tracker.bin, support, samples: vec![] };
        let stride = self.cfg.monitor_stride;
        let last = self.integrate(s0, src, dt, nsteps, |i, s| {
            if i % stride == 0 || i == nsteps {
                let sample = self.sample(&tracker, &series, s, src)?;
                series.samples.push(sample);
            }
            Ok(())
        })?;
        Ok((last, series))
    }

    fn sample(&self, tr: &Tracker, series: &MonitorSeries, s: &FieldState, src: &SourceData) -> Result<MonitorSample> {
        let g = self.sys.grid();
        let m = self.sys.metric();
        let cn = self.sys.constraint_norms(s, &src.eval(s.t))?;
        let (envelope, state_max) = tr.envelope(g, s);
        let mut fb_normal = 0.0f64;
        for f in g.faces() {
            fb_normal = fb_normal.max(g.normal_contract(&s.fb, f, s.t, m)?.max_abs());
        }
        let support_radius = envelope
            .iter()
            .rposition(|v| *v > CONE_LEAK_TOL * state_max)
            .map_or(0.0, |b| (b + 1) as f64 * tr.bin);
        let mut sample = MonitorSample {
            t: s.t,
            r_e: cn.r_e,
            r_b: cn.r_b,
            r_bdy: cn.r_bdy,
            energy: self.sys.energy(s)?,
            state_max,
            state_norm: self.sys.state_norm(s)?,
            support_radius,
            cone_leak: 0.0,
            fb_normal,
            envelope,
        };
        sample.cone_leak = series.leak_beyond(&sample, self.c_max * (s.t - series.t0).abs() + series.halo);
        Ok(sample)
    }
}

// ---- problem validation ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub message: String,
}

impl Check {
    /// Passes when `value <= threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64, message: &str) -> Self {
        Check { name: name.into(), value, threshold, pass: value <= threshold, message: message.into() }
    }

    /// Passes when `value >= threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64, message: &str) -> Self {
        Check { name: name.into(), value, threshold, pass: value >= threshold, message: message.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Error naming every failed hypothesis with its measured value.
    pub fn ensure(&self) -> Result<()> {
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("{} ({} = {:.3e}, threshold {:.3e})", c.message, c.name, c.value, c.threshold))
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::Precondition(failed.join("; ")))
        }
    }
}

pub const CLOSED_TOL: f64 = 1e-12;
pub const CONTINUITY_TOL: f64 = 1e-8;
pub const SUPPORT_MARGIN_CELLS: f64 = 2.0;
const FD_TIME_STEP: f64 = 1e-4;
const CONTINUITY_SAMPLES: usize = 9;

/// Source continuity residuals at one time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Continuity {
    /// `d(β^{-1} je)`
    pub j_closed: f64,
    /// `(-1)^{n-k} ∂t(β^{-1} je) - c_j d(β * jb)`
    pub j_evol: f64,
    /// `P d zb`
    pub z_closed: f64,
    /// `P(∂t zb - d(P * ze))`
    pub z_evol: f64,
    /// Boundary values of `jb`.
    pub jb_bdy: f64,
}

fn time_derivative(src: &SourceData, t: f64, pick: impl Fn(&SourceSlice) -> Option<Cochain>) -> Option<Cochain> {
    let h = FD_TIME_STEP;
    let coef = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
    let mut acc: Option<Cochain> = None;
    for (o, w) in coef {
        if let Some(c) = pick(&src.eval(t + o * h)) {
            match &mut acc {
                Some(a) => a.axpy(w / h, &c),
                None => acc = Some(c.scale(w / h)),
            }
        }
    }
    acc
}

fn weighted(c: &Cochain, w: &[f64]) -> Cochain {
    Cochain { kind: c.kind, degree: c.degree, values: c.values.iter().zip(w).map(|(v, w)| v * w).collect() }
}

/// Continuity residuals of the source at time `t` (central differences in time).
pub fn continuity_residuals(sys: &Maxwell, src: &SourceData, t: f64) -> Result<Continuity> {
    let g = sys.grid();
    let m = sys.metric();
    let (n, k) = (sys.n(), sys.k());
    let fe_deg = sys.fe_degree();
    let sl = src.eval(t);
    let mut out = Continuity::default();
    let norm = |c: &Cochain| g.norm_sigma(c, t, m);

    let inv_on = |j: usize| -> Vec<f64> { sys.beta_on(j, t).iter().map(|b| 1.0 / b).collect() };
    if let Some(je) = &sl.je {
        if fe_deg + 2 <= g.d() {
            out.j_closed = norm(&g.d_primal(&weighted(je, &inv_on(fe_deg + 1)))?)?;
        }
    }
    let dje = time_derivative(src, t, |s| s.je.clone());
    let mut j_evol: Option<Cochain> = None;
    if let Some(dje) = dje {
        // β is time-independent except for the breathing lapse, whose rate we add back
        let inv = inv_on(fe_deg + 1);
        let mut r = weighted(&dje, &inv);
        let rate: Vec<f64> = sys.centers(fe_deg + 1).iter().map(|x| -m.dbeta_dt(t, x) / m.beta(t, x)).collect();
        if let Some(je) = &sl.je {
            r.axpy(1.0, &weighted(&weighted(je, &inv), &rate));
        }
        j_evol = Some(r.scale(parity(n - k)));
    }
    if let Some(jb) = &sl.jb {
        let sj = weighted(&g.hodge_sigma(jb, t, m)?, &sys.beta_on(fe_deg, t));
        let dj = g.d_primal(&sj)?.scale(-jb_sign(n, k));
        j_evol = Some(match j_evol {
            Some(mut r) => {
                r.axpy(1.0, &dj);
                r
            }
            None => dj,
        });
        let mask = g.boundary_mask(g.layout_degree(Kind::Dual, jb.degree));
        out.jb_bdy = jb.values.iter().zip(mask).filter(|(_, b)| **b).map(|(v, _)| v.abs()).fold(0.0, f64::max);
    }
    if let Some(r) = j_evol {
        out.j_evol = norm(&r)?;
    }

    if let Some(zb) = &sl.zb {
        if zb.degree < g.d() {
            out.z_closed = norm(&g.d_dual(zb)?)?;
        }
    }
    let mut z_evol = time_derivative(src, t, |s| s.zb.clone());
    if let Some(ze) = &sl.ze {
        let mut sz = g.hodge_sigma(ze, t, m)?;
        g.project_relative(&mut sz);
        let dz = g.d_dual_full(&sz)?.scale(-1.0);
        z_evol = Some(match z_evol {
            Some(mut r) => {
                r.axpy(1.0, &dz);
                r
            }
            None => dz,
        });
    }
    if let Some(mut r) = z_evol {
        g.project_relative(&mut r);
        out.z_evol = norm(&r)?;
    }
    Ok(out)
}

fn boundary_margin_cells(sys: &Maxwell, s: &FieldState) -> f64 {
    let g = sys.grid();
    let spec = g.spec();
    let mut margin = f64::INFINITY;
    let d = g.d();
    for (c, j) in [(&s.fe, sys.fe_degree()), (&s.fb, d - sys.k())] {
        for (v, x) in c.values.iter().zip(sys.centers(j)) {
            if *v == 0.0 {
                continue;
            }
            for a in 0..d {
                if !spec.periodic[a] {
                    let e = x[a].min(spec.lengths[a] - x[a]) / g.h()[a];
                    margin = margin.min(e);
                }
            }
        }
    }
    margin
}

/// Hypotheses of the well-posedness statement, checked on the discrete data.
pub fn validate_problem(sys: &Maxwell, s0: &FieldState, src: &SourceData) -> Result<ValidationReport> {
    sys.check_state(s0)?;
    let g = sys.grid();
    let t0 = s0.t;
    let mut checks = Vec::new();
    checks.push(Check::at_least(
        "support_margin",
        boundary_margin_cells(sys, s0),
        SUPPORT_MARGIN_CELLS,
        "initial support meets ∂Σ",
    ));
    if !src.is_zero() {
        checks.push(Check::at_least(
            "source_start",
            src.window.0 - t0,
            f64::MIN_POSITIVE,
            "source window meets the initial slice",
        ));
    }
    let norm = sys.state_norm(s0)?;
    let scale = 1.0f64.max(norm / g.h_min());
    let cn = sys.constraint_norms(s0, &SourceSlice::default())?;
    checks.push(Check::at_most("closed_e", cn.r_e, CLOSED_TOL * scale, "electric component is not closed"));
    checks.push(Check::at_most("closed_b", cn.r_b, CLOSED_TOL * scale, "magnetic component is not closed"));

    let mut worst = Continuity::default();
    if !src.is_zero() {
        let (a, b) = src.window;
        let pad = 3.0 * FD_TIME_STEP;
        for i in 0..CONTINUITY_SAMPLES {
            let t = if b - a > 2.0 * pad {
                a + pad + (b - a - 2.0 * pad) * i as f64 / (CONTINUITY_SAMPLES - 1) as f64
            } else {
                0.5 * (a + b)
            };
            let c = continuity_residuals(sys, src, t)?;
            worst.j_closed = worst.j_closed.max(c.j_closed);
            worst.j_evol = worst.j_evol.max(c.j_evol);
            worst.z_closed = worst.z_closed.max(c.z_closed);
            worst.z_evol = worst.z_evol.max(c.z_evol);
            worst.jb_bdy = worst.jb_bdy.max(c.jb_bdy);
        }
    }
    checks.push(Check::at_most("continuity_j_closed", worst.j_closed, CONTINUITY_TOL, "j_E is not closed"));
    checks.push(Check::at_most("continuity_j", worst.j_evol, CONTINUITY_TOL, "δj = 0 fails"));
    checks.push(Check::at_most("continuity_z_closed", worst.z_closed, CONTINUITY_TOL, "ζ_B is not closed"));
    checks.push(Check::at_most("continuity_z", worst.z_evol, CONTINUITY_TOL, "dζ = 0 fails"));
    checks.push(Check::at_most("source_boundary", worst.jb_bdy, 0.0, "j violates the boundary condition"));
    Ok(ValidationReport { checks })
}

// ---- initial data ----

/// Compact polynomial bump `(1 - |x - c|²/r²)^p` inside the ball, 0 outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub power: i32,
}

impl Bump {
    /// Centred in the box with radius a quarter of the shortest side.
    pub fn centred(grid: &Grid) -> Self {
        let spec = grid.spec();
        let center = spec.lengths.iter().map(|l| 0.5 * l).collect();
        let radius = 0.25 * spec.lengths.iter().cloned().fold(f64::INFINITY, f64::min);
        Bump { center, radius, power: 8 }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (self.radius * self.radius);
        if r2 >= 1.0 {
            0.0
        } else {
            (1.0 - r2).powi(self.power)
        }
    }
}

/// Bump times constant random coefficients, sampled on `kind` cells.
pub fn bump_cochain<R: Rng>(grid: &Grid, kind: Kind, degree: usize, bump: &Bump, rng: &mut R) -> Result<Cochain> {
    let d = grid.d();
    let coeffs: Vec<f64> = (0..binomial(d, degree)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let base = AlgebraForm::from_coeffs(d, degree, coeffs)?;
    let f = |x: &[f64]| base.scale(bump.value(x));
    Ok(match kind {
        Kind::Primal => grid.sample_primal(degree, f),
        Kind::Dual => grid.sample_dual(degree, f),
    })
}

/// Constraint-compatible data `fe = β d u`, `fb = d v` together with the
/// potentials `u` (primal) and `v` (dual).
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibleData {
    pub state: FieldState,
    pub u: Cochain,
    pub v: Cochain,
}

pub fn compatible_bump_data(sys: &Maxwell, bump: &Bump, seed: u64, t: f64) -> Result<CompatibleData> {
    let g = sys.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fe_deg = sys.fe_degree();
    let u = bump_cochain(g, Kind::Primal, fe_deg - 1, bump, &mut rng)?;
    let beta = sys.beta_on(fe_deg, t);
    let fe = weighted(&g.d_primal(&u)?, &beta);
    let v = bump_cochain(g, Kind::Dual, sys.k() - 1, bump, &mut rng)?;
    let fb = g.d_dual(&v)?;
    // bring both components to unit-order densities
    let (se, sb) = (dens_max(g, &fe), dens_max(g, &fb));
    let se = if se > 0.0 { 1.0 / se } else { 1.0 };
    let sb = if sb > 0.0 { 1.0 / sb } else { 1.0 };
    let state = sys.state(t, fe.scale(se), fb.scale(sb))?;
    Ok(CompatibleData { state, u: u.scale(se), v: v.scale(sb) })
}

pub fn compatible_bump_state(sys: &Maxwell, bump: &Bump, seed: u64, t: f64) -> Result<FieldState> {
    Ok(compatible_bump_data(sys, bump, seed, t)?.state)
}

/// Bump data with no compatibility: both components sampled directly.
pub fn raw_bump_state(sys: &Maxwell, bump: &Bump, seed: u64, t: f64) -> Result<FieldState> {
    let g = sys.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fe = bump_cochain(g, Kind::Primal, sys.fe_degree(), bump, &mut rng)?;
    let mut fb = bump_cochain(g, Kind::Dual, sys.k(), bump, &mut rng)?;
    g.project_relative(&mut fb);
    sys.state(t, fe, fb)
}

fn dens_max(g: &Grid, c: &Cochain) -> f64 {
    g.densities(c).iter().fold(0.0, |m, v| m.max(v.abs()))
}

// ---- constraint propagation ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationReport {
    pub initial: ConstraintNorms,
    pub last: ConstraintNorms,
    pub state_norm: f64,
    /// `max_t |‖r_E‖(t) - ‖r_E‖(0)| / ‖state‖`
    pub drift_e: f64,
    pub drift_b: f64,
    /// Same deviations relative to the initial residual norm itself.
    pub rel_dev_e: f64,
    pub rel_dev_b: f64,
    /// `max_t ‖r_bdy‖ / ‖state‖`
    pub bdy: f64,
    /// `max_t max |normal_contract(fb)|`
    pub fb_normal: f64,
    pub steps: usize,
}

/// Evolves and tracks how the constraint residuals move.
pub fn constraint_propagation_audit(solver: &Solver, s0: &FieldState, src: &SourceData) -> Result<PropagationReport> {
    let (_, series) = solver.evolve(s0, src)?;
    Ok(propagation_from_series(&series, solver.schedule(s0.t, solver.config().t_final).0))
}

pub fn propagation_from_series(series: &MonitorSeries, steps: usize) -> PropagationReport {
    let first = &series.samples[0];
    let last = series.samples.last().unwrap();
    let norm = first.state_norm;
    let safe = |x: f64| if x > 0.0 { x } else { 1.0 };
    let mut r = PropagationReport {
        initial: ConstraintNorms { r_e: first.r_e, r_b: first.r_b, r_bdy: first.r_bdy },
        last: ConstraintNorms { r_e: last.r_e, r_b: last.r_b, r_bdy: last.r_bdy },
        state_norm: norm,
        drift_e: 0.0,
        drift_b: 0.0,
        rel_dev_e: 0.0,
        rel_dev_b: 0.0,
        bdy: 0.0,
        fb_normal: 0.0,
        steps,
    };
    for s in &series.samples {
        let de = (s.r_e - first.r_e).abs();
        let db = (s.r_b - first.r_b).abs();
        r.drift_e = r.drift_e.max(de / safe(norm));
        r.drift_b = r.drift_b.max(db / safe(norm));
        r.rel_dev_e = r.rel_dev_e.max(de / safe(first.r_e));
        r.rel_dev_b = r.rel_dev_b.max(db / safe(first.r_b));
        r.bdy = r.bdy.max(s.r_bdy / safe(norm));
        r.fb_normal = r.fb_normal.max(s.fb_normal);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::GridSpec;
    use crate::metric::MetricField;
    use nalgebra::DMatrix;

    fn system(n: usize, k: usize, cells: usize, metric: MetricField, periodic: bool) -> Maxwell {
        let spec = if periodic {
            GridSpec::periodic_cube(n, cells, 1.0, 0.3 / cells as f64)
        } else {
            GridSpec::cube(n, cells, 1.0, 0.3 / cells as f64)
        };
        Maxwell::new(Grid::new(spec).unwrap(), metric, k).unwrap()
    }

    #[test]
    fn zero_in_zero_out() {
        let sys = system(3, 2, 8, MetricField::unit(), false);
        let sol = Solver::new(&sys, EvolveConfig::new(1.0)).unwrap();
        let s = sol.step(&sys.zero_state(0.0), &SourceData::zero(), 0.05).unwrap();
        assert!(s.is_zero());
        assert_eq!(s.t, 0.05);
    }

    #[test]
    fn cfl_is_enforced() {
        let sys = system(3, 1, 8, MetricField::unit(), false);
        let sol = Solver::new(&sys, EvolveConfig::new(1.0)).unwrap();
        assert!((sol.dt_limit() - 0.05).abs() < 1e-15);
        assert!(matches!(sol.step(&sys.zero_state(0.0), &SourceData::zero(), 0.06), Err(Error::CflViolation { .. })));
        assert!(EvolveConfig { cfl: 0.95, ..EvolveConfig::new(1.0) }.validate(0.0).is_err());
        assert!(EvolveConfig::new(0.0).validate(0.0).is_err());
    }

    #[test]
    fn stability_limit_is_sharp_for_noise() {
        // the checkerboard mode sits at the top of the spectrum on an even torus
        let growth = |cfl: f64| {
            let sys = system(4, 2, 8, MetricField::unit(), true);
            let cfg = EvolveConfig { cfl, boundary_mode: BoundaryMode::PeriodicTest, ..EvolveConfig::new(10.0) };
            let sol = Solver::new(&sys, cfg).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let g = sys.grid();
            let mut noise = |kind, deg| {
                let v = (0..g.cochain_len(kind, deg)).map(|_| rng.gen_range(-1.0..1.0)).collect();
                Cochain::from_values(g, kind, deg, v).unwrap()
            };
            let fe = noise(Kind::Primal, sys.fe_degree());
            let fb = noise(Kind::Dual, 2);
            let s0 = sys.state(0.0, fe, fb).unwrap();
            let n0 = s0.l2();
            match sol.integrate(&s0, &SourceData::zero(), sol.dt_limit(), 150, |_, _| Ok(())) {
                Ok(s) => s.l2() / n0,
                Err(_) => f64::INFINITY,
            }
        };
        let lim = EvolveConfig::stability_limit(3);
        assert!((lim - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(growth(0.97 * lim) < 1.5);
        assert!(growth(0.9) > 1e6);
        assert_eq!(EvolveConfig::stability_limit(2), 0.9);
    }

    #[test]
    fn step_is_linear() {
        let m = MetricField::from_ids("gauss", "linear").unwrap();
        let sys = system(3, 1, 8, m, false);
        let sol = Solver::new(&sys, EvolveConfig::new(1.0)).unwrap();
        let s = raw_bump_state(&sys, &Bump::centred(sys.grid()), 3, 0.0).unwrap();
        let a = 2.7;
        let lhs = sol.step(&s.scale(a), &SourceData::zero(), 0.04).unwrap();
        let rhs = sol.step(&s, &SourceData::zero(), 0.04).unwrap().scale(a);
        assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-13 * rhs.max_abs());
    }

    fn dense_operator(sol: &Solver, s: &FieldState) -> DMatrix<f64> {
        let sys = sol.system();
        let ne = s.fe.values.len();
        let nb = s.fb.values.len();
        let mut a = DMatrix::zeros(ne + nb, ne + nb);
        for j in 0..ne + nb {
            let mut e = sys.zero_state(s.t);
            if j < ne {
                e.fe.values[j] = 1.0;
            } else {
                e.fb.values[j - ne] = 1.0;
            }
            sol.project(&mut e);
            let d = sys.derivative(&e, &SourceSlice::default()).unwrap();
            for (i, v) in d.fe.values.iter().chain(&d.fb.values).enumerate() {
                a[(i, j)] = *v;
            }
        }
        a
    }

    #[test]
    fn one_step_matches_matrix_exponential() {
        let sys = system(2, 1, 8, MetricField::unit(), false);
        let sol = Solver::new(&sys, EvolveConfig::new(1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = sys.zero_state(0.0);
        s.fe.values.iter_mut().chain(s.fb.values.iter_mut()).for_each(|v| *v = rng.gen_range(-1.0..1.0));
        sol.project(&mut s);
        let a = dense_operator(&sol, &s);
        let x = nalgebra::DVector::from_iterator(
            s.fe.values.len() + s.fb.values.len(),
            s.fe.values.iter().chain(&s.fb.values).cloned(),
        );
        let mut errs = vec![];
        for dt in [0.04, 0.02] {
            let exact = (&a * dt).exp() * &x;
            let got = sol.step(&s, &SourceData::zero(), dt).unwrap();
            let got = nalgebra::DVector::from_iterator(x.len(), got.fe.values.iter().chain(&got.fb.values).cloned());
            errs.push((exact - got).amax());
        }
        // local error of RK4 is fifth order
        assert!(errs[0] < 1e-3, "{errs:?}");
        let ratio = errs[0] / errs[1];
        assert!((ratio - 32.0).abs() < 6.0, "{ratio}");
    }

    #[test]
    fn evolve_is_deterministic_and_monotone_in_time() {
        let sys = system(3, 2, 16, MetricField::from_ids("ramp", "unit").unwrap(), false);
        let cfg = EvolveConfig { monitor_stride: 3, ..EvolveConfig::new(0.5) };
        let sol = Solver::new(&sys, cfg).unwrap();
        let s0 = compatible_bump_state(&sys, &Bump::centred(sys.grid()), 5, 0.0).unwrap();
        let (a, sa) = sol.evolve(&s0, &SourceData::zero()).unwrap();
        let (b, sb) = sol.evolve(&s0, &SourceData::zero()).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        let ts = sa.times();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert!((ts.last().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn compatible_data_passes_validation() {
        let sys = system(3, 2, 16, MetricField::from_ids("wave", "unit").unwrap(), false);
        let s0 = compatible_bump_state(&sys, &Bump::centred(sys.grid()), 1, 0.0).unwrap();
        let rep = validate_problem(&sys, &s0, &SourceData::zero()).unwrap();
        assert!(rep.pass(), "{rep:?}");
        rep.ensure().unwrap();
    }

    #[test]
    fn boundary_touching_data_is_rejected() {
        let sys = system(3, 1, 16, MetricField::unit(), false);
        let bump = Bump { center: vec![0.05, 0.5], radius: 0.3, power: 4 };
        let s0 = raw_bump_state(&sys, &bump, 1, 0.0).unwrap();
        let err = validate_problem(&sys, &s0, &SourceData::zero()).unwrap().ensure().unwrap_err();
        assert!(err.to_string().contains("initial support meets ∂Σ"), "{err}");
    }

    #[test]
    fn broken_continuity_is_reported() {
        let sys = system(3, 1, 16, MetricField::unit(), false);
        let g = sys.grid().clone();
        // ζ_B = t w with w closed and ζ_E = 0: ∂t ζ_B = w is a unit defect
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = bump_cochain(&g, Kind::Dual, 1, &Bump::centred(&g), &mut rng).unwrap();
        let w = g.d_dual(&v).unwrap();
        let w = w.scale(1.0 / g.norm_sigma(&w, 0.0, sys.metric()).unwrap());
        let src = SourceData::new((0.5, 1.0), None, move |t| SourceSlice { zb: Some(w.scale(t)), ..Default::default() })
            .unwrap();
        let s0 = sys.zero_state(0.0);
        let rep = validate_problem(&sys, &s0, &src).unwrap();
        let c = rep.get("continuity_z").unwrap();
        assert!(!c.pass);
        assert!((c.value - 1.0).abs() < 1e-8, "{}", c.value);
        assert!(rep.get("continuity_z_closed").unwrap().pass);
    }

    #[test]
    fn consistent_sources_pass_continuity() {
        // ζ_E constant, ζ_B = t P d(P * ζ_E): both ζ residuals vanish
        let sys = system(4, 2, 8, MetricField::unit(), false);
        let g = sys.grid().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ze = bump_cochain(&g, Kind::Primal, 1, &Bump::centred(&g), &mut rng).unwrap();
        let m = *sys.metric();
        let src = SourceData::new((0.2, 0.8), None, move |t| {
            let mut sz = g.hodge_sigma(&ze, t, &m).unwrap();
            g.project_relative(&mut sz);
            let zb = g.d_dual(&sz).unwrap().scale(t);
            SourceSlice { ze: Some(ze.clone()), zb: Some(zb), ..Default::default() }
        })
        .unwrap();
        let c = continuity_residuals(&sys, &src, 0.5).unwrap();
        assert!(c.z_evol < 1e-9, "{c:?}");
        assert!(c.z_closed < 1e-12, "{c:?}");
    }

    #[test]
    fn energy_diagnostic_basics() {
        let sys = system(3, 1, 8, MetricField::unit(), false);
        assert_eq!(sys.energy(&sys.zero_state(0.0)).unwrap(), 0.0);
        let s = raw_bump_state(&sys, &Bump::centred(sys.grid()), 4, 0.0).unwrap();
        let e = sys.energy(&s).unwrap();
        assert!(e > 0.0);
        assert!((sys.energy(&s.scale(2.0)).unwrap() - 4.0 * e).abs() < 1e-13 * e);
        let g = sys.grid();
        let m = sys.metric();
        let plain = g.pair_sigma(&s.fe, &s.fe, 0.0, m).unwrap() + g.pair_sigma(&s.fb, &s.fb, 0.0, m).unwrap();
        assert!((plain - e).abs() < 1e-13 * e);
    }

    fn lowest_mode_state(sys: &Maxwell) -> FieldState {
        let g = sys.grid();
        let d = g.d();
        let tau = 2.0 * std::f64::consts::PI;
        let fe_deg = sys.fe_degree();
        let ce = vec![1.0; binomial(d, fe_deg)];
        let fe = g.sample_primal(fe_deg, |x| AlgebraForm::from_coeffs(d, fe_deg, ce.clone()).unwrap().scale((tau * x[0]).sin()));
        let cb = vec![1.0; binomial(d, sys.k())];
        let fb = g.sample_dual(sys.k(), |x| AlgebraForm::from_coeffs(d, sys.k(), cb.clone()).unwrap().scale((tau * x[1]).cos()));
        sys.state(0.0, fe, fb).unwrap()
    }

    fn periodic_drift(cells: usize, dt: f64, steps: usize, smooth: bool) -> f64 {
        let g = Grid::new(GridSpec::periodic_cube(3, cells, 1.0, dt)).unwrap();
        let sys = Maxwell::new(g, MetricField::unit(), 1).unwrap();
        let s0 = if smooth {
            lowest_mode_state(&sys)
        } else {
            raw_bump_state(&sys, &Bump { center: vec![0.5, 0.5], radius: 0.5, power: 8 }, 8, 0.0).unwrap()
        };
        let cfg = EvolveConfig { boundary_mode: BoundaryMode::PeriodicTest, ..EvolveConfig::new(steps as f64 * dt) };
        let sol = Solver::new(&sys, cfg).unwrap();
        let (_, series) = sol.evolve(&s0, &SourceData::zero()).unwrap();
        assert_eq!(series.samples.len(), steps + 1);
        let e0 = series.samples[0].energy;
        series.samples.iter().map(|s| (s.energy - e0).abs()).fold(0.0, f64::max) / e0
    }

    #[test]
    fn periodic_energy_drift_is_tiny() {
        let drift = periodic_drift(64, 0.4 / 64.0, 100, true);
        assert!(drift < 1e-8, "{drift}");
    }

    #[test]
    fn energy_drift_is_sixth_order_per_step() {
        // |R(iy)|² = 1 - y⁶/72 + O(y⁸) for classical RK4
        let a = periodic_drift(32, 0.4 / 32.0, 100, false);
        let b = periodic_drift(32, 0.2 / 32.0, 100, false);
        let ratio = a / b;
        assert!((ratio - 64.0).abs() < 4.0, "{a:e} {b:e} {ratio}");
    }

    #[test]
    fn injected_magnetic_violation_is_transported() {
        let sys = system(3, 1, 16, MetricField::unit(), true);
        let cfg = EvolveConfig { boundary_mode: BoundaryMode::PeriodicTest, ..EvolveConfig::new(100.0 * 0.4 / 16.0) };
        let sol = Solver::new(&sys, cfg).unwrap();
        let s = raw_bump_state(&sys, &Bump::centred(sys.grid()), 2, 0.0).unwrap();
        let r0 = sys.constraint_norms(&s, &SourceSlice::default()).unwrap().r_b;
        let s = s.scale(1.0 / r0);
        let rep = constraint_propagation_audit(&sol, &s, &SourceData::zero()).unwrap();
        assert!((rep.initial.r_b - 1.0).abs() < 1e-12);
        assert!((rep.last.r_b - 1.0).abs() < 1e-3, "{rep:?}");
        assert!(rep.rel_dev_b < 1e-10, "{rep:?}");
    }

    #[test]
    fn projection_keeps_normal_trace_zero() {
        let sys = system(3, 2, 16, MetricField::unit(), false);
        let sol = Solver::new(&sys, EvolveConfig { monitor_stride: 5, ..EvolveConfig::new(0.5) }).unwrap();
        // data touching the boundary: fe trace is reported, fb normal trace stays 0
        let bump = Bump { center: vec![0.1, 0.5], radius: 0.3, power: 4 };
        let s0 = raw_bump_state(&sys, &bump, 3, 0.0).unwrap();
        let rep = constraint_propagation_audit(&sol, &s0, &SourceData::zero()).unwrap();
        assert_eq!(rep.fb_normal, 0.0);
        assert!(rep.bdy > 1e-3);
    }

    #[test]
    fn cone_tracker_basics() {
        let sys = system(3, 2, 32, MetricField::unit(), false);
        let sol = Solver::new(&sys, EvolveConfig { monitor_stride: 10, ..EvolveConfig::new(0.25) }).unwrap();
        let (_, zero) = sol.evolve(&sys.zero_state(0.0), &SourceData::zero()).unwrap();
        assert!(support_audit(&zero, sol.c_max()).pass);
        let s0 = compatible_bump_state(&sys, &Bump::centred(sys.grid()), 4, 0.0).unwrap();
        let (_, series) = sol.evolve(&s0, &SourceData::zero()).unwrap();
        let ok = support_audit(&series, sol.c_max());
        assert!(ok.pass, "{ok:?}");
        let bad = support_audit(&series, 0.5 * sol.c_max());
        assert!(!bad.pass, "{bad:?}");
    }
}


