//! The five canned experiments. Each one appends checks, named results and
//! the files it wrote to an [`Outcome`].

use std::path::{Path, PathBuf};

use faraday_core::evolution::{compatible_bump_state, propagation_from_series, support_audit};
use faraday_core::exterior::identity_audit;
use faraday_core::green::STENCIL_REACH;
use faraday_core::io::{write_series_csv, write_snapshot, write_table_csv};
use faraday_core::maxwell::{symbol_audit, SYMBOL_TABLE};
use faraday_core::tolerances::*;
use faraday_core::{
    AlgebraForm, BoundaryMode, Bump, Check, CutoffProfile, EvolveConfig, FiberMetric, Green, GreenBundle, Grid,
    GridSpec, Maxwell, MetricField, Result, Solver, SourceData, SourceHistory, TimeGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::config::{RunConfig, Suite};

#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub results: Map<String, Value>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn result(&mut self, key: &str, v: Value) {
        self.results.insert(key.into(), v);
    }
}

/// Passes when `value < threshold` (NaN fails).
fn below(name: &str, value: f64, threshold: f64, message: &str) -> Check {
    Check { name: name.into(), value, threshold, pass: value < threshold, message: message.into() }
}

/// Passes when `value > threshold`.
fn above(name: &str, value: f64, threshold: f64, message: &str) -> Check {
    Check { name: name.into(), value, threshold, pass: value > threshold, message: message.into() }
}

fn metric(cfg: &RunConfig) -> Result<MetricField> {
    MetricField::from_ids(&cfg.beta, &cfg.conformal)
}

fn grid_spec(cfg: &RunConfig, cells: usize, dt: f64) -> GridSpec {
    match cfg.boundary {
        BoundaryMode::ProjectB => GridSpec::cube(cfg.n, cells, cfg.length, dt),
        BoundaryMode::PeriodicTest => GridSpec::periodic_cube(cfg.n, cells, cfg.length, dt),
    }
}

fn seed_for(cfg: &RunConfig, stream: u64) -> u64 {
    cfg.seed.wrapping_mul(1_000_003).wrapping_add(stream)
}

pub fn run_suite(cfg: &RunConfig, dir: &Path, out: &mut Outcome) -> Result<()> {
    match cfg.suite {
        Suite::Identities => identities(cfg, dir, out),
        Suite::SymbolAudit => symbols(cfg, dir, out),
        Suite::Evolve => evolve(cfg, dir, out),
        Suite::GreenSuite => green_suite(cfg, dir, out),
        Suite::SymplecticSuite => symplectic_suite(cfg, dir, out),
    }
}

fn identities(cfg: &RunConfig, dir: &Path, out: &mut Outcome) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut header = vec!["m", "sigma", "trials"];
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for m in IDENTITY_DIMS {
        for sigma in [0usize, 1] {
            let mut diag: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..2.0)).collect();
            if sigma == 1 {
                diag[0] = -diag[0];
            }
            let g = FiberMetric::diagonal(diag)?;
            let rep = identity_audit(&g, cfg.trials, rng.gen())?;
            if header.len() == 3 {
                header.extend(rep.entries().iter().map(|(n, _)| *n));
            }
            let mut row = vec![m as f64, sigma as f64, cfg.trials as f64];
            row.extend(rep.entries().iter().map(|(_, v)| *v));
            rows.push(row);
            worst = worst.max(rep.max_defect());
            out.check(below(
                &format!("identities_m{m}_sigma{sigma}"),
                rep.max_defect(),
                IDENTITY_TOL,
                "max pointwise identity defect",
            ));
        }
    }
    let path = dir.join("series_identities.csv");
    write_table_csv(&path, &header, &rows)?;
    out.files.push(path);
    out.result("max_defect", json!(worst));
    out.result("trials", json!(cfg.trials));
    Ok(())
}

fn symbols(cfg: &RunConfig, dir: &Path, out: &mut Outcome) -> Result<()> {
    let metric = metric(cfg)?;
    let header = [
        "n",
        "k",
        "covectors",
        "symmetry_defect",
        "min_timelike_eigenvalue",
        "count_mismatches",
        "boundary_samples",
        "admissibility_failures",
        "quadratic_defect",
        "adjoint_gap",
    ];
    let mut rows = Vec::new();
    for (i, (n, k)) in SYMBOL_TABLE.into_iter().enumerate() {
        let a = symbol_audit(
            n,
            k,
            metric,
            cfg.trials,
            BOUNDARY_SAMPLES_PER_FACE,
            seed_for(cfg, i as u64),
            ADMISSIBILITY_TOL,
        )?;
        let tag = format!("n{n}_k{k}");
        out.check(below(&format!("symbol_symmetry_{tag}"), a.max_symmetry_defect, SYMBOL_SYMMETRY_TOL, "symbol symmetry defect"));
        out.check(above(
            &format!("symbol_timelike_{tag}"),
            a.min_timelike_eigenvalue,
            0.0,
            "min eigenvalue for future-timelike covectors",
        ));
        out.check(Check::at_most(
            &format!("symbol_counts_{tag}"),
            a.count_mismatches as f64,
            0.0,
            "covectors with wrong kernel / eigenspace dimensions",
        ));
        out.check(Check::at_most(
            &format!("symbol_admissibility_{tag}"),
            a.admissibility_failures as f64,
            0.0,
            "boundary samples failing admissibility",
        ));
        rows.push(vec![
            n as f64,
            k as f64,
            a.covectors as f64,
            a.max_symmetry_defect,
            a.min_timelike_eigenvalue,
            a.count_mismatches as f64,
            a.boundary_samples as f64,
            a.admissibility_failures as f64,
            a.max_quadratic_defect,
            a.max_adjoint_gap,
        ]);
    }
    let path = dir.join("series_symbol.csv");
    write_table_csv(&path, &header, &rows)?;
    out.files.push(path);
    out.result("covectors", json!(cfg.trials));
    Ok(())
}

/// Largest step `dt` with `dt <= cfl h / c_max` where `c_max` is taken over
/// the whole run `[0, steps dt]`.
fn evolve_step(cfg: &RunConfig, metric: MetricField) -> Result<f64> {
    let h = cfg.length / cfg.grid as f64;
    let sys = Maxwell::new(Grid::new(grid_spec(cfg, cfg.grid, h))?, metric, cfg.k)?;
    let mut c = sys.c_max(0.0, 0.0);
    for _ in 0..50 {
        let dt = cfg.cfl * h / c;
        let next = sys.c_max(0.0, cfg.steps as f64 * dt);
        if next <= c {
            break;
        }
        c = next;
    }
    Ok(cfg.cfl * h / c)
}

fn evolve(cfg: &RunConfig, dir: &Path, out: &mut Outcome) -> Result<()> {
    let limit = EvolveConfig::stability_limit(cfg.n - 1);
    let cfl = Check::at_most("cfl", cfg.cfl, limit, "Courant number within the RK4 stability bound");
    let stable = cfl.pass;
    out.check(cfl);
    if !stable {
        out.result("skipped", json!("Courant number above the stability bound; nothing was evolved"));
        return Ok(());
    }
    let metric = metric(cfg)?;
    let dt = evolve_step(cfg, metric)?;
    let sys = Maxwell::new(Grid::new(grid_spec(cfg, cfg.grid, dt))?, metric, cfg.k)?;
    let ecfg = EvolveConfig {
        t_final: cfg.steps as f64 * dt,
        cfl: cfg.cfl,
        boundary_mode: cfg.boundary,
        monitor_stride: cfg.stride,
        seed: cfg.seed,
    };
    let solver = Solver::new(&sys, ecfg)?;
    let s0 = compatible_bump_state(&sys, &Bump::centred(sys.grid()), cfg.seed, 0.0)?;
    let (last, series) = solver.evolve(&s0, &SourceData::zero())?;
    let rep = propagation_from_series(&series, cfg.steps);

    out.check(below("constraint_drift_e", rep.drift_e, CONSTRAINT_DRIFT_TOL, "max |‖r_E‖(t) - ‖r_E‖(0)| / ‖state‖"));
    out.check(below("constraint_drift_b", rep.drift_b, CONSTRAINT_DRIFT_TOL, "max |‖r_B‖(t) - ‖r_B‖(0)| / ‖state‖"));
    out.check(below("boundary_residual", rep.bdy, BOUNDARY_RESIDUAL_TOL, "max ‖r_bdy‖ / ‖state‖"));
    let cone = support_audit(&series, solver.c_max());
    out.check(Check {
        name: "cone_leak".into(),
        value: cone.worst_ratio,
        threshold: cone.threshold,
        pass: cone.pass,
        message: "density outside the light cone relative to the peak".into(),
    });
    let half = support_audit(&series, 0.5 * solver.c_max());
    out.check(Check {
        name: "cone_falsification".into(),
        value: half.worst_ratio,
        threshold: half.threshold,
        pass: !half.pass,
        message: "the audit must flag a leak when the wave speed is halved".into(),
    });

    let path = dir.join("series_evolve.csv");
    write_series_csv(&path, &series)?;
    out.files.push(path);
    if cfg.snapshots {
        for (stem, s) in [("snapshot_initial", &s0), ("snapshot_final", &last)] {
            let (j, b) = write_snapshot(dir, stem, &sys, s)?;
            out.files.push(j);
            out.files.push(b);
        }
    }
    out.result("dt", json!(dt));
    out.result("steps", json!(cfg.steps));
    out.result("t_final", json!(last.t));
    out.result("c_max", json!(solver.c_max()));
    out.result("energy_initial", json!(series.samples[0].energy));
    out.result("energy_final", json!(series.samples.last().map(|s| s.energy)));
    out.result("propagation", serde_json::to_value(&rep).unwrap_or(Value::Null));
    Ok(())
}

fn time_grid(cfg: &RunConfig, sys: &Maxwell, cells: usize) -> Result<TimeGrid> {
    let h = cfg.length / cells as f64;
    let span = cfg.span * cfg.length;
    TimeGrid::covering(0.0, span, cfg.cfl * h / sys.c_max(0.0, span))
}

fn green_at(cfg: &RunConfig, metric: MetricField, cells: usize) -> Result<Green> {
    let h = cfg.length / cells as f64;
    let sys = Maxwell::new(Grid::new(grid_spec(cfg, cells, cfg.cfl * h))?, metric, cfg.k)?;
    let time = time_grid(cfg, &sys, cells)?;
    Green::new(sys, time, cfg.cfl)
}

/// Smooth bump centred in the box, wide enough to be resolved at 16 cells.
fn smooth_bump(cfg: &RunConfig) -> Bump {
    Bump { center: vec![0.5 * cfg.length; cfg.n - 1], radius: 0.4 * cfg.length, power: 6 }
}

fn green_suite(cfg: &RunConfig, dir: &Path, out: &mut Outcome) -> Result<()> {
    let metric = metric(cfg)?;
    let bump = smooth_bump(cfg);
    let mut cells = vec![cfg.grid];
    if cfg.refine {
        cells.push(2 * cfg.grid);
    }
    let mut rows = Vec::new();
    let mut defects = Vec::new();
    let mut base = None;
    for &c in &cells {
        let g = green_at(cfg, metric, c)?;
        let span = g.time().end() - g.time().t0;
        let omega = g.pulse(&bump, cfg.seed, g.time().t0 + 0.5 * span, 0.25 * span)?;
        let r = g.right_inverse_check(&omega)?;
        rows.push(vec![c as f64, cfg.length / c as f64, r.dt, r.slices as f64, r.defect]);
        defects.push(r.defect);
        if base.is_none() {
            base = Some((g, omega));
        }
    }
    let (g, omega) = base.expect("at least one grid");
    out.check(below("right_inverse", defects[0], RIGHT_INVERSE_TOL, "‖G⁺(D ω) - ω‖ / ‖ω‖ on the base grid"));
    if defects.len() > 1 {
        out.check(Check::at_most(
            "right_inverse_ratio",
            defects[1] / defects[0],
            REFINEMENT_RATIO_MAX,
            "defect ratio under one grid refinement",
        ));
    }

    let src = g.d_op(&omega)?;
    let (a, b) = match (src.first_nonzero(), src.last_nonzero()) {
        (Some(a), Some(b)) => (a, b),
        _ => (0, 0),
    };
    let gp = g.g_plus(&src)?;
    let gm = g.g_minus(&src)?;
    let early = gp.states[..=a.saturating_sub(STENCIL_REACH)].iter().filter(|s| !s.is_zero()).count();
    let late = gm.states[(b + STENCIL_REACH).min(gm.states.len())..].iter().filter(|s| !s.is_zero()).count();
    out.check(Check::at_most(
        "green_support",
        (early + late) as f64,
        0.0,
        "slices of G⁺ before / G⁻ after the source window that are not bit-exact zero",
    ));

    let es = g.exact_sequence_suite(cfg.trials, seed_for(cfg, 1))?;
    out.check(below("exact_sequence_a", es.g_after_d, EXACT_SEQUENCE_TOL, "‖G(D ω)‖ / ‖ω‖"));
    out.check(below("exact_sequence_b", es.d_after_g, EXACT_SEQUENCE_TOL, "‖D(G S)‖ / ‖S‖"));
    out.check(below("exact_sequence_c", es.reconstruction, EXACT_SEQUENCE_TOL, "cutoff reconstruction of a solution"));

    let reflection = if g.system().metric().is_static() { Some(g.reflection_defect(&symmetric_source(&g, cfg)?)?) } else { None };

    let path = dir.join("series_green_defect.csv");
    write_table_csv(&path, &["cells", "h", "dt", "slices", "right_inverse_defect"], &rows)?;
    out.files.push(path);
    let path = dir.join("series_green_exact.csv");
    write_table_csv(
        &path,
        &["trials", "g_after_d", "d_after_g", "reconstruction"],
        &[vec![es.trials as f64, es.g_after_d, es.d_after_g, es.reconstruction]],
    )?;
    out.files.push(path);

    out.result("right_inverse_defects", json!(cells.iter().zip(&defects).map(|(c, d)| json!({"cells": c, "defect": d})).collect::<Vec<_>>()));
    out.result("exact_sequence", serde_json::to_value(&es).unwrap_or(Value::Null));
    out.result("reflection_defect", json!(reflection));
    out.result("slices", json!(g.time().slices));
    out.result("dt", json!(g.time().dt));
    Ok(())
}

/// `ζ_E` source whose slice weights are symmetric under `i ↦ N-1-i` in exact
/// arithmetic, for the time-reflection comparison.
fn symmetric_source(g: &Green, cfg: &RunConfig) -> Result<SourceHistory> {
    let sys = g.system();
    let grid = sys.grid();
    let n = g.time().slices;
    let deg = sys.n() - sys.k() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(cfg, 2));
    let coeffs = (0..faraday_core::exterior::binomial(grid.d(), deg)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let base = AlgebraForm::from_coeffs(grid.d(), deg, coeffs)?;
    let bump = smooth_bump(cfg);
    let shape = grid.sample_primal(deg, |x| base.scale(bump.value(x)));
    let width = 0.1 * n as f64;
    let mut s = SourceHistory::zeros(sys.k(), *g.time());
    for (i, sl) in s.slices.iter_mut().enumerate() {
        let r = (2 * i) as f64 - (n - 1) as f64;
        let r = r.abs() / (2.0 * width);
        if r < 1.0 {
            sl.ze = Some(shape.scale((1.0 - r * r).powi(4)));
        }
    }
    Ok(s)
}

fn symplectic_suite(cfg: &RunConfig, dir: &Path, out: &mut Outcome) -> Result<()> {
    let metric = metric(cfg)?;
    let h = cfg.length / cfg.grid as f64;
    let grid = Grid::new(grid_spec(cfg, cfg.grid, cfg.cfl * h))?;
    let time = time_grid(cfg, &Maxwell::new(grid.clone(), metric, 1)?, cfg.grid)?;
    let gb = GreenBundle::new(&grid, metric, time, cfg.cfl)?;
    let t = *gb.time();
    let span = t.end() - t.t0;
    let mid = t.t0 + 0.5 * span;
    let slice = t.nearest(mid);
    let c1 = CutoffProfile::default_for(&t, mid);
    let c2 = CutoffProfile::new(mid, 2.0 * c1.width)?;

    let pairs = cfg.trials;
    let sols = (0..=pairs).map(|i| gb.random_solution(seed_for(cfg, 10 + i as u64), true)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let (mut skew, mut chi) = (0.0f64, 0.0f64);
    for i in 0..pairs {
        let (f1, f2) = (&sols[i], &sols[i + 1]);
        let s12 = gb.presymplectic(f1, f2, &c1)?;
        let s21 = gb.presymplectic(f2, f1, &c1)?;
        let wide = gb.presymplectic(f1, f2, &c2)?;
        let scale = gb.norm_at(f1, slice)? * gb.norm_at(f2, slice)?;
        let (sk, ci) = ((s12 + s21).abs() / scale, (s12 - wide).abs() / scale);
        skew = skew.max(sk);
        chi = chi.max(ci);
        rows.push(vec![i as f64, s12, s21, wide, scale, sk, ci]);
    }
    out.check(below("presymplectic_skew", skew, SKEW_TOL, "max |σ(F1,F2) + σ(F2,F1)| / (‖F1‖ ‖F2‖)"));
    out.check(below("presymplectic_chi_independence", chi, CHI_INDEPENDENCE_TOL, "max |σ_w - σ_2w| / (‖F1‖ ‖F2‖)"));

    let cs = CutoffProfile::new(t.t0 + 0.35 * span, 10.0 * t.dt)?.on(&t);
    let s1 = gb.commutator(&sols[0], &cs)?;
    let s2 = gb.commutator(&sols[1 % sols.len()], &cs)?;
    let v = gb.source_form(&s1, &s2)?;
    let (g1, g2) = (gb.causal(&s1)?, gb.causal(&s2)?);
    let late = t.t0 + 0.6 * span;
    let w = gb.presymplectic(&g1, &g2, &CutoffProfile::default_for(&t, late))?;
    let scale = gb.norm_at(&g1, t.nearest(late))? * gb.norm_at(&g2, t.nearest(late))?;
    out.check(below("source_form", (v - w).abs() / scale, SOURCE_FORM_TOL, "|ς(S1,S2) - σ(G S1, G S2)| / (‖G S1‖ ‖G S2‖)"));

    let probes: Vec<_> = sols.iter().take(DEGENERACY_PROBES).cloned().collect();
    let a = gb.admissible_potential(cfg.k, seed_for(cfg, 3))?;
    let fwd = gb.degeneracy_forward_check(&a, &probes, &c1)?;
    out.check(below("degeneracy_forward", fwd.max_relative, DEGENERACY_TOL, "max |σ(F', dA)| relative over the probes"));
    let genuine = gb.random_solution(seed_for(cfg, 4), true)?.parts[cfg.k - 1].clone();
    let fals = gb.degeneracy_of(&genuine, &probes, &c1)?;
    out.check(above(
        "degeneracy_falsification",
        fals.max_relative,
        DEGENERACY_TOL,
        "a non-exact solution must pair nontrivially with some probe",
    ));

    let path = dir.join("series_symplectic.csv");
    write_table_csv(&path, &["pair", "s12", "s21", "s12_wide", "scale", "skew", "chi_gap"], &rows)?;
    out.files.push(path);
    let path = dir.join("series_degeneracy.csv");
    let drows: Vec<Vec<f64>> =
        fwd.values.iter().zip(&fals.values).enumerate().map(|(i, (a, b))| vec![i as f64, *a, *b]).collect();
    write_table_csv(&path, &["probe", "sigma_exact", "sigma_genuine"], &drows)?;
    out.files.push(path);

    out.result("pairs", json!(pairs));
    out.result("source_form", json!({"varsigma": v, "sigma_of_causal": w, "scale": scale}));
    out.result("degeneracy_forward", serde_json::to_value(&fwd).unwrap_or(Value::Null));
    out.result("degeneracy_falsification", serde_json::to_value(&fals).unwrap_or(Value::Null));
    out.result("slices", json!(t.slices));
    Ok(())
}
