//! Acceptance criteria 1-8. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. Thresholds come from `faraday_core::tolerances`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use faraday_cli::{parse_str, run, RunManifest};
use faraday_core::manufactured::{lemma_equivalence_check, ManufacturedForm};
use faraday_core::tolerances::*;
use faraday_core::MetricField;

struct Verdict {
    pass: bool,
    detail: String,
}

fn suite(dir: &Path, name: &str, body: &str) -> (RunManifest, Duration) {
    let mut cfg = parse_str(body).expect("acceptance config is valid");
    cfg.out = dir.join(name);
    let t = Instant::now();
    let m = run(&cfg).expect("run completes");
    (m, t.elapsed())
}

fn value(m: &RunManifest, name: &str) -> f64 {
    m.checks.iter().find(|c| c.name == name).map_or(f64::NAN, |c| c.value)
}

fn all_pass(m: &RunManifest, names: &[&str]) -> bool {
    names.iter().all(|n| m.checks.iter().any(|c| c.name == *n && c.pass))
}

fn failures(m: &RunManifest) -> String {
    let f = m.failure_report();
    if f.is_empty() {
        String::new()
    } else {
        format!(" [{}]", f.replace('\n', "; "))
    }
}

fn c1(dir: &Path) -> Verdict {
    let (m, t) = suite(dir, "c1", "suite = identities\n");
    let worst = m.checks.iter().map(|c| c.value).fold(0.0, f64::max);
    let trials = m.config.trials;
    Verdict {
        pass: m.pass && m.checks.len() == 2 * IDENTITY_DIMS.len() && trials >= IDENTITY_TRIALS && t.as_secs_f64() < 5.0,
        detail: format!(
            "Hodge/sign identities: max defect {worst:.2e} (< {IDENTITY_TOL:e}) over {trials} trials per (m, sigma), m in {IDENTITY_DIMS:?}; {:.2} s (< 5 s){}",
            t.as_secs_f64(),
            failures(&m)
        ),
    }
}

fn c2(dir: &Path) -> Verdict {
    let (m, t) = suite(dir, "c2", "suite = symbol_audit\n");
    let sym = m.checks.iter().filter(|c| c.name.starts_with("symbol_symmetry")).map(|c| c.value).fold(0.0, f64::max);
    let eig = m.checks.iter().filter(|c| c.name.starts_with("symbol_timelike")).map(|c| c.value).fold(f64::INFINITY, f64::min);
    Verdict {
        pass: m.pass && m.checks.len() == 24 && m.config.trials >= SYMBOL_COVECTORS && t.as_secs_f64() < 30.0,
        detail: format!(
            "symbol audit over 6 (n, k): symmetry {sym:.2e} (< {SYMBOL_SYMMETRY_TOL:e}), min timelike eigenvalue {eig:.3}, eigenspace counts and admissibility exact; {:.2} s (< 30 s){}",
            t.as_secs_f64(),
            failures(&m)
        ),
    }
}

fn c3() -> Verdict {
    let t = Instant::now();
    let mut orders = Vec::new();
    for k in [1, 2] {
        let form = ManufacturedForm::plane_waves(3, k, 1.0, 11 + k as u64).expect("form");
        let table = lemma_equivalence_check(&form, &MetricField::unit(), &LEMMA_GRIDS, 0.3).expect("lemma table");
        orders.push(table.order());
    }
    let secs = t.elapsed().as_secs_f64();
    Verdict {
        pass: orders.iter().all(|o| (o - LEMMA_ORDER).abs() < LEMMA_ORDER_TOL) && secs < 60.0,
        detail: format!(
            "split-system residual order between grids {} and {} (n=3): k=1 {:.3}, k=2 {:.3} (target {LEMMA_ORDER} +- {LEMMA_ORDER_TOL}); {secs:.2} s (< 60 s)",
            LEMMA_GRIDS[0],
            LEMMA_GRIDS[LEMMA_GRIDS.len() - 1],
            orders[0],
            orders[1]
        ),
    }
}

fn evolve_runs(dir: &Path) -> Vec<(usize, RunManifest, Duration)> {
    [3, 4]
        .into_iter()
        .map(|n| {
            let body = format!("suite = evolve\nn = {n}\nk = 2\ngrid = 32\nsteps = {EVOLVE_STEPS}\ncfl = {EVOLVE_CFL}\nstride = 1\n");
            let (m, t) = suite(dir, &format!("evolve_n{n}"), &body);
            (n, m, t)
        })
        .collect()
}

fn c4(runs: &[(usize, RunManifest, Duration)]) -> Verdict {
    let names = ["cfl", "constraint_drift_e", "constraint_drift_b", "boundary_residual"];
    let total: f64 = runs.iter().map(|r| r.2.as_secs_f64()).sum();
    let parts: Vec<String> = runs
        .iter()
        .map(|(n, m, _)| {
            format!(
                "n={n}: drift E {:.1e}, B {:.1e}, r_bdy {:.1e}",
                value(m, "constraint_drift_e"),
                value(m, "constraint_drift_b"),
                value(m, "boundary_residual")
            )
        })
        .collect();
    Verdict {
        pass: runs.iter().all(|(_, m, _)| all_pass(m, &names)) && total < 120.0,
        detail: format!(
            "constraint preservation, 32^(n-1), {EVOLVE_STEPS} RK4 steps at CFL {EVOLVE_CFL}: {} (< {CONSTRAINT_DRIFT_TOL:e}); {total:.2} s (< 120 s)",
            parts.join("; ")
        ),
    }
}

fn c5(runs: &[(usize, RunManifest, Duration)]) -> Verdict {
    let parts: Vec<String> = runs
        .iter()
        .map(|(n, m, _)| {
            format!("n={n}: leak {:.1e}, halved-speed leak {:.1e}", value(m, "cone_leak"), value(m, "cone_falsification"))
        })
        .collect();
    Verdict {
        pass: runs.iter().all(|(_, m, _)| all_pass(m, &["cone_leak", "cone_falsification"])),
        detail: format!(
            "finite speed with 4h halo: {} (leak < {CONE_LEAK_TOL:e}; the halved-speed audit must fail)",
            parts.join("; ")
        ),
    }
}

fn c6(dir: &Path) -> Verdict {
    let (m, t) = suite(dir, "c6", "suite = green_suite\nn = 3\nk = 2\ngrid = 16\nrefine = true\n");
    let names = ["right_inverse", "right_inverse_ratio", "green_support", "exact_sequence_a", "exact_sequence_b", "exact_sequence_c"];
    Verdict {
        pass: m.pass && all_pass(&m, &names) && t.as_secs_f64() < 180.0,
        detail: format!(
            "Green identities on 16^2: right inverse {:.2e} (< {RIGHT_INVERSE_TOL:e}), ratio at 32^2 {:.3} (<= {REFINEMENT_RATIO_MAX}), support violations {}, exact sequence a {:.2e} b {:.2e} c {:.2e} (< {EXACT_SEQUENCE_TOL:e}); {:.2} s (< 180 s){}",
            value(&m, "right_inverse"),
            value(&m, "right_inverse_ratio"),
            value(&m, "green_support"),
            value(&m, "exact_sequence_a"),
            value(&m, "exact_sequence_b"),
            value(&m, "exact_sequence_c"),
            t.as_secs_f64(),
            failures(&m)
        ),
    }
}

fn c7(dir: &Path) -> Verdict {
    let body = format!("suite = symplectic_suite\nn = 3\nk = 2\ngrid = 16\ntrials = {SYMPLECTIC_PAIRS}\n");
    let (m, t) = suite(dir, "c7", &body);
    Verdict {
        pass: m.pass && t.as_secs_f64() < 180.0,
        detail: format!(
            "pre-symplectic form over {SYMPLECTIC_PAIRS} pairs: skew {:.1e} (< {SKEW_TOL:e}), chi-independence {:.1e} (< {CHI_INDEPENDENCE_TOL:e}), source form {:.1e} (< {SOURCE_FORM_TOL:e}), degeneracy {:.1e} (< {DEGENERACY_TOL:e}), falsification {:.2e} (must exceed); {:.2} s (< 180 s){}",
            value(&m, "presymplectic_skew"),
            value(&m, "presymplectic_chi_independence"),
            value(&m, "source_form"),
            value(&m, "degeneracy_forward"),
            value(&m, "degeneracy_falsification"),
            t.as_secs_f64(),
            failures(&m)
        ),
    }
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map(|rd| rd.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.extension().is_some_and(|x| x == "csv")).collect())
        .unwrap_or_default();
    v.sort();
    v
}

fn c8(dir: &Path) -> Verdict {
    let configs = [
        ("identities", "suite = identities\nseed = 5\n"),
        ("symbol_audit", "suite = symbol_audit\nseed = 5\ntrials = 200\n"),
        ("evolve", "suite = evolve\nseed = 5\ngrid = 16\nsteps = 20\n"),
        ("green_suite", "suite = green_suite\nseed = 5\nrefine = false\ntrials = 1\n"),
        ("symplectic_suite", "suite = symplectic_suite\nseed = 5\ntrials = 3\n"),
    ];
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for (name, body) in configs {
        let (_, _) = suite(dir, &format!("{name}_a"), body);
        let (_, _) = suite(dir, &format!("{name}_b"), body);
        let (a, b) = (csv_files(&dir.join(format!("{name}_a"))), csv_files(&dir.join(format!("{name}_b"))));
        if a.is_empty() || a.len() != b.len() {
            mismatched.push(format!("{name}: file sets differ"));
            continue;
        }
        for (x, y) in a.iter().zip(&b) {
            compared += 1;
            if fs::read(x).ok() != fs::read(y).ok() {
                mismatched.push(format!("{}", x.display()));
            }
        }
    }
    Verdict {
        pass: mismatched.is_empty() && compared >= 5,
        detail: format!(
            "determinism: {compared} CSV files from two runs of each of the five suites, {} differing{}",
            mismatched.len(),
            if mismatched.is_empty() { String::new() } else { format!(" [{}]", mismatched.join(", ")) }
        ),
    }
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = tmp.path();
    let mut ok = true;
    let mut report = |i: usize, v: Verdict| {
        ok &= v.pass;
        println!("{} criterion {i}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    };
    report(1, c1(dir));
    report(2, c2(dir));
    report(3, c3());
    let runs = evolve_runs(dir);
    report(4, c4(&runs));
    report(5, c5(&runs));
    report(6, c6(dir));
    report(7, c7(dir));
    report(8, c8(dir));
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
