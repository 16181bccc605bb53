//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always shown; exits non-zero on any failure.

use std::fs;
use std::path::Path;

use obrb::checkpoint;
use obrb::config::{parse_config, RunConfig};
use obrb::run::simulate;
use obrb::suites::{verify, Suite, SuiteReport};
use obrb_core::diagnostics::ViolationKind;
use obrb_core::elliptic::poincare_constant;
use obrb_core::init::{random_divfree, Theta0Spec};
use obrb_core::nonlocal::{lambda_apply, lambda_inverse};
use obrb_core::{build_grid, SimState};

const BASE: &str = include_str!("../configs/default.conf");

struct Verdict {
    id: usize,
    ok: bool,
    detail: String,
}

fn verdict(id: usize, ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict { id, ok, detail: detail.into() }
}

fn failures(r: &SuiteReport) -> String {
    if r.failures.is_empty() {
        String::new()
    } else {
        format!("; {}", r.failures.join("; "))
    }
}

fn member_metric(r: &SuiteReport, member: &str, key: &str) -> f64 {
    r.member(member).and_then(|m| m.metrics.get(key).copied()).unwrap_or(f64::NAN)
}

fn ut1(r: &SuiteReport) -> Verdict {
    let reference = r.metric("ut1_reference").unwrap_or(f64::NAN);
    let events = r.violation_total(ViolationKind::Ut1);
    let slack = r
        .members
        .iter()
        .filter_map(|m| m.metrics.get("ut1_slack"))
        .fold(f64::INFINITY, |a, b| a.min(*b));
    verdict(
        1,
        r.passed && events == 0 && (reference - 8.0 / 3.0).abs() <= 1e-12,
        format!("{} runs, {events} events, least slack {slack:.3e}, reference bound {reference:.15}{}", r.members.len(), failures(r)),
    )
}

fn max_principle(reports: &[SuiteReport]) -> Verdict {
    let events: usize = reports.iter().map(|r| r.violation_total(ViolationKind::MaxPrinciple)).sum();
    let runs: usize = reports
        .iter()
        .flat_map(|r| &r.members)
        .filter(|m| m.violations.contains_key(ViolationKind::MaxPrinciple.name()))
        .count();
    let mp = reports.iter().find(|r| r.suite == "maxprinciple");
    let ok = events == 0 && mp.is_some_and(|r| r.passed);
    verdict(2, ok, format!("{events} envelope events over {runs} upwind runs"))
}

fn lambda_algebra() -> Verdict {
    let grid = build_grid(20, 12, 1.3, 0.7).expect("valid grid");
    let mut worst_sym = 0.0f64;
    let mut worst_bound = 0.0f64;
    let mut worst_inv = 0.0f64;
    for k in 0..100u64 {
        let alpha = [0.1, 0.5, 0.9][k as usize % 3];
        let z = Theta0Spec::Random(5.0).build(&grid, 2 * k, None).expect("plain field");
        let w = Theta0Spec::Random(5.0).build(&grid, 2 * k + 1, None).expect("plain field");
        let z = z.add_scalar(k as f64 / 10.0);
        let sym = (lambda_apply(&z, alpha).dot(&w) - z.dot(&lambda_apply(&w, alpha))).abs();
        worst_sym = worst_sym.max(sym / (1.0 + z.l2_norm() * w.l2_norm()));
        let e = lambda_apply(&z, alpha).dot(&z);
        let n2 = z.dot(&z);
        let below = n2 / (1.0 + alpha) - e;
        let above = e - n2;
        worst_bound = worst_bound.max(below.max(above) / (1.0 + n2));
        let back = lambda_apply(&lambda_inverse(&z, alpha), alpha);
        worst_inv = worst_inv.max(back.axpy(-1.0, &z).max_abs() / (1.0 + z.max_abs()));
    }
    verdict(
        3,
        worst_sym <= 1e-12 && worst_bound <= 1e-12 && worst_inv <= 1e-13,
        format!("symmetry {worst_sym:.1e}, bound excess {worst_bound:.1e}, inverse {worst_inv:.1e}"),
    )
}

fn uniqueness(r: &SuiteReport) -> Verdict {
    let rel = member_metric(r, "eigenmode", "rate_rel_error");
    let rate = member_metric(r, "eigenmode", "rate");
    let target = member_metric(r, "eigenmode", "target_rate");
    verdict(
        4,
        r.passed && rel <= 0.05,
        format!("eigenmode rate {rate:.4} vs 2 kappa lambda1 = {target:.4} ({:.2}%), differences monotone{}", 100.0 * rel, failures(r)),
    )
}

fn poincare() -> Verdict {
    let exact = std::f64::consts::PI * std::f64::consts::SQRT_2;
    let mut errs = Vec::new();
    for n in [32, 64, 128] {
        let g = build_grid(n, n, 1.0, 1.0).expect("valid grid");
        match poincare_constant(&g, 1e-12) {
            Ok(cp) => errs.push((n, cp, (cp - exact).abs() / exact)),
            Err(e) => return verdict(5, false, format!("n = {n}: {e}")),
        }
    }
    let o1 = (errs[0].2 / errs[1].2).log2();
    let o2 = (errs[1].2 / errs[2].2).log2();
    let ok = errs[2].2 <= 0.01 && (1.8..=2.2).contains(&o1) && (1.8..=2.2).contains(&o2);
    verdict(5, ok, format!("cp(128) = {:.6} ({:.2e} rel), orders {o1:.3}, {o2:.3}", errs[2].1, errs[2].2))
}

fn energy(r: &SuiteReport) -> Verdict {
    let w7 = r.metric("refinement_ratio_w7").unwrap_or(f64::NAN);
    let w15 = r.metric("refinement_ratio_w15").unwrap_or(f64::NAN);
    let ok = (3.0..=5.0).contains(&w7) && (3.0..=5.0).contains(&w15);
    verdict(6, ok, format!("refinement ratios w7 {w7:.3}, w15 {w15:.3}"))
}

fn dissipativity(r: &SuiteReport) -> Verdict {
    let spreads: Vec<String> = r
        .metrics
        .iter()
        .filter(|(k, _)| k.starts_with("radius_spread"))
        .map(|(k, v)| format!("{}: {:.2e}", &k["radius_spread_".len()..], v))
        .collect();
    verdict(7, r.passed && spreads.len() == 3, format!("radius spreads {}{}", spreads.join(", "), failures(r)))
}

fn stability(r: &SuiteReport) -> Verdict {
    let rates: Vec<String> = r
        .members
        .iter()
        .map(|m| {
            format!(
                "{}: K {:.2} R2 {:.5} final {:.1e} steady {:.1e}",
                m.name,
                m.metrics.get("decay_rate").copied().unwrap_or(f64::NAN),
                m.metrics.get("fit_r2").copied().unwrap_or(f64::NAN),
                m.metrics.get("rel_energy_final_ratio").copied().unwrap_or(f64::NAN),
                m.metrics.get("steady_vs_closed_form").copied().unwrap_or(f64::NAN),
            )
        })
        .collect();
    verdict(8, r.passed, format!("{}{}", rates.join("; "), failures(r)))
}

fn ergodic(r: &SuiteReport) -> Verdict {
    let gap = r
        .members
        .iter()
        .flat_map(|m| ["gap_ke", "gap_mean_theta"].map(|k| m.metrics.get(k).copied().unwrap_or(f64::INFINITY)))
        .fold(0.0, f64::max);
    verdict(9, r.passed && gap <= 1e-6, format!("largest cauchy gap {gap:.2e} at t = 100{}", failures(r)))
}

fn infrastructure(dir: &Path) -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;

    let g = build_grid(13, 9, 1.7, 0.9).expect("valid grid");
    let theta = Theta0Spec::Random(3.0).build(&g, 11, None).expect("plain field");
    let mut s = SimState::new(random_divfree(&g, 0.7, 5), theta).expect("same grid");
    s.t = 0.1 + 0.2;
    s.step = 12345;
    let path = dir.join("round.chk");
    let back = checkpoint::write(&s, &path).and_then(|_| checkpoint::read(&path));
    let exact = back.as_ref().is_ok_and(|b| {
        b.t.to_bits() == s.t.to_bits()
            && b.step == s.step
            && b.theta.values().iter().zip(s.theta.values()).all(|(x, y)| x.to_bits() == y.to_bits())
            && b.u.ux().iter().zip(s.u.ux()).all(|(x, y)| x.to_bits() == y.to_bits())
            && b.u.uy().iter().zip(s.u.uy()).all(|(x, y)| x.to_bits() == y.to_bits())
    });
    ok &= exact;
    notes.push(format!("checkpoint round trip {}", if exact { "bit-exact" } else { "differs" }));

    let mut c: RunConfig = parse_config(BASE).expect("default config parses");
    c.grid = build_grid(16, 16, 1.0, 1.0).expect("valid grid");
    c.t_end = 0.2;
    c.theta0 = Theta0Spec::AlignedPlusRandom(0.5);
    let mut files = Vec::new();
    for k in 0..2 {
        c.out_dir = dir.join(format!("rerun{k}"));
        match simulate(&c, Some(&c.out_dir)) {
            Ok(_) => files.push((
                fs::read(c.out_dir.join("diagnostics.csv")).unwrap_or_default(),
                fs::read(c.out_dir.join("final.chk")).unwrap_or_default(),
            )),
            Err(e) => {
                ok = false;
                notes.push(format!("rerun {k}: {e}"));
            }
        }
    }
    let same = files.len() == 2 && !files[0].0.is_empty() && files[0] == files[1];
    ok &= same;
    notes.push(format!("reruns {}", if same { "byte-identical" } else { "differ" }));

    let bad = BASE.replace("alpha = 0.5", "alpha = 1.2");
    let cited = match parse_config(&bad) {
        Err(e) => {
            let m = e.to_string();
            m.contains("(UU)") && m.contains("0 < alpha < 1")
        }
        Ok(_) => false,
    };
    let zero_rejected = parse_config(&BASE.replace("alpha = 0.5", "alpha = 0")).is_err();
    ok &= cited && zero_rejected;
    notes.push(format!("alpha outside (0, 1) {}", if cited && zero_rejected { "rejected citing (UU)" } else { "not rejected" }));
    verdict(10, ok, notes.join(", "))
}

fn main() {
    let base = parse_config(BASE).expect("default config parses");
    let tmp = tempfile::tempdir().expect("temporary directory");
    let mut reports = Vec::new();
    for suite in Suite::ALL {
        match verify(suite, &base, tmp.path()) {
            Ok(r) => reports.push(r),
            Err(e) => {
                println!("suite {suite}: {e}");
            }
        }
    }
    let find = |name: &str| reports.iter().find(|r| r.suite == name);
    let missing = |id: usize, name: &str| verdict(id, false, format!("suite {name} did not produce a report"));

    let verdicts = vec![
        find("bounds").map_or_else(|| missing(1, "bounds"), ut1),
        max_principle(&reports),
        lambda_algebra(),
        find("uniqueness").map_or_else(|| missing(4, "uniqueness"), uniqueness),
        poincare(),
        find("dissipativity").map_or_else(|| missing(6, "dissipativity"), energy),
        find("dissipativity").map_or_else(|| missing(7, "dissipativity"), dissipativity),
        find("rayleigh").map_or_else(|| missing(8, "rayleigh"), stability),
        find("ergodic").map_or_else(|| missing(9, "ergodic"), ergodic),
        infrastructure(tmp.path()),
    ];
    let mut all = true;
    for v in &verdicts {
        all &= v.ok;
        println!("criterion {:2}: {} {}", v.id, if v.ok { "PASS" } else { "FAIL" }, v.detail);
    }
    if !all {
        std::process::exit(1);
    }
}
