//! Acceptance run: one PASS/FAIL line per criterion, with detail lines
//! underneath. Exits non-zero unless every failure is one of the entries
//! listed in `KNOWN_UNATTAINABLE`.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::Rng;
use statrs::function::gamma::gamma;

use symreg_core::design::{projections, DesignPartition};
use symreg_core::distribution::{
    correction_constants, delta_oracle, logistic_i_constant, oracle_deltas, CorrectionConstants, Family,
};
use symreg_core::inference::Coefficients;
use symreg_core::simulation::{power_study, size_study, Seeds, SimDesign, COLUMNS};

use common::*;

/// Printed constants that disagree with their own definitions. Each is
/// still checked against the printed value and reported as a failure.
const KNOWN_UNATTAINABLE: &[&str] = &[
    // Quadrature and 30-digit arithmetic both give 4.0129896.
    "logistic1 δ20002",
    // The printed ν/(1+ν) is not the variance of t_ν.
    "student-t:4 ξ",
];

struct Outcome {
    name: &'static str,
    failures: Vec<String>,
    notes: Vec<String>,
    elapsed: Duration,
}

fn run(name: &'static str, f: impl FnOnce(&mut Vec<String>, &mut Vec<String>)) -> Outcome {
    let t = Instant::now();
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    f(&mut failures, &mut notes);
    Outcome {
        name,
        failures,
        notes,
        elapsed: t.elapsed(),
    }
}

fn within(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

// ---------------------------------------------------------------------------

fn pe_xi(k: f64) -> f64 {
    2f64.powf(1.0 + k) * gamma(1.5 * (1.0 + k)) / gamma((1.0 + k) / 2.0)
}

fn pe_d20000(k: f64) -> f64 {
    2f64.powf(1.0 - k) * gamma((3.0 - k) / 2.0) / ((1.0 + k).powi(2) * gamma((1.0 + k) / 2.0))
}

fn table_constants(fail: &mut Vec<String>, notes: &mut Vec<String>) {
    let start = Instant::now();
    // (family, label, printed value, computed by quadrature)
    let mut entries: Vec<(String, f64, f64)> = Vec::new();
    let mut push = |f: Family, what: &str, printed: f64, idx: [u32; 5]| {
        let v = delta_oracle(f, idx[0], idx[1], idx[2], idx[3], idx[4]).unwrap_or(f64::NAN);
        entries.push((format!("{f} {what}"), printed, v));
    };
    let xi = [0, 0, 0, 0, 2];
    let d0 = [2, 0, 0, 0, 0];
    let d2 = [2, 0, 0, 0, 2];
    push(Family::Normal, "ξ", 1.0, xi);
    push(Family::Normal, "δ20000", 1.0, d0);
    push(Family::Normal, "δ20002", 3.0, d2);
    push(Family::Cauchy, "δ20000", 0.5, d0);
    push(Family::Cauchy, "δ20002", 1.5, d2);
    for nu in [3.0, 4.0, 8.0, 25.0] {
        let f = Family::StudentT { nu };
        push(f, "δ20000", (nu + 1.0) / (nu + 3.0), d0);
        push(f, "δ20002", 3.0 * (nu + 1.0) / (nu + 3.0), d2);
    }
    push(Family::StudentT { nu: 4.0 }, "ξ", 4.0 / 5.0, xi);
    push(Family::LogisticI, "ξ", 0.79569, xi);
    push(Family::LogisticI, "δ20000", 1.47724, d0);
    push(Family::LogisticI, "δ20002", 4.01378, d2);
    push(Family::LogisticII, "ξ", PI * PI / 3.0, xi);
    push(Family::LogisticII, "δ20000", 1.0 / 3.0, d0);
    push(Family::LogisticII, "δ20002", 2.42996, d2);
    for k in [-0.5, 0.0, 0.3, 0.5, 0.9] {
        let f = Family::PowerExp { k };
        push(f, "ξ", pe_xi(k), xi);
        push(f, "δ20000", pe_d20000(k), d0);
        push(f, "δ20002", (3.0 + k) / (1.0 + k), d2);
    }
    entries.push(("logistic1 c".into(), 1.4843, logistic_i_constant()));
    for (label, printed, got) in &entries {
        if within(*got, *printed, 1e-4) {
            notes.push(format!("ok   {label}: {got:.6} (table {printed:.6})"));
        } else {
            fail.push(label.clone());
            notes.push(format!("FAIL {label}: {got:.6} vs table {printed:.6} (diff {:.2e})", got - printed));
        }
    }
    // "Does not exist": the Cauchy second moment must be reported divergent.
    match delta_oracle(Family::Cauchy, 0, 0, 0, 0, 2) {
        Err(_) => notes.push("ok   cauchy ξ: reported divergent".into()),
        Ok(v) => {
            fail.push("cauchy ξ".into());
            notes.push(format!("FAIL cauchy ξ: finite value {v}"));
        }
    }
    let el = start.elapsed();
    notes.push(format!("runtime {el:.2?} (limit 10 s)"));
    if el > Duration::from_secs(10) {
        fail.push("runtime".into());
    }
}

fn dual_path(fail: &mut Vec<String>, notes: &mut Vec<String>) {
    let mut r = rng(20_240_501);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let family = random_family(&mut r);
        let n = r.random_range(10..60);
        let p = r.random_range(1..7);
        let q = r.random_range(1..=p);
        let seed: u64 = r.random();
        let x = random_design(&mut rng(seed), n, p);
        let part = DesignPartition::trailing(x, q, &vec![0.0; q]).unwrap();
        let rho = projections(&part);
        let route1 = correction_constants(family).unwrap();
        let route2 = CorrectionConstants::from_deltas(&oracle_deltas(family).unwrap()).unwrap();
        for known in [false, true] {
            let k1 = Coefficients::new(&rho, &route1, known);
            let k2 = Coefficients::new(&rho, &route2, known);
            let v1 = [k1.a_lr, k1.a_r, k1.b_r, k1.c_r, k1.a_t, k1.b_t, k1.c_t];
            let v2 = [k2.a_lr, k2.a_r, k2.b_r, k2.c_r, k2.a_t, k2.b_t, k2.c_t];
            // Also the corrected statistics at a few values.
            let s = [0.5, 3.0, 12.0];
            let mut diffs: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| (a - b).abs()).collect();
            for &x in &s {
                let c1 = x * (1.0 - (k1.c_r + k1.b_r * x + k1.a_r * x * x));
                let c2 = x * (1.0 - (k2.c_r + k2.b_r * x + k2.a_r * x * x));
                diffs.push((c1 - c2).abs());
                let c1 = x * (1.0 - (k1.c_t + k1.b_t * x + k1.a_t * x * x));
                let c2 = x * (1.0 - (k2.c_t + k2.b_t * x + k2.a_t * x * x));
                diffs.push((c1 - c2).abs());
                diffs.push((x * (k1.a_lr - k2.a_lr)).abs());
            }
            let d = diffs.iter().fold(0.0f64, |m, v| m.max(*v));
            worst = worst.max(d);
            if d > 1e-6 {
                fail.push(format!("case {case}"));
                notes.push(format!("FAIL case {case}: {family} n={n} p={p} q={q} φ-known={known} max diff {d:e}"));
            }
        }
    }
    notes.push(format!("50 configurations, largest difference {worst:.2e} (limit 1e-6)"));
}

fn normal_oracle(fail: &mut Vec<String>, notes: &mut Vec<String>) {
    let mut r = rng(7);
    for i in 0..100 {
        let seed: u64 = r.random();
        if let Err(e) = normal_ols(seed) {
            fail.push(format!("instance {i}"));
            notes.push(format!("FAIL instance {i}: {e}"));
        }
    }
    notes.push("100 instances: scoring fit = normal equations to 1e-10, S_R = S_T to 1e-8".into());
    let x = random_design(&mut rng(1), 20, 4);
    let part = DesignPartition::trailing(x, 3, &[0.0; 3]).unwrap();
    let k = Coefficients::new(&projections(&part), &correction_constants(Family::Normal).unwrap(), false);
    let got = [k.a_lr, k.c_r, k.c_t, k.b_r, k.b_t];
    let want = [0.175, 0.175, 0.175, -0.025, -0.025];
    let ok = got.iter().zip(&want).all(|(g, w)| within(*g, *w, 1e-14));
    notes.push(format!(
        "n=20 p=4 q=3: a_LR={:.15} c_R={:.15} c_T={:.15} b_R={:.15} b_T={:.15}",
        got[0], got[1], got[2], got[3], got[4]
    ));
    if !ok {
        fail.push("n=20 coefficients".into());
    }
}

// Covariate and noise seeds are fixed once; the covariate draw plays the
// role of the unknown realization behind the published tables.
const SEEDS: Seeds = Seeds {
    covariate: 2024,
    noise: 7,
};

fn compare_cell(
    fail: &mut Vec<String>,
    notes: &mut Vec<String>,
    label: &str,
    res: &symreg_core::simulation::SimResult,
    alpha: f64,
    expected: &[(&str, f64)],
) {
    let row = res.rows.iter().find(|r| r.alpha == alpha).unwrap();
    for (col, want) in expected {
        let j = COLUMNS.iter().position(|c| c == col).unwrap();
        let got = row.rate[j].unwrap_or(f64::NAN);
        let ok = within(got, *want, 1.0);
        notes.push(format!(
            "{} {label} α={}% {col}: {got:.2} (table {want:.2})",
            if ok { "ok  " } else { "FAIL" },
            alpha * 100.0
        ));
        if !ok {
            fail.push(format!("{label} α={alpha} {col}"));
        }
    }
}

fn table_reproduction(fail: &mut Vec<String>, notes: &mut Vec<String>) {
    let start = Instant::now();
    let normal = size_study(&SimDesign::new(Family::Normal, 20, 4, 3, 15_000, SEEDS)).unwrap();
    compare_cell(fail, notes, "normal q=3 n=20", &normal, 0.10, &[("S_W", 21.32), ("S_R", 10.72), ("S*_LR", 10.34)]);
    compare_cell(fail, notes, "normal q=3 n=20", &normal, 0.05, &[("S_W", 14.63), ("S_R", 4.33), ("S*_LR", 5.10)]);
    compare_cell(fail, notes, "normal q=3 n=20", &normal, 0.01, &[("S_W", 6.12), ("S_R", 0.37), ("S*_LR", 1.09)]);
    let t4 = size_study(&SimDesign::new(Family::StudentT { nu: 4.0 }, 20, 6, 2, 15_000, SEEDS)).unwrap();
    compare_cell(
        fail,
        notes,
        "student-t:4 p=6 q=2 n=20",
        &t4,
        0.05,
        &[("S_W", 22.35), ("S_LR", 14.09), ("S_R", 7.77), ("S_T", 8.54), ("S*_T", 4.88)],
    );
    let l2 = size_study(&SimDesign::new(Family::LogisticII, 20, 6, 4, 15_000, SEEDS)).unwrap();
    compare_cell(fail, notes, "logistic2 p=6 q=4 n=20", &l2, 0.05, &[("S_W", 23.95), ("S*_T", 4.63)]);
    let el = start.elapsed();
    notes.push(format!("runtime {el:.2?} (target 2 min)"));
    if el > Duration::from_secs(120) {
        fail.push("runtime".into());
    }
}

fn bootstrap_calibration(fail: &mut Vec<String>, notes: &mut Vec<String>) {
    let start = Instant::now();
    let mut d = SimDesign::new(Family::Normal, 20, 4, 3, 5_000, SEEDS);
    d.boot = Some(600);
    let res = size_study(&d).unwrap();
    let table = [
        (0.10, [10.35, 10.35, 10.37, 10.37]),
        (0.05, [5.12, 5.15, 5.15, 5.15]),
        (0.01, [1.13, 1.17, 1.19, 1.19]),
    ];
    for (alpha, vals) in table {
        let exp: Vec<(&str, f64)> = ["Sb_W", "Sb_LR", "Sb_R", "Sb_T"].into_iter().zip(vals).collect();
        compare_cell(fail, notes, "normal q=3 n=20 B=600", &res, alpha, &exp);
    }
    notes.push(format!("5000 × 600 replicates, {} failed; runtime {:.2?}", res.failures, start.elapsed()));
}

fn power_properties(fail: &mut Vec<String>, notes: &mut Vec<String>) {
    for family in [Family::Normal, Family::StudentT { nu: 4.0 }, Family::LogisticII] {
        // Grid step set by the per-observation information δ20000/φ², so
        // every family spans the same range of noncentrality.
        let info = symreg_core::distribution::kernel(family).unwrap().delta_20000();
        let step = 2.0 / info.sqrt();
        let mut d = SimDesign::new(family, 30, 4, 3, 15_000, SEEDS);
        d.alphas = vec![0.10];
        d.delta_grid = Some((-3..=3).map(|i| i as f64 * step).collect());
        let res = power_study(&d).unwrap();
        let mut spread = 0.0f64;
        for (gi, pt) in res.curve.iter().enumerate() {
            let rates: Vec<f64> = pt.rate[0].iter().map(|r| r.unwrap_or(f64::NAN)).collect();
            let (lo, hi) = rates.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            spread = spread.max(hi - lo);
            if !(hi - lo <= 2.0) {
                fail.push(format!("{family} δ={:.2} spread", pt.delta));
            }
            if pt.delta == 0.0 && !rates.iter().all(|r| within(*r, 10.0, 1.0)) {
                fail.push(format!("{family} size"));
            }
            if (gi == 0 || gi + 1 == res.curve.len()) && !rates.iter().all(|r| *r > 95.0) {
                fail.push(format!("{family} δ={:.2} extreme", pt.delta));
            }
            notes.push(format!(
                "{family} δ={:>6.2}: {}",
                pt.delta,
                rates.iter().map(|r| format!("{r:6.2}")).collect::<Vec<_>>().join(" ")
            ));
        }
        notes.push(format!("{family}: largest pairwise spread {spread:.2} pp (limit 2)"));
    }
}

fn property_suites(fail: &mut Vec<String>, notes: &mut Vec<String>) {
    let mut record = |what: &str, c: Check| match c {
        Ok(()) => {}
        Err(e) => {
            fail.push(what.to_string());
            notes.push(format!("FAIL {what}: {e}"));
        }
    };
    for f in fixed_families() {
        record("δ regularity", regularity(f, 1e-6));
    }
    for s in 0..20u64 {
        record("projection identities", projection_identities(s, 8 + s as usize, 1 + (s % 5) as usize, 1));
        let f = fixed_families()[(s % 8) as usize];
        record("scale equivariance", scale_equivariance(f, s, if s % 2 == 0 { 7.5 } else { -0.02 }, 1e-8));
        record("a_R = a_T = 0", cubic_terms_vanish(f, s));
        record("row duplication halves A's", duplication_halves(f, s, 1e-10));
        record("log-symmetric bit match", log_symmetric_bit_match(f, s));
    }
    record("thread-count invariance", thread_invariance(&[1, 3]));
    notes.push("fixed-instance run; the randomized versions live in the property test target".into());
}

fn main() {
    let outcomes = [
        run("constant verification against the table", table_constants),
        run("correction dual path (closed form vs quadrature)", dual_path),
        run("normal oracle", normal_oracle),
        run("null rejection rates, 15000 replicates", table_reproduction),
        run("bootstrap calibration, 5000 × B=600", bootstrap_calibration),
        run("size-corrected power curves", power_properties),
        run("property suites", property_suites),
    ];
    let mut unexpected = Vec::new();
    for o in &outcomes {
        let status = if o.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("{status} {} ({:.1?})", o.name, o.elapsed);
        for n in &o.notes {
            println!("     {n}");
        }
        for f in &o.failures {
            if KNOWN_UNATTAINABLE.contains(&f.as_str()) {
                println!("     known unattainable: {f}");
            } else {
                unexpected.push(format!("{}: {f}", o.name));
            }
        }
    }
    let known_seen: Vec<&str> = outcomes
        .iter()
        .flat_map(|o| o.failures.iter().map(String::as_str))
        .filter(|f| KNOWN_UNATTAINABLE.contains(f))
        .collect();
    for k in KNOWN_UNATTAINABLE {
        if !known_seen.contains(k) {
            // A listed entry started passing; the list must be revisited.
            unexpected.push(format!("listed as unattainable but passed: {k}"));
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all failures are listed as unattainable");
    } else {
        println!("acceptance: unexpected results:");
        for u in &unexpected {
            println!("  {u}");
        }
        std::process::exit(1);
    }
}
