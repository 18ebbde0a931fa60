//! Monte Carlo studies of null rejection rates and size-corrected power.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{failure_limit, order_statistic_critical, replicate_statistics};
use crate::design::DesignPartition;
use crate::distribution::Family;
use crate::error::{Error, Result};
use crate::estimate::{FitOptions, Fitter};
use crate::inference::{chisq_critical, TestContext};
use crate::rng;

/// Column order of every table: seven analytic tests, then four bootstrap.
pub const COLUMNS: [&str; 11] = [
    "S_W", "S_LR", "S_R", "S_T", "S*_LR", "S*_R", "S*_T", "Sb_W", "Sb_LR", "Sb_R", "Sb_T",
];

// Stream labels keep noise, bootstrap and calibration draws independent.
const LABEL_COVARIATES: u64 = 1;
const LABEL_NOISE: u64 = 2;
const LABEL_BOOTSTRAP: u64 = 3;
const LABEL_CALIBRATION: u64 = 4;
const LABEL_POWER: u64 = 5;
const LABEL_SELF_TEST: u64 = 6;

fn default_alphas() -> Vec<f64> {
    vec![0.10, 0.05, 0.01]
}

fn default_calibration() -> usize {
    100_000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub covariate: u64,
    pub noise: u64,
}

/// One Monte Carlo experiment. Column 0 of X is the intercept, the other
/// p − 1 columns are U(0, 1) draws fixed by `seeds.covariate`, and the
/// tested block is the last `q` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimDesign {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub phi: f64,
    /// Full coefficient vector; defaults to 1 for untested and β₁₀ for
    /// tested coefficients.
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
    /// Null values of the tested block; defaults to zeros.
    #[serde(default)]
    pub beta10: Option<Vec<f64>>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    pub reps: usize,
    #[serde(default)]
    pub boot: Option<usize>,
    pub seeds: Seeds,
    #[serde(default)]
    pub delta_grid: Option<Vec<f64>>,
    #[serde(default = "default_calibration")]
    pub calibration_reps: usize,
    /// Replace statistics by exact χ²_q draws to check the tabulation.
    #[serde(default)]
    pub self_test: bool,
}

impl SimDesign {
    pub fn new(family: Family, n: usize, p: usize, q: usize, reps: usize, seeds: Seeds) -> Self {
        SimDesign {
            family,
            n,
            p,
            q,
            phi: 3.0,
            beta: None,
            beta10: None,
            alphas: default_alphas(),
            reps,
            boot: None,
            seeds,
            delta_grid: None,
            calibration_reps: default_calibration(),
            self_test: false,
        }
    }

    /// All problems at once.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.family.validate() {
            out.push(e.to_string());
        }
        if self.p == 0 {
            out.push("p must be at least 1".into());
        }
        if self.q == 0 || self.q > self.p {
            out.push(format!("q must lie in [1, p], got q = {} with p = {}", self.q, self.p));
        }
        if self.n <= self.p {
            out.push(format!("n must exceed p, got n = {} with p = {}", self.n, self.p));
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            out.push(format!("phi must be positive, got {}", self.phi));
        }
        if self.reps == 0 {
            out.push("reps must be at least 1".into());
        }
        for a in &self.alphas {
            if !(*a > 0.0 && *a < 1.0) {
                out.push(format!("alpha {a} is not in (0, 1)"));
            }
        }
        if let Some(b) = &self.beta {
            if b.len() != self.p {
                out.push(format!("beta has {} entries, expected p = {}", b.len(), self.p));
            }
        }
        if let Some(b) = &self.beta10 {
            if b.len() != self.q {
                out.push(format!("beta10 has {} entries, expected q = {}", b.len(), self.q));
            }
        }
        if self.boot == Some(0) {
            out.push("boot must be at least 1 when given".into());
        }
        if let Some(g) = &self.delta_grid {
            if g.is_empty() {
                out.push("delta_grid must not be empty".into());
            }
        }
        if self.calibration_reps == 0 {
            out.push("calibration_reps must be at least 1".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    pub fn beta10(&self) -> Vec<f64> {
        self.beta10.clone().unwrap_or_else(|| vec![0.0; self.q])
    }

    /// True coefficients in caller column order.
    pub fn beta_true(&self) -> Vec<f64> {
        self.beta.clone().unwrap_or_else(|| {
            let mut b = vec![1.0; self.p];
            b[self.p - self.q..].copy_from_slice(&self.beta10());
            b
        })
    }

    /// Intercept plus U(0,1) covariates.
    pub fn covariates(&self) -> DMatrix<f64> {
        let mut r = rng::stream(self.seeds.covariate, LABEL_COVARIATES);
        let mut x = DMatrix::from_element(self.n, self.p, 1.0);
        // Row-major fill so that adding rows keeps earlier rows unchanged.
        for i in 0..self.n {
            for j in 1..self.p {
                x[(i, j)] = r.random::<f64>();
            }
        }
        x
    }

    pub fn partition(&self) -> Result<DesignPartition> {
        DesignPartition::trailing(self.covariates(), self.q, &self.beta10())
    }

    fn context(&self) -> Result<TestContext> {
        let fitter = Fitter::new(self.partition()?, self.family, FitOptions::default())?;
        TestContext::new(fitter, false)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateRow {
    pub alpha: f64,
    /// Rejection rate in percent per column; `None` where not computed.
    pub rate: Vec<Option<f64>>,
    /// Monte Carlo standard error in percentage points.
    pub mc_se: Vec<Option<f64>>,
    /// Empirical (1 − α) quantile of each analytic statistic.
    pub empirical_critical: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimResult {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub reps: usize,
    pub failures: usize,
    pub rows: Vec<RateRow>,
}

struct Outcome {
    stats: [f64; 7],
    /// Per α: observed > bootstrap critical value.
    boot_reject: Option<Vec<[bool; 4]>>,
}

fn mc_se(rate_pct: f64, reps: usize) -> f64 {
    let r = rate_pct / 100.0;
    100.0 * (r * (1.0 - r) / reps as f64).sqrt()
}

/// Sorted finite values of one statistic column.
fn sorted_column(outcomes: &[Outcome], j: usize) -> Vec<f64> {
    let mut v: Vec<f64> = outcomes.iter().map(|o| o.stats[j]).filter(|s| !s.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Empirical (1 − α) quantile: rejecting above it rejects at most α.
pub fn empirical_critical(sorted: &[f64], alpha: f64) -> f64 {
    let m = sorted.len();
    let k = ((1.0 - alpha) * m as f64).ceil() as usize;
    sorted[k.clamp(1, m) - 1]
}

fn replicate(ctx: &TestContext, design: &SimDesign, mean: &DVector<f64>, i: usize) -> Option<Outcome> {
    if design.self_test {
        let mut r = rng::substream(design.seeds.noise, LABEL_SELF_TEST, i as u64);
        let chi = ChiSquared::new(design.q as f64).expect("q >= 1");
        let mut stats = [0.0; 7];
        for s in stats.iter_mut() {
            *s = chi.sample(&mut r);
        }
        return Some(Outcome {
            stats,
            boot_reject: None,
        });
    }
    let sampler = ctx.fitter.kernel.sampler();
    let mut r = rng::substream(design.seeds.noise, LABEL_NOISE, i as u64);
    let y = DVector::from_fn(mean.len(), |l, _| mean[l] + design.phi * sampler.draw(&mut r));
    let (u, t) = ctx.fits(&y).ok()?;
    let raw = ctx.raw(&u, &t, false).ok()?;
    let stats = ctx.statistic_set(&raw).to_array();
    let boot_reject = match design.boot {
        Some(b) => {
            let seed = rng::derive_seed(rng::derive_seed(design.seeds.noise, LABEL_BOOTSTRAP), i as u64);
            let reps = replicate_statistics(ctx, &t, b, seed);
            let ok: Vec<[f64; 4]> = reps.iter().flatten().copied().collect();
            if b - ok.len() > failure_limit(b) {
                return None;
            }
            let obs = raw.to_array();
            let mut cols: [Vec<f64>; 4] = Default::default();
            for (j, c) in cols.iter_mut().enumerate() {
                *c = ok.iter().map(|s| s[j]).collect();
                c.sort_by(f64::total_cmp);
            }
            Some(
                design
                    .alphas
                    .iter()
                    .map(|&a| std::array::from_fn(|j| obs[j] > order_statistic_critical(&cols[j], a)))
                    .collect(),
            )
        }
        None => None,
    };
    Some(Outcome { stats, boot_reject })
}

fn run_replicates(ctx: &TestContext, design: &SimDesign, mean: &DVector<f64>) -> Result<(Vec<Outcome>, usize)> {
    let all: Vec<Option<Outcome>> = (0..design.reps)
        .into_par_iter()
        .map(|i| replicate(ctx, design, mean, i))
        .collect();
    let failures = all.iter().filter(|o| o.is_none()).count();
    if failures > failure_limit(design.reps) {
        return Err(Error::TooManyFailures {
            failed: failures,
            total: design.reps,
            limit: failure_limit(design.reps),
        });
    }
    Ok((all.into_iter().flatten().collect(), failures))
}

/// Null rejection rates of every statistic at every α.
pub fn size_study(design: &SimDesign) -> Result<SimResult> {
    design.validate()?;
    let beta = design.beta_true();
    let b10 = design.beta10();
    if beta[design.p - design.q..] != b10[..] {
        return Err(Error::Config(vec![
            "size study needs the tested coefficients equal to beta10".into(),
        ]));
    }
    let ctx = design.context()?;
    let mean = &ctx.fitter.partition.x * ctx.fitter.partition.to_internal_order(&DVector::from_vec(beta));
    let (outcomes, failures) = run_replicates(&ctx, design, &mean)?;
    let used = outcomes.len();
    let sorted: Vec<Vec<f64>> = (0..7).map(|j| sorted_column(&outcomes, j)).collect();
    let rows = design
        .alphas
        .iter()
        .enumerate()
        .map(|(ai, &alpha)| {
            let crit = chisq_critical(alpha, design.q);
            let mut rate = vec![None; 11];
            let mut se = vec![None; 11];
            let mut emp = vec![None; 11];
            for j in 0..7 {
                if sorted[j].is_empty() || used == 0 {
                    continue;
                }
                let rej = outcomes.iter().filter(|o| o.stats[j] > crit).count();
                let pct = 100.0 * rej as f64 / used as f64;
                rate[j] = Some(pct);
                se[j] = Some(mc_se(pct, used));
                emp[j] = Some(empirical_critical(&sorted[j], alpha));
            }
            if design.boot.is_some() && used > 0 {
                for j in 0..4 {
                    let rej = outcomes
                        .iter()
                        .filter(|o| o.boot_reject.as_ref().is_some_and(|b| b[ai][j]))
                        .count();
                    let pct = 100.0 * rej as f64 / used as f64;
                    rate[7 + j] = Some(pct);
                    se[7 + j] = Some(mc_se(pct, used));
                }
            }
            RateRow {
                alpha,
                rate,
                mc_se: se,
                empirical_critical: emp,
            }
        })
        .collect();
    Ok(SimResult {
        family: design.family,
        n: design.n,
        p: design.p,
        q: design.q,
        reps: used,
        failures,
        rows,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerPoint {
    pub delta: f64,
    /// Per α, per analytic statistic: rejection rate in percent.
    pub rate: Vec<Vec<Option<f64>>>,
    pub mc_se: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerResult {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub reps: usize,
    pub calibration_reps: usize,
    pub alphas: Vec<f64>,
    /// Size-corrected critical values per α and analytic statistic.
    pub critical_values: Vec<Vec<Option<f64>>>,
    pub curve: Vec<PowerPoint>,
    pub failures: usize,
}

/// Size-corrected power over `delta_grid`: critical values come from a
/// separate null run of `calibration_reps` replicates; the alternative sets
/// every tested coefficient to β₁₀ + δ.
pub fn power_study(design: &SimDesign) -> Result<PowerResult> {
    design.validate()?;
    let grid = design
        .delta_grid
        .clone()
        .ok_or_else(|| Error::Config(vec!["power study needs delta_grid".into()]))?;
    let ctx = design.context()?;
    let part = &ctx.fitter.partition;
    let b10 = design.beta10();
    let base = {
        let mut b = design.beta_true();
        b[design.p - design.q..].copy_from_slice(&b10);
        b
    };
    let mean_for = |delta: f64| {
        let mut b = base.clone();
        for v in b[design.p - design.q..].iter_mut() {
            *v += delta;
        }
        &part.x * part.to_internal_order(&DVector::from_vec(b))
    };
    let analytic = |label: u64, mean: &DVector<f64>, reps: usize| -> Vec<Option<[f64; 7]>> {
        let sampler = ctx.fitter.kernel.sampler();
        (0..reps)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::substream(design.seeds.noise, label, i as u64);
                let y = DVector::from_fn(mean.len(), |l, _| mean[l] + design.phi * sampler.draw(&mut r));
                let (u, t) = ctx.fits(&y).ok()?;
                let raw = ctx.raw(&u, &t, false).ok()?;
                Some(ctx.statistic_set(&raw).to_array())
            })
            .collect()
    };
    let check = |v: &[Option<[f64; 7]>]| -> Result<usize> {
        let failed = v.iter().filter(|o| o.is_none()).count();
        if failed > failure_limit(v.len()) {
            return Err(Error::TooManyFailures {
                failed,
                total: v.len(),
                limit: failure_limit(v.len()),
            });
        }
        Ok(failed)
    };

    let null = analytic(LABEL_CALIBRATION, &mean_for(0.0), design.calibration_reps);
    let mut failures = check(&null)?;
    let critical_values: Vec<Vec<Option<f64>>> = design
        .alphas
        .iter()
        .map(|&a| {
            (0..7)
                .map(|j| {
                    let mut v: Vec<f64> = null.iter().flatten().map(|s| s[j]).filter(|s| !s.is_nan()).collect();
                    if v.is_empty() {
                        return None;
                    }
                    v.sort_by(f64::total_cmp);
                    Some(empirical_critical(&v, a))
                })
                .collect()
        })
        .collect();

    let mut curve = Vec::with_capacity(grid.len());
    for &delta in &grid {
        // Common random numbers across δ.
        let alt = analytic(LABEL_POWER, &mean_for(delta), design.reps);
        failures += check(&alt)?;
        let ok: Vec<[f64; 7]> = alt.into_iter().flatten().collect();
        let m = ok.len();
        let mut rate = Vec::new();
        let mut se = Vec::new();
        for crit in &critical_values {
            let r: Vec<Option<f64>> = (0..7)
                .map(|j| {
                    crit[j].map(|c| 100.0 * ok.iter().filter(|s| s[j] > c).count() as f64 / m as f64)
                })
                .collect();
            se.push(r.iter().map(|x| x.map(|p| mc_se(p, m))).collect());
            rate.push(r);
        }
        curve.push(PowerPoint {
            delta,
            rate,
            mc_se: se,
        });
    }
    Ok(PowerResult {
        family: design.family,
        n: design.n,
        p: design.p,
        q: design.q,
        reps: design.reps,
        calibration_reps: design.calibration_reps,
        alphas: design.alphas.clone(),
        critical_values,
        curve,
        failures,
    })
}

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.2}"),
        None => "NA".into(),
    }
}

/// Renders size results as (CSV, aligned text), one row per (q, n, α).
pub fn table_report(results: &[SimResult]) -> (String, String) {
    let mut csv = String::from("q,n,alpha_pct");
    for c in COLUMNS {
        csv.push(',');
        csv.push_str(c);
    }
    csv.push('\n');
    let mut text = format!("{:>3} {:>4} {:>6}", "q", "n", "a(%)");
    for c in COLUMNS {
        let _ = write!(text, " {c:>7}");
    }
    text.push('\n');
    for r in results {
        for row in &r.rows {
            let a = 100.0 * row.alpha;
            let _ = write!(csv, "{},{},{}", r.q, r.n, a);
            let _ = write!(text, "{:>3} {:>4} {:>6}", r.q, r.n, a);
            for v in &row.rate {
                let cell = fmt_cell(*v);
                let _ = write!(csv, ",{cell}");
                let _ = write!(text, " {cell:>7}");
            }
            csv.push('\n');
            text.push('\n');
        }
    }
    (csv, text)
}

/// Plot-ready CSV of a power curve: one row per (α, δ).
pub fn power_report(result: &PowerResult) -> String {
    let mut csv = String::from("alpha_pct,delta");
    for c in &COLUMNS[..7] {
        csv.push(',');
        csv.push_str(c);
    }
    csv.push('\n');
    for (ai, a) in result.alphas.iter().enumerate() {
        for pt in &result.curve {
            let _ = write!(csv, "{},{}", 100.0 * a, pt.delta);
            for v in &pt.rate[ai] {
                let _ = write!(csv, ",{}", fmt_cell(*v));
            }
            csv.push('\n');
        }
    }
    csv
}
