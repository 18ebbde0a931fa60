//! Wald, likelihood ratio, score and gradient statistics for H₀: β₁ = β₁₀,
//! and the corrected likelihood ratio, score and gradient statistics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::design::{projections, r_factor, RhoSet};
use crate::distribution::{correction_constants, CorrectionConstants, Family};
use crate::error::{Error, Result};
use crate::estimate::{FitOptions, FitResult, Fitter, ModelSpec};

/// Upper-tail χ²_q probability; negative statistics count as 0.
pub fn chisq_pvalue(statistic: f64, q: usize) -> f64 {
    if statistic.is_nan() {
        return f64::NAN;
    }
    if statistic <= 0.0 {
        return 1.0;
    }
    if statistic.is_infinite() {
        return 0.0;
    }
    let chi = ChiSquared::new(q as f64).expect("q >= 1");
    chi.sf(statistic).clamp(0.0, 1.0)
}

/// χ²_q quantile of order `1 − alpha`.
pub fn chisq_critical(alpha: f64, q: usize) -> f64 {
    ChiSquared::new(q as f64).expect("q >= 1").inverse_cdf(1.0 - alpha)
}

/// The O(n⁻¹) building blocks. `*_bphi` terms are the contributions of
/// estimating φ and vanish when it is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ACoefficients {
    pub lr: f64,
    pub lr_bphi: f64,
    pub r1: f64,
    pub r2: f64,
    pub r1_bphi: f64,
    pub r2_bphi: f64,
    pub t1: f64,
    pub t2: f64,
    pub t1_bphi: f64,
    pub t2_bphi: f64,
}

pub fn a_coefficients(rho: &RhoSet, c: &CorrectionConstants, phi_known: bool) -> ACoefficients {
    let n = rho.n as f64;
    let p = rho.p as f64;
    let q = rho.q as f64;
    let cross = rho.rho_zz2 - rho.rho_z2z2;
    let spread = rho.rho_zz - 2.0 * rho.rho_zz2 + rho.rho_z2z2;
    let unknown = if phi_known { 0.0 } else { 1.0 };
    ACoefficients {
        lr: c.d0 / (n * q) * (rho.rho_zz - rho.rho_z2z2),
        lr_bphi: unknown * (c.d1 / n + c.d2 / n * (2.0 * p - q) / 2.0),
        r1: 12.0 * c.b0 / n * cross,
        r2: -9.0 * c.b0 / n * spread,
        r1_bphi: unknown * (12.0 * c.b1 / n * q * (p - q) - 6.0 * c.b2 / n * q),
        r2_bphi: unknown * (-12.0 * c.b3 / n * q * (q + 2.0)),
        t1: 6.0 * c.c0 / n * cross,
        t2: -3.0 * c.c0 / n * spread,
        t1_bphi: unknown * (6.0 * c.c1 / n * q * (p - q) + 6.0 * c.c2 / n * q),
        t2_bphi: unknown * (-3.0 * c.c1 / n * q * (q + 2.0)),
    }
}

/// The (a, b, c) sets multiplying S⁰, S¹, S² in the correction factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub a_lr: f64,
    pub a_r: f64,
    pub b_r: f64,
    pub c_r: f64,
    pub a_t: f64,
    pub b_t: f64,
    pub c_t: f64,
}

/// (a, b, c) of a polynomial correction from A₁₁, A₂₂ and A₃.
fn polynomial_coefficients(a11: f64, a22: f64, a3: f64, q: f64) -> (f64, f64, f64) {
    let a = a3 / (12.0 * q * (q + 2.0) * (q + 4.0));
    let b = (a22 - 2.0 * a3) / (12.0 * q * (q + 2.0));
    let c = (a11 - a22 + a3) / (12.0 * q);
    (a, b, c)
}

impl Coefficients {
    pub fn from_a(a: &ACoefficients, q: usize) -> Self {
        let qf = q as f64;
        // The cubic terms vanish identically for these models.
        let (a_r, b_r, c_r) = polynomial_coefficients(a.r1 + a.r1_bphi, a.r2 + a.r2_bphi, 0.0, qf);
        let (a_t, b_t, c_t) = polynomial_coefficients(a.t1 + a.t1_bphi, a.t2 + a.t2_bphi, 0.0, qf);
        Coefficients {
            a_lr: a.lr + a.lr_bphi,
            a_r,
            b_r,
            c_r,
            a_t,
            b_t,
            c_t,
        }
    }

    pub fn new(rho: &RhoSet, c: &CorrectionConstants, phi_known: bool) -> Self {
        Self::from_a(&a_coefficients(rho, c, phi_known), rho.q)
    }
}

/// S*_LR = S_LR (1 − a_LR).
pub fn bartlett_lr(s_lr: f64, rho: &RhoSet, c: &CorrectionConstants, phi_known: bool) -> (f64, f64) {
    let a = Coefficients::new(rho, c, phi_known).a_lr;
    (s_lr * (1.0 - a), a)
}

/// S*_R = S_R [1 − (c_R + b_R S_R + a_R S_R²)]; returns (S*_R, (a_R, b_R, c_R)).
pub fn bartlett_type_score(
    s_r: f64,
    rho: &RhoSet,
    c: &CorrectionConstants,
    phi_known: bool,
) -> (f64, (f64, f64, f64)) {
    let k = Coefficients::new(rho, c, phi_known);
    (polynomial_correct(s_r, k.a_r, k.b_r, k.c_r), (k.a_r, k.b_r, k.c_r))
}

/// S*_T = S_T [1 − (c_T + b_T S_T + a_T S_T²)]; returns (S*_T, (a_T, b_T, c_T)).
pub fn bartlett_type_gradient(
    s_t: f64,
    rho: &RhoSet,
    c: &CorrectionConstants,
    phi_known: bool,
) -> (f64, (f64, f64, f64)) {
    let k = Coefficients::new(rho, c, phi_known);
    (polynomial_correct(s_t, k.a_t, k.b_t, k.c_t), (k.a_t, k.b_t, k.c_t))
}

fn polynomial_correct(s: f64, a: f64, b: f64, c: f64) -> f64 {
    s * (1.0 - (c + b * s + a * s * s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawStatistics {
    pub wald: f64,
    pub lr: f64,
    pub score: f64,
    pub gradient: f64,
}

impl RawStatistics {
    pub fn to_array(&self) -> [f64; 4] {
        [self.wald, self.lr, self.score, self.gradient]
    }
}

/// Statistic values keyed by name; corrected entries are absent when no
/// correction exists for the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticSet {
    pub wald: f64,
    pub lr: f64,
    pub score: f64,
    pub gradient: f64,
    pub lr_corrected: Option<f64>,
    pub score_corrected: Option<f64>,
    pub gradient_corrected: Option<f64>,
}

impl StatisticSet {
    pub const NAMES: [&'static str; 7] = [
        "wald",
        "lr",
        "score",
        "gradient",
        "lr_corrected",
        "score_corrected",
        "gradient_corrected",
    ];

    /// Fixed-order array; missing corrections become NaN.
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.wald,
            self.lr,
            self.score,
            self.gradient,
            self.lr_corrected.unwrap_or(f64::NAN),
            self.score_corrected.unwrap_or(f64::NAN),
            self.gradient_corrected.unwrap_or(f64::NAN),
        ]
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> StatisticSet {
        StatisticSet {
            wald: f(self.wald),
            lr: f(self.lr),
            score: f(self.score),
            gradient: f(self.gradient),
            lr_corrected: self.lr_corrected.map(&f),
            score_corrected: self.score_corrected.map(&f),
            gradient_corrected: self.gradient_corrected.map(&f),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFlags {
    /// Some corrected statistic was negative; its p-value uses 0.
    pub correction_clamped: bool,
    pub forced: bool,
    pub degenerate: bool,
    pub phi_known: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub statistics: StatisticSet,
    pub pvalues: StatisticSet,
    pub coefficients: Option<Coefficients>,
    pub flags: ReportFlags,
}

/// Design- and family-dependent pieces shared by every test on one design.
#[derive(Debug, Clone)]
pub struct TestContext {
    pub fitter: Fitter,
    pub rho: RhoSet,
    pub constants: Option<CorrectionConstants>,
    pub coefficients: Option<Coefficients>,
    pub phi_known: bool,
    r: DMatrix<f64>,
    rtr_chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    x1: DMatrix<f64>,
}

impl TestContext {
    pub fn new(fitter: Fitter, phi_known: bool) -> Result<Self> {
        let part = &fitter.partition;
        let rho = projections(part);
        let r = r_factor(part);
        let rtr = r.tr_mul(&r);
        let rtr_chol = rtr
            .cholesky()
            .ok_or_else(|| Error::Design("RᵀR is not positive definite".into()))?;
        let constants = match correction_constants(fitter.kernel.family) {
            Ok(c) => Some(c),
            Err(Error::UnsupportedCorrection { .. }) => None,
            Err(e) => return Err(e),
        };
        let coefficients = constants.as_ref().map(|c| Coefficients::new(&rho, c, phi_known));
        let x1 = part.x1();
        Ok(TestContext {
            fitter,
            rho,
            constants,
            coefficients,
            phi_known,
            r,
            rtr_chol,
            x1,
        })
    }

    pub fn for_spec(spec: &ModelSpec, opts: FitOptions) -> Result<Self> {
        TestContext::new(Fitter::for_spec(spec, opts)?, false)
    }

    /// Both fits for one response.
    pub fn fits(&self, y: &DVector<f64>) -> Result<(FitResult, FitResult)> {
        Ok((self.fitter.fit(y)?, self.fitter.fit_restricted(y)?))
    }

    /// The four raw statistics from an unrestricted and a restricted fit.
    pub fn raw(&self, unres: &FitResult, res: &FitResult, force: bool) -> Result<RawStatistics> {
        if !force {
            for (f, name) in [(unres, "unrestricted"), (res, "restricted")] {
                if !f.converged {
                    return Err(Error::NotConverged(format!(
                        "{name} fit stopped after {} iterations (score norm {:.3e})",
                        f.iterations, f.score_norm
                    )));
                }
            }
        }
        let part = &self.fitter.partition;
        let q = part.q;
        let d = unres.beta.rows(0, q) - &part.beta10;
        let info = self.fitter.info_beta();
        let rd = &self.r * &d;
        let wald = info * rd.norm_squared() / (unres.phi * unres.phi);
        let lr = 2.0 * (unres.loglik - res.loglik);
        // X₁ᵀW̃ẽ = φ̃ X₁ᵀψ̃ with ψ = −g'(z̃).
        let psi = res.standardized.map(|z| -self.fitter.kernel.g1(z));
        let v = self.x1.tr_mul(&psi);
        let score = v.dot(&self.rtr_chol.solve(&v)) / info;
        let gradient = v.dot(&d) / res.phi;
        Ok(RawStatistics {
            wald,
            lr,
            score,
            gradient,
        })
    }

    /// Raw plus corrected statistics.
    pub fn statistic_set(&self, raw: &RawStatistics) -> StatisticSet {
        let (lr_c, r_c, t_c) = match &self.coefficients {
            Some(k) => (
                Some(raw.lr * (1.0 - k.a_lr)),
                Some(polynomial_correct(raw.score, k.a_r, k.b_r, k.c_r)),
                Some(polynomial_correct(raw.gradient, k.a_t, k.b_t, k.c_t)),
            ),
            None => (None, None, None),
        };
        StatisticSet {
            wald: raw.wald,
            lr: raw.lr,
            score: raw.score,
            gradient: raw.gradient,
            lr_corrected: lr_c,
            score_corrected: r_c,
            gradient_corrected: t_c,
        }
    }

    pub fn report(&self, unres: &FitResult, res: &FitResult, force: bool) -> Result<TestReport> {
        let raw = self.raw(unres, res, force)?;
        let stats = self.statistic_set(&raw);
        let q = self.rho.q;
        let clamped = [stats.lr_corrected, stats.score_corrected, stats.gradient_corrected]
            .iter()
            .any(|s| matches!(s, Some(v) if *v < 0.0));
        Ok(TestReport {
            family: self.fitter.kernel.family,
            n: self.rho.n,
            p: self.rho.p,
            q,
            pvalues: stats.map(|s| chisq_pvalue(s, q)),
            statistics: stats,
            coefficients: self.coefficients,
            flags: ReportFlags {
                correction_clamped: clamped,
                forced: force,
                degenerate: unres.degenerate || res.degenerate,
                phi_known: self.phi_known,
            },
        })
    }

    pub fn test(&self, y: &DVector<f64>, force: bool) -> Result<TestReport> {
        let (u, r) = self.fits(y)?;
        self.report(&u, &r, force)
    }
}

/// Four raw statistics from two fits of the same model.
pub fn statistics(spec: &ModelSpec, unres: &FitResult, res: &FitResult, force: bool) -> Result<RawStatistics> {
    TestContext::for_spec(spec, FitOptions::default())?.raw(unres, res, force)
}

/// Fits both models and reports every statistic.
pub fn test(spec: &ModelSpec) -> Result<TestReport> {
    TestContext::for_spec(spec, FitOptions::default())?.test(&spec.y, false)
}
