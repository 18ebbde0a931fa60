//! Maximum likelihood by Fisher scoring for unrestricted and null-restricted
//! fits, the log-symmetric adapter and information criteria.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{DesignPartition, LeastSquares};
use crate::distribution::{kernel, DistributionKernel, Family};
use crate::error::{Error, Result};

/// Value reported for φ̂ when the data are fitted exactly.
pub const PHI_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Relative log-likelihood change.
    pub tol_loglik: f64,
    /// Score in the Fisher metric, max over components.
    pub tol_grad: f64,
    pub max_halvings: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 200,
            tol_loglik: 1e-10,
            tol_grad: 1e-6,
            max_halvings: 30,
        }
    }
}

/// Response, design, error law and hypothesis.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    /// Response on the symmetric scale (log t for log-symmetric models).
    pub y: DVector<f64>,
    pub partition: DesignPartition,
    pub family: Family,
    pub log_scale: bool,
}

impl ModelSpec {
    pub fn new(y: DVector<f64>, partition: DesignPartition, family: Family) -> Result<Self> {
        if y.len() != partition.n() {
            return Err(Error::Design(format!(
                "response has {} rows, design has {}",
                y.len(),
                partition.n()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("response has non-finite values".into()));
        }
        family.validate()?;
        Ok(ModelSpec {
            y,
            partition,
            family,
            log_scale: false,
        })
    }

    /// Log-symmetric model for a positive response `t`: log t follows the
    /// symmetric model, so everything is fitted on the log scale.
    pub fn log_symmetric(t: &[f64], partition: DesignPartition, family: Family) -> Result<Self> {
        let bad: Vec<usize> = t
            .iter()
            .enumerate()
            .filter(|(_, v)| !(**v > 0.0) || !v.is_finite())
            .map(|(i, _)| i)
            .collect();
        if !bad.is_empty() {
            return Err(Error::NonPositiveResponse { rows: bad });
        }
        let y = DVector::from_iterator(t.len(), t.iter().map(|v| v.ln()));
        let mut spec = ModelSpec::new(y, partition, family)?;
        spec.log_scale = true;
        Ok(spec)
    }

    /// log of the Jacobian from the log scale back to t: −Σ log t = −Σ y.
    pub fn log_jacobian(&self) -> f64 {
        if self.log_scale {
            -self.y.sum()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Coefficients in internal order (tested block first). Under the null
    /// the leading block equals β₁₀.
    pub beta: DVector<f64>,
    pub phi: f64,
    pub loglik: f64,
    pub weights: DVector<f64>,
    pub residuals: DVector<f64>,
    pub standardized: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub degenerate: bool,
    pub restricted: bool,
    /// Log-likelihood after each accepted iteration, starting value first.
    pub trace: Vec<f64>,
    /// Fisher-metric score norm at the returned point.
    pub score_norm: f64,
}

impl FitResult {
    /// β̃₂ of a restricted fit (the non-tested coefficients).
    pub fn nuisance(&self, q: usize) -> DVector<f64> {
        self.beta.rows(q, self.beta.len() - q).into_owned()
    }
}

/// Precomputed factorisations for repeated fits on one design.
#[derive(Debug, Clone)]
pub struct Fitter {
    pub kernel: DistributionKernel,
    pub partition: DesignPartition,
    pub opts: FitOptions,
    info_beta: f64,
    info_phi: f64,
    full: LeastSquares,
    full_colnorm2: DVector<f64>,
    nuisance: Option<(DMatrix<f64>, LeastSquares, DVector<f64>)>,
    offset: DVector<f64>,
}

impl Fitter {
    pub fn new(partition: DesignPartition, family: Family, opts: FitOptions) -> Result<Self> {
        let kern = kernel(family)?;
        let full = LeastSquares::new(&partition.x);
        let colnorm = |m: &DMatrix<f64>| DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.norm_squared()));
        let full_colnorm2 = colnorm(&partition.x);
        let nuisance = if partition.q < partition.p() {
            let x2 = partition.x2();
            let ls = LeastSquares::new(&x2);
            let cn = colnorm(&x2);
            Some((x2, ls, cn))
        } else {
            None
        };
        let offset = partition.x1() * &partition.beta10;
        Ok(Fitter {
            info_beta: kern.delta_20000(),
            info_phi: kern.delta_20002() - 1.0,
            kernel: kern,
            partition,
            opts,
            full,
            full_colnorm2,
            nuisance,
            offset,
        })
    }

    pub fn for_spec(spec: &ModelSpec, opts: FitOptions) -> Result<Self> {
        Fitter::new(spec.partition.clone(), spec.family, opts)
    }

    pub fn info_beta(&self) -> f64 {
        self.info_beta
    }

    pub fn info_phi(&self) -> f64 {
        self.info_phi
    }

    pub fn fit(&self, y: &DVector<f64>) -> Result<FitResult> {
        let x = &self.partition.x;
        let (beta, fr) = self.scoring(y, Some((x, &self.full, &self.full_colnorm2)))?;
        Ok(self.finish(y, beta, fr, false))
    }

    pub fn fit_restricted(&self, y: &DVector<f64>) -> Result<FitResult> {
        let work = y - &self.offset;
        let (beta2, fr) = match &self.nuisance {
            Some((x2, ls, cn)) => self.scoring(&work, Some((x2, ls, cn)))?,
            None => self.scoring(&work, None)?,
        };
        let q = self.partition.q;
        let mut beta = DVector::zeros(self.partition.p());
        beta.rows_mut(0, q).copy_from(&self.partition.beta10);
        beta.rows_mut(q, beta2.len()).copy_from(&beta2);
        Ok(self.finish(y, beta, fr, true))
    }

    fn finish(&self, y: &DVector<f64>, beta: DVector<f64>, fr: ScoringRun, restricted: bool) -> FitResult {
        let residuals = y - &self.partition.x * &beta;
        let standardized = &residuals / fr.phi;
        let weights = standardized.map(|z| self.kernel.weight(z));
        FitResult {
            beta,
            phi: fr.phi,
            loglik: fr.loglik,
            weights,
            residuals,
            standardized,
            iterations: fr.iterations,
            converged: fr.converged,
            degenerate: fr.degenerate,
            restricted,
            trace: fr.trace,
            score_norm: fr.score_norm,
        }
    }

    fn loglik_at(&self, e: &DVector<f64>, phi: f64) -> f64 {
        let n = e.len() as f64;
        -n * phi.ln() + e.iter().map(|v| self.kernel.g(v / phi)).sum::<f64>()
    }

    /// Fisher scoring on (β, log φ) for `y = Aβ + φε`; `a` may be absent
    /// (φ only).
    fn scoring(
        &self,
        y: &DVector<f64>,
        a: Option<(&DMatrix<f64>, &LeastSquares, &DVector<f64>)>,
    ) -> Result<(DVector<f64>, ScoringRun)> {
        let n = y.len();
        let nf = n as f64;
        let k = a.map_or(0, |(m, _, _)| m.ncols());
        let mut beta = match a {
            Some((_, ls, _)) => ls.solve(y),
            None => DVector::zeros(0),
        };
        let resid = |b: &DVector<f64>| -> DVector<f64> {
            match a {
                Some((m, _, _)) => y - m * b,
                None => y.clone(),
            }
        };
        let mut e = resid(&beta);
        let phi0 = (e.norm_squared() / nf).sqrt();
        let scale = (y.norm_squared() / nf).sqrt();
        if !(phi0 > 1e-10 * scale) || phi0 < PHI_FLOOR {
            let loglik = self.loglik_at(&e, PHI_FLOOR);
            return Ok((
                beta,
                ScoringRun {
                    phi: PHI_FLOOR,
                    loglik,
                    iterations: 0,
                    converged: true,
                    degenerate: true,
                    trace: vec![loglik],
                    score_norm: 0.0,
                },
            ));
        }
        let mut phi = phi0;
        let mut ll = self.loglik_at(&e, phi);
        if !ll.is_finite() {
            return Err(Error::NonConvergence {
                iterations: 0,
                loglik: ll,
            });
        }
        let mut trace = vec![ll];
        let mut psi = DVector::zeros(n);

        // Score pieces at the current point; returns the Fisher-metric norm.
        let score = |e: &DVector<f64>, phi: f64, psi: &mut DVector<f64>| -> (f64, f64) {
            let mut sum_psi_z = 0.0;
            for i in 0..n {
                let z = e[i] / phi;
                let p = -self.kernel.g1(z);
                psi[i] = p;
                sum_psi_z += p * z;
            }
            let mut norm = ((sum_psi_z - nf) / (nf * self.info_phi).sqrt()).abs();
            if let Some((m, _, cn)) = a {
                let u = m.tr_mul(psi);
                for j in 0..k {
                    norm = norm.max(u[j].abs() / (self.info_beta * cn[j]).sqrt());
                }
            }
            (sum_psi_z, norm)
        };

        let (mut sum_psi_z, mut gnorm) = score(&e, phi, &mut psi);
        let mut iterations = 0;
        let mut converged = gnorm <= self.opts.tol_grad;
        while !converged && iterations < self.opts.max_iter {
            iterations += 1;
            let dbeta = match a {
                Some((_, ls, _)) => ls.solve(&psi) * (phi / self.info_beta),
                None => DVector::zeros(0),
            };
            let dtau = (sum_psi_z / nf - 1.0) / self.info_phi;
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..=self.opts.max_halvings {
                let b_new = &beta + &dbeta * step;
                let phi_new = phi * (dtau * step).exp();
                let e_new = resid(&b_new);
                let ll_new = self.loglik_at(&e_new, phi_new);
                if ll_new.is_finite() && ll_new >= ll - 1e-12 * ll.abs().max(1.0) {
                    accepted = Some((b_new, phi_new, e_new, ll_new));
                    break;
                }
                step *= 0.5;
            }
            let Some((b_new, phi_new, e_new, ll_new)) = accepted else {
                return Err(Error::NonConvergence {
                    iterations,
                    loglik: ll,
                });
            };
            let dll = (ll_new - ll).abs();
            beta = b_new;
            phi = phi_new;
            e = e_new;
            ll = ll_new;
            trace.push(ll);
            let s = score(&e, phi, &mut psi);
            sum_psi_z = s.0;
            gnorm = s.1;
            converged = gnorm <= self.opts.tol_grad && dll <= self.opts.tol_loglik * ll.abs().max(1.0);
        }
        Ok((
            beta,
            ScoringRun {
                phi,
                loglik: ll,
                iterations,
                converged,
                degenerate: false,
                trace,
                score_norm: gnorm,
            },
        ))
    }

    /// Asymptotic standard errors from the block-diagonal Fisher information:
    /// (β in internal order, φ).
    pub fn standard_errors(&self, fit: &FitResult) -> (DVector<f64>, f64) {
        let n = self.partition.n() as f64;
        let diag = self.full.inverse_gram_diag();
        let se_beta = diag.map(|d| fit.phi * (d / self.info_beta).sqrt());
        let se_phi = fit.phi / (n * self.info_phi).sqrt();
        (se_beta, se_phi)
    }
}

#[derive(Debug, Clone)]
struct ScoringRun {
    phi: f64,
    loglik: f64,
    iterations: usize,
    converged: bool,
    degenerate: bool,
    trace: Vec<f64>,
    score_norm: f64,
}

/// ℓ(β, φ) = −n log φ + Σ g(z_l) on the symmetric scale, β in internal order.
pub fn loglik(spec: &ModelSpec, beta: &DVector<f64>, phi: f64) -> Result<f64> {
    if !(phi > 0.0) {
        return Err(Error::Domain(format!("scale must be positive, got {phi}")));
    }
    let k = kernel(spec.family)?;
    let e = &spec.y - &spec.partition.x * beta;
    let n = e.len() as f64;
    Ok(-n * phi.ln() + e.iter().map(|v| k.g(v / phi)).sum::<f64>())
}

pub fn fit(spec: &ModelSpec) -> Result<FitResult> {
    Fitter::for_spec(spec, FitOptions::default())?.fit(&spec.y)
}

pub fn fit_restricted(spec: &ModelSpec) -> Result<FitResult> {
    Fitter::for_spec(spec, FitOptions::default())?.fit_restricted(&spec.y)
}

/// Fit of a log-symmetric model: the symmetric fit on log t plus the fitted
/// medians exp(x'β̂).
#[derive(Debug, Clone)]
pub struct LogSymmetricFit {
    pub fit: FitResult,
    pub median: DVector<f64>,
    /// Log-likelihood on the original t scale (includes the Jacobian).
    pub loglik_t: f64,
}

pub fn fit_log_symmetric(t: &[f64], partition: DesignPartition, family: Family) -> Result<LogSymmetricFit> {
    let spec = ModelSpec::log_symmetric(t, partition, family)?;
    let f = fit(&spec)?;
    let median = (&spec.partition.x * &f.beta).map(f64::exp);
    Ok(LogSymmetricFit {
        loglik_t: f.loglik + spec.log_jacobian(),
        fit: f,
        median,
    })
}

/// Corrected Akaike information criterion, −2ℓ + 2k + 2k(k+1)/(n−k−1).
pub fn aicc(loglik: f64, n: usize, n_params: usize) -> Result<f64> {
    if n <= n_params + 1 {
        return Err(Error::Domain(format!(
            "AICc needs n > k + 1 (n = {n}, k = {n_params})"
        )));
    }
    let k = n_params as f64;
    Ok(-2.0 * loglik + 2.0 * k + 2.0 * k * (k + 1.0) / (n as f64 - k - 1.0))
}
