use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

use statrs::function::gamma::{gamma, ln_gamma};

use super::Family;
use crate::error::Result;
use crate::quadrature::{integrate, integrate_real_line, Tolerance};

/// Starting value for the type I logistic normalising constant; refined by
/// quadrature on first use.
const LOGISTIC_I_C_SEED: f64 = 1.484300029;
const LOGISTIC_I_XI: f64 = 0.795_699_795_628_185_1;
const LOGISTIC_I_D20000: f64 = 1.477_242_341_094_652_6;
const LOGISTIC_I_D20002: f64 = 4.012_989_573_513_003_5;

fn logistic_i_log_c() -> f64 {
    static LOG_C: OnceLock<f64> = OnceLock::new();
    *LOG_C.get_or_init(|| {
        let f = |z: f64| {
            let v = (-z * z).exp();
            LOGISTIC_I_C_SEED * v / ((1.0 + v) * (1.0 + v))
        };
        let tol = Tolerance {
            abs: 1e-15,
            rel: 1e-13,
        };
        let mass = integrate_real_line(f, tol)
            .expect("type I logistic normalisation integral is smooth")
            .value;
        (LOGISTIC_I_C_SEED / mass).ln()
    })
}

/// Type I logistic normalising constant c, with ∫ c e^{-z²}/(1+e^{-z²})² dz = 1.
pub fn logistic_i_constant() -> f64 {
    logistic_i_log_c().exp()
}

/// Closed-form pieces of one symmetric law: density generator, g = log h(z²)
/// and its first four derivatives, and the estimation weight.
#[derive(Debug, Clone, Copy)]
pub struct DistributionKernel {
    pub family: Family,
    log_norm: f64,
}

pub fn kernel(family: Family) -> Result<DistributionKernel> {
    DistributionKernel::new(family)
}

impl DistributionKernel {
    pub fn new(family: Family) -> Result<Self> {
        family.validate()?;
        let log_norm = match family {
            Family::Normal => -0.5 * (2.0 * PI).ln(),
            Family::Cauchy => -PI.ln(),
            Family::StudentT { nu } => {
                0.5 * nu * nu.ln() - (ln_gamma(0.5) + ln_gamma(0.5 * nu) - ln_gamma(0.5 * (nu + 1.0)))
            }
            Family::LogisticI => logistic_i_log_c(),
            Family::LogisticII => 0.0,
            Family::PowerExp { k } => {
                let a = 0.5 * (1.0 + k);
                -(ln_gamma(1.0 + a) + (1.0 + a) * LN_2)
            }
        };
        Ok(DistributionKernel { family, log_norm })
    }

    /// Exponent s of the power exponential: log h(z²) = -|z|^s / 2 + const.
    fn pe_power(k: f64) -> f64 {
        2.0 / (1.0 + k)
    }

    /// Density generator h(u), u ≥ 0.
    pub fn h(&self, u: f64) -> f64 {
        self.log_h(u).exp()
    }

    pub fn log_h(&self, u: f64) -> f64 {
        let core = match self.family {
            Family::Normal => -0.5 * u,
            Family::Cauchy => -(u).ln_1p(),
            Family::StudentT { nu } => -0.5 * (nu + 1.0) * (nu + u).ln(),
            Family::LogisticI => -u - 2.0 * (-u).exp().ln_1p(),
            Family::LogisticII => {
                let r = u.sqrt();
                -r - 2.0 * (-r).exp().ln_1p()
            }
            Family::PowerExp { k } => -0.5 * u.powf(1.0 / (1.0 + k)),
        };
        self.log_norm + core
    }

    /// g(z) = log h(z²).
    pub fn g(&self, z: f64) -> f64 {
        self.log_h(z * z)
    }

    /// Standard density π(z) = h(z²).
    pub fn density(&self, z: f64) -> f64 {
        self.h(z * z)
    }

    /// First derivative of g; the scoring equations only need this one.
    pub fn g1(&self, z: f64) -> f64 {
        match self.family {
            Family::Normal => -z,
            Family::Cauchy => -2.0 * z / (1.0 + z * z),
            Family::StudentT { nu } => -(nu + 1.0) * z / (nu + z * z),
            Family::LogisticI => -2.0 * z * (0.5 * z * z).tanh(),
            Family::LogisticII => -(0.5 * z).tanh(),
            Family::PowerExp { k } => {
                let s = Self::pe_power(k);
                if z == 0.0 {
                    return 0.0;
                }
                -0.5 * s * z.abs().powf(s - 1.0) * z.signum()
            }
        }
    }

    /// [g', g'', g''', g''''] at z.
    pub fn derivs(&self, z: f64) -> [f64; 4] {
        match self.family {
            Family::Normal => [-z, -1.0, 0.0, 0.0],
            Family::Cauchy => t_derivs(1.0, z),
            Family::StudentT { nu } => t_derivs(nu, z),
            Family::LogisticI => {
                // G(u) = log h(u); chain rule through u = z².
                let [d1, d2, d3, d4] = logistic_log_derivs(z * z);
                let z2 = z * z;
                [
                    2.0 * z * d1,
                    2.0 * d1 + 4.0 * z2 * d2,
                    12.0 * z * d2 + 8.0 * z * z2 * d3,
                    12.0 * d2 + 48.0 * z2 * d3 + 16.0 * z2 * z2 * d4,
                ]
            }
            Family::LogisticII => logistic_log_derivs(z),
            Family::PowerExp { k } => {
                let s = Self::pe_power(k);
                let a = z.abs();
                let sg = z.signum();
                let c1 = -0.5 * s;
                let c2 = c1 * (s - 1.0);
                let c3 = c2 * (s - 2.0);
                let c4 = c3 * (s - 3.0);
                [
                    c1 * a.powf(s - 1.0) * sg,
                    c2 * a.powf(s - 2.0),
                    c3 * a.powf(s - 3.0) * sg,
                    c4 * a.powf(s - 4.0),
                ]
            }
        }
    }

    /// Estimation weight w(z) = -2 d log h(u)/du at u = z².
    pub fn weight(&self, z: f64) -> f64 {
        match self.family {
            Family::Normal => 1.0,
            Family::Cauchy => 2.0 / (1.0 + z * z),
            Family::StudentT { nu } => (nu + 1.0) / (nu + z * z),
            Family::LogisticI => 2.0 * (0.5 * z * z).tanh(),
            Family::LogisticII => {
                let a = z.abs();
                if a < 1e-4 {
                    0.5 - a * a / 24.0
                } else {
                    (0.5 * a).tanh() / a
                }
            }
            Family::PowerExp { k } => {
                let s = Self::pe_power(k);
                z.abs().powf(s - 2.0) / (1.0 + k)
            }
        }
    }

    /// Variance of the standard law, when it exists.
    pub fn xi(&self) -> Option<f64> {
        match self.family {
            Family::Normal => Some(1.0),
            Family::Cauchy => None,
            Family::StudentT { nu } => (nu > 2.0).then(|| nu / (nu - 2.0)),
            Family::LogisticI => Some(LOGISTIC_I_XI),
            Family::LogisticII => Some(PI * PI / 3.0),
            Family::PowerExp { k } => {
                Some(2f64.powf(1.0 + k) * gamma(1.5 * (1.0 + k)) / gamma(0.5 * (1.0 + k)))
            }
        }
    }

    /// E[g'(z)²]; the β block of Fisher information per unit φ⁻²XᵀX.
    pub fn delta_20000(&self) -> f64 {
        match self.family {
            Family::Normal => 1.0,
            Family::Cauchy => 0.5,
            Family::StudentT { nu } => (nu + 1.0) / (nu + 3.0),
            Family::LogisticI => LOGISTIC_I_D20000,
            Family::LogisticII => 1.0 / 3.0,
            Family::PowerExp { k } => {
                2f64.powf(1.0 - k) * gamma(0.5 * (3.0 - k))
                    / ((1.0 + k) * (1.0 + k) * gamma(0.5 * (1.0 + k)))
            }
        }
    }

    /// E[g'(z)² z²]; the φ information is n φ⁻² (δ20002 − 1).
    pub fn delta_20002(&self) -> f64 {
        match self.family {
            Family::Normal => 3.0,
            Family::Cauchy => 1.5,
            Family::StudentT { nu } => 3.0 * (nu + 1.0) / (nu + 3.0),
            Family::LogisticI => LOGISTIC_I_D20002,
            Family::LogisticII => 4.0 / 3.0 + PI * PI / 9.0,
            Family::PowerExp { k } => (3.0 + k) / (1.0 + k),
        }
    }

    /// Distribution function by quadrature of the density from 0.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.5);
        }
        if x.is_infinite() {
            return Ok(if x > 0.0 { 1.0 } else { 0.0 });
        }
        let tol = Tolerance {
            abs: 1e-12,
            rel: 1e-12,
        };
        let half = integrate(|z| self.density(z), 0.0, x.abs(), tol)?.value;
        Ok(0.5 + half.copysign(x))
    }
}

fn t_derivs(nu: f64, z: f64) -> [f64; 4] {
    // Written through w = z²/(ν+z²) so nothing overflows for huge |z|.
    let a = nu + 1.0;
    let d = nu + z * z;
    let w = z * z / d;
    let zd = z / d;
    [
        -a * zd,
        -a * (1.0 - 2.0 * w) / d,
        2.0 * a * zd * (3.0 - 4.0 * w) / d,
        6.0 * a * (w * w - 6.0 * w * (1.0 - w) + (1.0 - w) * (1.0 - w)) / (d * d),
    ]
}

/// Derivatives of x ↦ -x - 2 log(1 + e^{-x}), the log logistic density.
fn logistic_log_derivs(x: f64) -> [f64; 4] {
    let t = (0.5 * x).tanh();
    let s2 = 1.0 - t * t;
    [-t, -0.5 * s2, 0.5 * s2 * t, 0.25 * s2 * (s2 - 2.0 * t * t)]
}
