//! The expectations δ_abcde = E[g'ᵃ g''ᵇ g'''ᶜ g''''ᵈ zᵉ] that feed every
//! correction term.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{kernel, Family};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_half_line, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaConstants {
    pub d20000: f64,
    pub d20002: f64,
    pub d01000: f64,
    pub d01002: f64,
    pub d00010: f64,
    pub d00101: f64,
    pub d00103: f64,
    pub d00012: f64,
    pub d11001: f64,
    pub d11003: f64,
    pub d21000: f64,
    pub d10100: f64,
    pub d40000: f64,
    pub d30001: f64,
    pub d40002: f64,
    pub d21002: f64,
}

/// Index tuples (a, b, c, d, e) in field order.
pub const DELTA_INDICES: [[u32; 5]; 16] = [
    [2, 0, 0, 0, 0],
    [2, 0, 0, 0, 2],
    [0, 1, 0, 0, 0],
    [0, 1, 0, 0, 2],
    [0, 0, 0, 1, 0],
    [0, 0, 1, 0, 1],
    [0, 0, 1, 0, 3],
    [0, 0, 0, 1, 2],
    [1, 1, 0, 0, 1],
    [1, 1, 0, 0, 3],
    [2, 1, 0, 0, 0],
    [1, 0, 1, 0, 0],
    [4, 0, 0, 0, 0],
    [3, 0, 0, 0, 1],
    [4, 0, 0, 0, 2],
    [2, 1, 0, 0, 2],
];

impl DeltaConstants {
    pub fn from_array(v: [f64; 16]) -> Self {
        DeltaConstants {
            d20000: v[0],
            d20002: v[1],
            d01000: v[2],
            d01002: v[3],
            d00010: v[4],
            d00101: v[5],
            d00103: v[6],
            d00012: v[7],
            d11001: v[8],
            d11003: v[9],
            d21000: v[10],
            d10100: v[11],
            d40000: v[12],
            d30001: v[13],
            d40002: v[14],
            d21002: v[15],
        }
    }

    pub fn to_array(&self) -> [f64; 16] {
        [
            self.d20000,
            self.d20002,
            self.d01000,
            self.d01002,
            self.d00010,
            self.d00101,
            self.d00103,
            self.d00012,
            self.d11001,
            self.d11003,
            self.d21000,
            self.d10100,
            self.d40000,
            self.d30001,
            self.d40002,
            self.d21002,
        ]
    }

    pub fn get(&self, idx: [u32; 5]) -> Option<f64> {
        DELTA_INDICES
            .iter()
            .position(|&i| i == idx)
            .map(|p| self.to_array()[p])
    }

    /// Largest violation among the regularity relations that involve only
    /// the stored δ's.
    pub fn regularity_residual(&self) -> f64 {
        [
            self.d20000 + self.d01000,
            self.d00010 + self.d10100,
            self.d40000 + 3.0 * self.d21000,
            self.d01002 - 2.0 + self.d20002,
            self.d11001 + self.d00101 + self.d01000,
            3.0 * self.d01002 + self.d11003 + self.d00103,
        ]
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()))
    }
}

/// δ's from closed forms (normal, t, type II logistic, power exponential) or
/// from a high-precision table (type I logistic).
pub fn delta_constants(family: Family) -> Result<DeltaConstants> {
    family.validate()?;
    if let Some(nu) = family.t_dof() {
        return Ok(t_deltas(nu));
    }
    Ok(match family {
        Family::Normal => DeltaConstants::from_array([
            1.0, 3.0, -1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 3.0, -1.0, 0.0, 3.0, -3.0, 15.0, -3.0,
        ]),
        Family::LogisticI => DeltaConstants::from_array(LOGISTIC_I_TABLE),
        Family::LogisticII => {
            let p2 = PI * PI;
            DeltaConstants::from_array([
                1.0 / 3.0,
                4.0 / 3.0 + p2 / 9.0,
                -1.0 / 3.0,
                2.0 / 3.0 - p2 / 9.0,
                1.0 / 15.0,
                1.0 / 6.0,
                p2 / 6.0 - 1.0,
                p2 / 45.0 - 1.0 / 3.0,
                1.0 / 6.0,
                p2 / 6.0 - 1.0,
                -1.0 / 15.0,
                -1.0 / 15.0,
                0.2,
                -2.0 / 3.0,
                4.0 / 3.0 + p2 / 15.0,
                -p2 / 45.0,
            ])
        }
        Family::PowerExp { k } => pe_deltas(k)?,
        Family::Cauchy | Family::StudentT { .. } => unreachable!(),
    })
}

/// Type I logistic δ's, computed once at 30 significant digits.
const LOGISTIC_I_TABLE: [f64; 16] = [
    1.477_242_341_094_652_647,
    4.012_989_573_513_003_504,
    -1.477_242_341_094_652_647,
    -2.012_989_573_513_003_504,
    -0.666_924_863_813_783_179_0,
    -1.279_167_631_063_565_959,
    -0.506_494_786_756_501_752_0,
    2.659_319_825_347_417_336,
    2.756_409_972_158_218_606,
    6.545_463_507_295_512_264,
    -4.153_806_537_644_097_922,
    0.666_924_863_813_783_179_0,
    12.461_419_612_932_293_77,
    -6.990_062_285_411_089_859,
    46.765_773_796_288_399_18,
    -10.928_549_741_822_073_15,
];

/// Student-t δ's through w = z²/(ν + z²) ~ Beta(1/2, ν/2): every integrand is
/// a polynomial in w.
fn t_deltas(nu: f64) -> DeltaConstants {
    let mom = |m: usize| -> f64 { (0..m).map(|i| (0.5 + i as f64) / (0.5 * (nu + 1.0) + i as f64)).product() };
    let e = |coef: &[f64]| -> f64 { coef.iter().enumerate().map(|(m, c)| c * mom(m)).sum() };
    let a = nu + 1.0;
    let (a2, a3, a4) = (a * a, a * a * a, a * a * a * a);
    DeltaConstants {
        d20000: a2 / nu * e(&[0.0, 1.0, -1.0]),
        d20002: a2 * e(&[0.0, 0.0, 1.0]),
        d01000: -a / nu * e(&[1.0, -3.0, 2.0]),
        d01002: -a * e(&[0.0, 1.0, -2.0]),
        d00010: 6.0 * a / (nu * nu) * e(&[1.0, -10.0, 25.0, -24.0, 8.0]),
        d00101: 2.0 * a / nu * e(&[0.0, 3.0, -7.0, 4.0]),
        d00103: 2.0 * a * e(&[0.0, 0.0, 3.0, -4.0]),
        d00012: 6.0 * a / nu * e(&[0.0, 1.0, -9.0, 16.0, -8.0]),
        d11001: a2 / nu * e(&[0.0, 1.0, -3.0, 2.0]),
        d11003: a2 * e(&[0.0, 0.0, 1.0, -2.0]),
        d21000: -a3 / (nu * nu) * e(&[0.0, 1.0, -4.0, 5.0, -2.0]),
        d10100: -2.0 * a2 / (nu * nu) * e(&[0.0, 3.0, -10.0, 11.0, -4.0]),
        d40000: a4 / (nu * nu) * e(&[0.0, 0.0, 1.0, -2.0, 1.0]),
        d30001: -a3 / nu * e(&[0.0, 0.0, 1.0, -1.0]),
        d40002: a4 / nu * e(&[0.0, 0.0, 0.0, 1.0, -1.0]),
        d21002: -a3 / nu * e(&[0.0, 0.0, 1.0, -3.0, 2.0]),
    }
}

/// Power exponential δ's. With s = 2/(1+k) every derivative is a signed
/// power of |z|, so each δ reduces to E|z|^r = 2^{r/s} Γ((r+1)/s) / Γ(1/s).
fn pe_deltas(k: f64) -> Result<DeltaConstants> {
    if k >= 1.0 / 3.0 {
        return Err(Error::UnsupportedCorrection {
            family: Family::PowerExp { k }.to_string(),
            reason: "third-derivative moments diverge for k >= 1/3".into(),
        });
    }
    let mut v = [0.0; 16];
    for (slot, idx) in v.iter_mut().zip(DELTA_INDICES.iter()) {
        *slot = if *idx == [0, 0, 0, 1, 0] {
            // E[g''''] diverges for k > -1/3; use the regularity relation.
            -pe_moment(k, [1, 0, 1, 0, 0])?
        } else {
            pe_moment(k, *idx)?
        };
    }
    Ok(DeltaConstants::from_array(v))
}

fn pe_moment(k: f64, [a, b, c, d, e]: [u32; 5]) -> Result<f64> {
    if (a + c + e) % 2 == 1 {
        return Ok(0.0);
    }
    let s = 2.0 / (1.0 + k);
    let k1 = -0.5 * s;
    let k2 = k1 * (s - 1.0);
    let k3 = k2 * (s - 2.0);
    let k4 = k3 * (s - 3.0);
    let coef = k1.powi(a as i32) * k2.powi(b as i32) * k3.powi(c as i32) * k4.powi(d as i32);
    if coef == 0.0 {
        return Ok(0.0);
    }
    let r = (a + b + c + d) as f64 * s - (a + 2 * b + 3 * c + 4 * d) as f64 + e as f64;
    if r <= -1.0 {
        return Err(Error::UnsupportedCorrection {
            family: Family::PowerExp { k }.to_string(),
            reason: format!("δ_{a}{b}{c}{d}{e} diverges (moment order {r:.3})"),
        });
    }
    let log_abs = (r / s) * std::f64::consts::LN_2 + ln_gamma((r + 1.0) / s) - ln_gamma(1.0 / s);
    Ok(coef * log_abs.exp())
}

/// Numerical δ_abcde by adaptive quadrature of the analytic derivatives
/// against the density. Divergent moments are reported as quadrature errors.
pub fn delta_oracle(family: Family, a: u32, b: u32, c: u32, d: u32, e: u32) -> Result<f64> {
    let k = kernel(family)?;
    if (a + c + e) % 2 == 1 {
        return Ok(0.0);
    }
    // Products are accumulated in log space: individual factors can
    // overflow where the full integrand is tiny.
    let powers = [a, b, c, d];
    let integrand = |z: f64| {
        let log_dens = k.g(z);
        // Below this the density itself underflows; derivative factors may
        // not be representable out there either.
        if log_dens < -800.0 {
            return 0.0;
        }
        let g = k.derivs(z);
        let mut log_mag = log_dens + e as f64 * z.abs().ln();
        let mut negative = z < 0.0 && e % 2 == 1;
        for (gi, &pw) in g.iter().zip(powers.iter()) {
            if pw == 0 {
                continue;
            }
            if *gi == 0.0 {
                return 0.0;
            }
            log_mag += pw as f64 * gi.abs().ln();
            if *gi < 0.0 && pw % 2 == 1 {
                negative = !negative;
            }
        }
        let v = 2.0 * log_mag.exp();
        if negative {
            -v
        } else {
            v
        }
    };
    let tol = Tolerance {
        abs: 1e-11,
        rel: 1e-11,
    };
    Ok(integrate_half_line(integrand, tol)?.value)
}

/// The full δ set recomputed by quadrature, independent of the closed forms.
pub fn oracle_deltas(family: Family) -> Result<DeltaConstants> {
    let mut v = [0.0; 16];
    for (slot, &[a, b, c, d, e]) in v.iter_mut().zip(DELTA_INDICES.iter()) {
        *slot = match (family, [a, b, c, d, e]) {
            (Family::PowerExp { .. }, [0, 0, 0, 1, 0]) => -delta_oracle(family, 1, 0, 1, 0, 0)?,
            _ => delta_oracle(family, a, b, c, d, e)?,
        };
    }
    Ok(DeltaConstants::from_array(v))
}
