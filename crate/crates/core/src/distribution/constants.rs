use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::{delta_constants, DeltaConstants, Family};
use crate::error::{Error, Result};

/// The d (likelihood ratio), b (score) and c (gradient) constants together
/// with the intermediate m's they are built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionConstants {
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

/// The m's as functions of the δ's.
pub fn m_terms(d: &DeltaConstants) -> Result<[f64; 4]> {
    if !(d.d20000 > 0.0) || !(d.d20002 > 1.0) {
        return Err(Error::Domain(format!(
            "Fisher information not positive (δ20000 = {}, δ20002 = {})",
            d.d20000, d.d20002
        )));
    }
    let m1 = d.d01002 - 1.0;
    if m1.abs() < 1e-12 {
        return Err(Error::Domain("δ01002 − 1 vanishes".into()));
    }
    let m2 = 4.0 - d.d00103 - 6.0 * d.d01002;
    let m3 = (d.d00101 + 2.0 * d.d01000) / d.d20000;
    let m4 = (d.d00012 - 6.0 * d.d11001) / d.d20000;
    Ok([m1, m2, m3, m4])
}

impl CorrectionConstants {
    /// Builds every constant from a δ set through the general definitions.
    pub fn from_deltas(d: &DeltaConstants) -> Result<Self> {
        let [m1, m2, m3, m4] = m_terms(d)?;
        let i2 = d.d20000 * d.d20000;
        let phi_info = d.d20002 - 1.0;
        let d0 = d.d00010 / (4.0 * i2);
        let d1 = -m2 * m3 / (2.0 * m1 * m1) - (2.0 * m3 + m3 * m3 + m4) / (2.0 * m1);
        let d2 = -m3 * m3 / (2.0 * m1);
        let b0 = d.d21000 / i2 + 1.0;
        let b1 = d.d11001 * (d.d11001 - d.d01000) / (i2 * phi_info);
        let b3 = d.d11001 * d.d11001 / (i2 * phi_info);
        let b2 = (2.0 * d.d11001 * (2.0 * d.d01002 + d.d00103)
            + phi_info * (4.0 * d.d30001 + d.d40002 + d.d21002 - 2.0 * d.d01000))
            / (d.d20000 * phi_info * phi_info);
        let c0 = d.d00010 / i2;
        let c1 = -m3 * m3 / m1;
        let c2 = -(m2 * m3 + 2.0 * m1 * m3) / (m1 * m1) - m4 / m1;
        Ok(CorrectionConstants {
            d0,
            d1,
            d2,
            b0,
            b1,
            b2,
            b3,
            c0,
            c1,
            c2,
            m1,
            m2,
            m3,
            m4,
        })
    }

    pub fn to_array(&self) -> [f64; 10] {
        [
            self.d0, self.d1, self.d2, self.b0, self.b1, self.b2, self.b3, self.c0, self.c1, self.c2,
        ]
    }
}

/// Published-form constants per family. The normal, Student-t and power
/// exponential sets are closed forms in the shape parameter; the logistic
/// sets go through the tabulated/closed-form δ's.
pub fn correction_constants(family: Family) -> Result<CorrectionConstants> {
    family.validate()?;
    let deltas = delta_constants(family)?;
    let [m1, m2, m3, m4] = m_terms(&deltas)?;
    let with_m = |d0, d1, d2, b0, b1, b2, b3, c0, c1, c2| CorrectionConstants {
        d0,
        d1,
        d2,
        b0,
        b1,
        b2,
        b3,
        c0,
        c1,
        c2,
        m1,
        m2,
        m3,
        m4,
    };
    if let Some(nu) = family.t_dof() {
        let v = nu;
        let d0 = 3.0 * (v + 2.0) * (v + 3.0).powi(2) / (2.0 * v * (v + 1.0) * (v + 5.0) * (v + 7.0));
        let d1 = (v + 3.0) * (v.powi(3) + 11.0 * v * v + 20.0 * v + 4.0) / (v * (v + 7.0) * (v + 5.0).powi(2));
        let d2 = (v + 3.0) * (v + 2.0).powi(2) / (v * (v + 5.0).powi(2));
        let b0 = 6.0 * (v * v + 4.0 * v - 1.0) / (v * (v + 5.0) * (v + 7.0));
        let b1 = (v - 1.0) * (v + 2.0) * (v + 3.0) / (v * (v + 5.0).powi(2));
        let b2 = -12.0 * (v * v + 3.0 * v + 2.0) * (v + 3.0) / (v * (v + 7.0) * (v + 5.0).powi(2));
        let b3 = (v - 1.0).powi(2) * (v + 3.0) / (2.0 * v * (v + 5.0).powi(2));
        let c0 = 6.0 * (v + 2.0) * (v + 3.0).powi(2) / (v * (v + 1.0) * (v + 5.0) * (v + 7.0));
        // (ν+5) enters squared, as in d2; c1 = 2 d2.
        let c1 = 2.0 * (v + 2.0).powi(2) * (v + 3.0) / (v * (v + 5.0).powi(2));
        let c2 = -24.0 * (v + 2.0) * (v + 3.0) / (v * (v + 7.0) * (v + 5.0).powi(2));
        return Ok(with_m(d0, d1, d2, b0, b1, b2, b3, c0, c1, c2));
    }
    match family {
        Family::Normal => Ok(with_m(0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.5, 0.0, 2.0, 0.0)),
        Family::PowerExp { k } => {
            // delta_constants already rejected k ≥ 1/3.
            let g_a = gamma(0.5 * (1.0 - 3.0 * k));
            let g_b = gamma(0.5 * (1.0 + k));
            let g_c = gamma(0.5 * (3.0 - k));
            let g_d = gamma(0.5 * (3.0 - 3.0 * k));
            let d0 = k * (1.0 - k) * g_a * g_b / (8.0 * g_c * g_c);
            let d12 = 1.0 / (1.0 + k);
            let b0 = 1.0 - (1.0 - k) * g_d * g_b / (2.0 * g_c * g_c);
            let b1 = (1.0 - k) / (1.0 + k);
            let b2 = -2.0 * k * (1.0 - k) / (1.0 + k);
            let b3 = (1.0 - k).powi(2) / (2.0 * (1.0 + k));
            let c0 = 4.0 * d0;
            let c1 = 2.0 / (1.0 + k);
            Ok(with_m(d0, d12, d12, b0, b1, b2, b3, c0, c1, 0.0))
        }
        _ => CorrectionConstants::from_deltas(&deltas),
    }
}
