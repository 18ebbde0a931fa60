use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A symmetric error law with its shape parameter held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Family {
    Normal,
    Cauchy,
    StudentT { nu: f64 },
    LogisticI,
    LogisticII,
    PowerExp { k: f64 },
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::StudentT { nu } if !(nu.is_finite() && nu > 0.0) => Err(Error::Domain(
                format!("student-t degrees of freedom must be positive and finite, got {nu}"),
            )),
            Family::PowerExp { k } if !(k > -1.0 && k <= 1.0) => Err(Error::Domain(format!(
                "power exponential shape must lie in (-1, 1], got {k}"
            ))),
            _ => Ok(()),
        }
    }

    /// Student-t degrees of freedom when the family belongs to the t class.
    pub fn t_dof(&self) -> Option<f64> {
        match *self {
            Family::Cauchy => Some(1.0),
            Family::StudentT { nu } => Some(nu),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Normal => write!(f, "normal"),
            Family::Cauchy => write!(f, "cauchy"),
            Family::StudentT { nu } => write!(f, "student-t:{nu}"),
            Family::LogisticI => write!(f, "logistic1"),
            Family::LogisticII => write!(f, "logistic2"),
            Family::PowerExp { k } => write!(f, "pexp:{k}"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.as_str(), None),
        };
        let number = |what: &str| -> Result<f64> {
            let a = arg.ok_or_else(|| Error::Domain(format!("{name} requires :{what}")))?;
            a.parse::<f64>()
                .map_err(|_| Error::Domain(format!("cannot parse {what} from '{a}'")))
        };
        let fam = match name {
            "normal" | "gaussian" => Family::Normal,
            "cauchy" => Family::Cauchy,
            "student-t" | "t" | "student" => Family::StudentT { nu: number("nu")? },
            "logistic1" | "logistic-i" => Family::LogisticI,
            "logistic2" | "logistic-ii" | "logistic" => Family::LogisticII,
            "pexp" | "power-exp" => Family::PowerExp { k: number("k")? },
            _ => {
                return Err(Error::Domain(format!(
                    "unknown family '{s}' (expected normal, cauchy, student-t:NU, logistic1, logistic2, pexp:K)"
                )))
            }
        };
        if arg.is_some() && matches!(fam, Family::Normal | Family::Cauchy | Family::LogisticI | Family::LogisticII) {
            return Err(Error::Domain(format!("family '{name}' takes no parameter")));
        }
        fam.validate()?;
        Ok(fam)
    }
}

impl TryFrom<String> for Family {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Family> for String {
    fn from(f: Family) -> String {
        f.to_string()
    }
}
