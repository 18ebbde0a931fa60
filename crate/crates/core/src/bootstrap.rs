//! Parametric bootstrap of the four uncorrected statistics under the
//! restricted (null) fit.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::FitResult;
use crate::inference::{RawStatistics, TestContext};
use crate::rng;

pub const STATISTIC_NAMES: [&str; 4] = ["wald", "lr", "score", "gradient"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub statistic: String,
    pub observed: f64,
    /// Successful replicate values in replicate-index order.
    pub replicates: Vec<f64>,
    pub pvalue: f64,
    pub b: usize,
    pub seed: u64,
}

impl BootstrapResult {
    fn new(statistic: &str, observed: f64, replicates: Vec<f64>, b: usize, seed: u64) -> Self {
        let exceed = replicates.iter().filter(|&&r| r >= observed).count();
        let pvalue = (1 + exceed) as f64 / (replicates.len() + 1) as f64;
        BootstrapResult {
            statistic: statistic.to_string(),
            observed,
            replicates,
            pvalue,
            b,
            seed,
        }
    }

    /// The ⌈(1−α)(B+1)⌉-th smallest replicate (+∞ if that exceeds B).
    pub fn critical_value(&self, alpha: f64) -> f64 {
        let mut v = self.replicates.clone();
        v.sort_by(f64::total_cmp);
        order_statistic_critical(&v, alpha)
    }
}

/// Critical value from sorted bootstrap replicates.
pub fn order_statistic_critical(sorted: &[f64], alpha: f64) -> f64 {
    let m = sorted.len();
    let k = ((1.0 - alpha) * (m + 1) as f64).ceil() as usize;
    if k == 0 {
        f64::NEG_INFINITY
    } else if k > m {
        f64::INFINITY
    } else {
        sorted[k - 1]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapSet {
    pub wald: BootstrapResult,
    pub lr: BootstrapResult,
    pub score: BootstrapResult,
    pub gradient: BootstrapResult,
    pub failed: usize,
}

impl BootstrapSet {
    pub fn as_array(&self) -> [&BootstrapResult; 4] {
        [&self.wald, &self.lr, &self.score, &self.gradient]
    }
}

/// Largest tolerated number of failed replicates out of `b`.
pub fn failure_limit(b: usize) -> usize {
    b / 100
}

/// Replicate statistics (index order), failures as `None`.
pub fn replicate_statistics(ctx: &TestContext, restricted: &FitResult, b: usize, seed: u64) -> Vec<Option<[f64; 4]>> {
    let part = &ctx.fitter.partition;
    let mean = &part.x * &restricted.beta;
    let phi = restricted.phi;
    let sampler = ctx.fitter.kernel.sampler();
    (0..b)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let y = DVector::from_fn(mean.len(), |l, _| mean[l] + phi * sampler.draw(&mut r));
            let (u, t) = ctx.fits(&y).ok()?;
            ctx.raw(&u, &t, false).ok().map(|s| s.to_array())
        })
        .collect()
}

/// Bootstrap p-values and replicate distributions for all four statistics.
pub fn bootstrap_test(
    ctx: &TestContext,
    restricted: &FitResult,
    observed: &RawStatistics,
    b: usize,
    seed: u64,
) -> Result<BootstrapSet> {
    if b == 0 {
        return Err(Error::Domain("bootstrap needs at least one replicate".into()));
    }
    if !restricted.converged {
        return Err(Error::NotConverged("restricted fit did not converge".into()));
    }
    let reps = replicate_statistics(ctx, restricted, b, seed);
    let failed = reps.iter().filter(|r| r.is_none()).count();
    if failed > failure_limit(b) {
        return Err(Error::TooManyFailures {
            failed,
            total: b,
            limit: failure_limit(b),
        });
    }
    let column = |j: usize| -> Vec<f64> { reps.iter().flatten().map(|s| s[j]).collect() };
    let obs = observed.to_array();
    let make = |j: usize| BootstrapResult::new(STATISTIC_NAMES[j], obs[j], column(j), b, seed);
    Ok(BootstrapSet {
        wald: make(0),
        lr: make(1),
        score: make(2),
        gradient: make(3),
        failed,
    })
}
