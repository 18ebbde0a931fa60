use rand::Rng;
use rand_distr::{Cauchy, Distribution, Gamma, Open01, StandardNormal, StudentT};

use super::{DistributionKernel, Family};

/// Draws from S(0, 1) for one family. Construct once, reuse per stream.
#[derive(Debug, Clone, Copy)]
pub enum Sampler {
    Normal,
    Cauchy(Cauchy<f64>),
    StudentT(StudentT<f64>),
    LogisticI,
    LogisticII,
    PowerExp { shape: Gamma<f64>, inv_s: f64 },
}

// Scaled-normal envelope for the type I logistic: with v = e^{-z²},
// π(z)/φ(z) ∝ √v / (1 + v)², maximised at v = 1/3. Acceptance ≈ 0.83.
const LOGISTIC_I_ENVELOPE_PEAK: f64 = 0.324_759_526_419_164_5;

impl Sampler {
    pub fn new(family: Family) -> Self {
        match family {
            Family::Normal => Sampler::Normal,
            Family::Cauchy => Sampler::Cauchy(Cauchy::new(0.0, 1.0).expect("unit scale")),
            Family::StudentT { nu } => Sampler::StudentT(StudentT::new(nu).expect("validated ν")),
            Family::LogisticI => Sampler::LogisticI,
            Family::LogisticII => Sampler::LogisticII,
            Family::PowerExp { k } => {
                let a = 0.5 * (1.0 + k);
                Sampler::PowerExp {
                    shape: Gamma::new(a, 1.0).expect("validated k"),
                    inv_s: a,
                }
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Normal => rng.sample(StandardNormal),
            Sampler::Cauchy(d) => d.sample(rng),
            Sampler::StudentT(d) => d.sample(rng),
            Sampler::LogisticII => {
                let u: f64 = rng.sample(Open01);
                (u / (1.0 - u)).ln()
            }
            Sampler::LogisticI => loop {
                let z: f64 = rng.sample(StandardNormal);
                let v = (-z * z).exp();
                let ratio = v.sqrt() / ((1.0 + v) * (1.0 + v)) / LOGISTIC_I_ENVELOPE_PEAK;
                let u: f64 = rng.random();
                if u < ratio {
                    break z;
                }
            },
            Sampler::PowerExp { shape, inv_s } => {
                // |z|^s / 2 ~ Gamma(1/s, 1).
                let t = shape.sample(rng);
                let mag = (2.0 * t).powf(*inv_s);
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            }
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.draw(rng);
        }
    }
}

/// `count` i.i.d. standard draws.
pub fn sample<R: Rng + ?Sized>(family: Family, rng: &mut R, count: usize) -> Vec<f64> {
    let s = Sampler::new(family);
    (0..count).map(|_| s.draw(rng)).collect()
}

impl DistributionKernel {
    pub fn sampler(&self) -> Sampler {
        Sampler::new(self.family)
    }
}
