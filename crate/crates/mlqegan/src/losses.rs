//! Per-level fidelity and adversarial losses and their weighted totals.
//!
//! Both optimization phases minimize: the discriminator phase minimizes
//! `-E[log D(real) + log(1 - D(fake))]` and the generator phase minimizes,
//! per level, `fidelity + alpha * adversarial`, the whole thing weighted by
//! `lambda_l` and summed over levels. Expectations are minibatch means.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Batch, Real};

/// Generator adversarial objective.
///
/// `Saturating` is the literal `E[log(1 - D(fake))]` term; it has vanishing
/// gradients while the discriminator is winning, so `NonSaturating`
/// (`-E[log D(fake)]`, same fixed point) is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvMode {
    Saturating,
    NonSaturating,
}

/// Which player's objective a total is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Generator,
    Discriminator,
}

/// Per-level loss weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    pub lambda: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl LossWeights {
    pub fn new(lambda: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        if lambda.len() != alpha.len() {
            return Err(Error::Config(format!(
                "loss weights: lambda has {} entries, alpha has {}",
                lambda.len(),
                alpha.len()
            )));
        }
        for (i, &v) in lambda.iter().chain(alpha.iter()).enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "loss weights: entry {i} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self { lambda, alpha })
    }

    pub fn levels(&self) -> usize {
        self.lambda.len()
    }
}

/// Loss values measured at one level during one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LevelLoss {
    pub fidelity: f64,
    pub adv_g: f64,
    pub adv_d: f64,
}

/// Everything logged per training step.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub levels: Vec<LevelLoss>,
    pub total_g: f64,
    pub total_d: f64,
}

impl LossReport {
    pub fn from_levels(levels: Vec<LevelLoss>, w: &LossWeights) -> Result<Self> {
        let total_g = total_loss(&levels, w, Phase::Generator)?;
        let total_d = total_loss(&levels, w, Phase::Discriminator)?;
        Ok(Self {
            levels,
            total_g,
            total_d,
        })
    }
}

/// Mean squared error over batch, channels and pixels.
pub fn fidelity_loss<F: Real>(pred: &Batch<F>, target: &Batch<F>) -> Result<F> {
    if pred.dim() != target.dim() {
        return Err(Error::Shape(format!(
            "fidelity operands {:?} vs {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = F::fr(pred.len() as f64);
    let mut acc = F::zero();
    for (&p, &t) in pred.iter().zip(target.iter()) {
        let d = p - t;
        acc += d * d;
    }
    Ok(acc / n)
}

/// `d(fidelity)/d(pred) = 2 (pred - target) / N`.
pub fn fidelity_grad<F: Real>(pred: &Batch<F>, target: &Batch<F>) -> Batch<F> {
    let n = F::fr(pred.len() as f64);
    let two = F::fr(2.0);
    let mut g = pred.clone();
    for (gv, &t) in g.iter_mut().zip(target.iter()) {
        *gv = two * (*gv - t) / n;
    }
    g
}

fn check_probs<F: Real>(p: &Array1<F>) -> Result<()> {
    for &v in p {
        if !(v > F::zero() && v < F::one()) {
            return Err(Error::Degenerate(format!(
                "discriminator probability {v} outside (0, 1)"
            )));
        }
    }
    Ok(())
}

/// Discriminator-phase objective, negated so lower is better:
/// `-mean[log d_real + log(1 - d_fake)]`.
pub fn adversarial_loss_d<F: Real>(d_real: &Array1<F>, d_fake: &Array1<F>) -> Result<F> {
    check_probs(d_real)?;
    check_probs(d_fake)?;
    let n = F::fr(d_real.len() as f64);
    let m = F::fr(d_fake.len() as f64);
    let mut acc = F::zero();
    for &p in d_real {
        acc -= p.ln() / n;
    }
    for &p in d_fake {
        acc -= (F::one() - p).ln() / m;
    }
    Ok(acc)
}

/// Gradients of [`adversarial_loss_d`] w.r.t. the two probability vectors.
pub fn adversarial_loss_d_grads<F: Real>(
    d_real: &Array1<F>,
    d_fake: &Array1<F>,
) -> (Array1<F>, Array1<F>) {
    let n = F::fr(d_real.len() as f64);
    let m = F::fr(d_fake.len() as f64);
    let g_real = d_real.mapv(|p| -(F::one() / (p * n)));
    let g_fake = d_fake.mapv(|p| F::one() / ((F::one() - p) * m));
    (g_real, g_fake)
}

/// Generator-phase adversarial objective (see [`AdvMode`]).
pub fn adversarial_loss_g<F: Real>(d_fake: &Array1<F>, mode: AdvMode) -> Result<F> {
    check_probs(d_fake)?;
    let n = F::fr(d_fake.len() as f64);
    let mut acc = F::zero();
    match mode {
        AdvMode::Saturating => {
            for &p in d_fake {
                acc += (F::one() - p).ln() / n;
            }
        }
        AdvMode::NonSaturating => {
            for &p in d_fake {
                acc -= p.ln() / n;
            }
        }
    }
    Ok(acc)
}

/// Gradient of [`adversarial_loss_g`] w.r.t. the fake probabilities.
pub fn adversarial_loss_g_grad<F: Real>(d_fake: &Array1<F>, mode: AdvMode) -> Array1<F> {
    let n = F::fr(d_fake.len() as f64);
    match mode {
        AdvMode::Saturating => d_fake.mapv(|p| -(F::one() / ((F::one() - p) * n))),
        AdvMode::NonSaturating => d_fake.mapv(|p| -(F::one() / (p * n))),
    }
}

/// Weighted total over levels.
///
/// Generator phase: `sum_l lambda_l (fidelity_l + alpha_l adv_g_l)`.
/// Discriminator phase: `sum_l lambda_l alpha_l adv_d_l`.
pub fn total_loss(levels: &[LevelLoss], w: &LossWeights, phase: Phase) -> Result<f64> {
    if levels.len() != w.levels() {
        return Err(Error::Config(format!(
            "total_loss: {} level entries for {} weight entries",
            levels.len(),
            w.levels()
        )));
    }
    let total = levels
        .iter()
        .zip(w.lambda.iter().zip(w.alpha.iter()))
        .map(|(lv, (&lam, &al))| match phase {
            Phase::Generator => lam * (lv.fidelity + al * lv.adv_g),
            Phase::Discriminator => lam * al * lv.adv_d,
        })
        .sum();
    Ok(total)
}
