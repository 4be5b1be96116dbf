//! Finite-difference verification of the analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ForwardMode, Parameterized, TriModalExample, ViML};
use crate::error::Result;

/// Agreement between analytic and numeric gradients for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    /// `||a - n|| / (||a|| + ||n||)` over the whole tensor, 0 when both vanish.
    pub relative_error: f64,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    pub max_abs_difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    /// Largest relative error among tensors whose gradient norm exceeds
    /// `zero_norm`, and the name of that tensor.
    pub fn max_relative_error(&self, zero_norm: f64) -> (f64, &str) {
        self.params
            .iter()
            .filter(|p| p.analytic_norm.max(p.numeric_norm) > zero_norm)
            .map(|p| (p.relative_error, p.name.as_str()))
            .fold((0.0, ""), |acc, x| if x.0 > acc.0 { x } else { acc })
    }

    /// Tensors whose true gradient vanishes, e.g. attention key biases, which
    /// shift every score in a softmax row equally.
    pub fn vanishing(&self, zero_norm: f64) -> impl Iterator<Item = &ParamCheck> {
        self.params
            .iter()
            .filter(move |p| p.analytic_norm.max(p.numeric_norm) <= zero_norm)
    }
}

/// Central finite-difference stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`, truncation error O(h^2).
    SecondOrder,
    /// `(8(f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h`, truncation error O(h^4).
    FourthOrder,
}

/// Compares every parameter's analytic gradient with a central difference of
/// step `h`. Each loss evaluation reseeds the forward pass with `seed`, so
/// stochastic modes are checked on a fixed dropout draw.
pub fn check_gradients(
    model: &ViML<f64>,
    batch: &[TriModalExample<f64>],
    mode: ForwardMode,
    h: f64,
    stencil: Stencil,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut analytic = model.clone();
    analytic.zero_grad();
    analytic.accumulate_gradients(batch, mode, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let mut grads = Vec::new();
    analytic.visit("", &mut |name, p| {
        grads.push((name.to_string(), p.grad.clone()))
    });

    let loss_at = |m: &ViML<f64>| m.batch_loss(batch, mode, &mut ChaCha8Rng::seed_from_u64(seed));

    let mut probe = model.clone();
    let mut params = Vec::with_capacity(grads.len());
    for (index, (name, grad)) in grads.into_iter().enumerate() {
        let mut numeric = grad.clone();
        for ((r, c), slot) in numeric.indexed_iter_mut() {
            let original = value_at(&mut probe, index, r, c, None);
            let mut diff = |step: f64| -> Result<f64> {
                value_at(&mut probe, index, r, c, Some(original + step));
                let plus = loss_at(&probe)?;
                value_at(&mut probe, index, r, c, Some(original - step));
                let minus = loss_at(&probe)?;
                value_at(&mut probe, index, r, c, Some(original));
                Ok(plus - minus)
            };
            *slot = match stencil {
                Stencil::SecondOrder => diff(h)? / (2.0 * h),
                Stencil::FourthOrder => (8.0 * diff(h)? - diff(2.0 * h)?) / (12.0 * h),
            };
        }
        let norm = |m: &ndarray::Array2<f64>| m.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = &grad - &numeric;
        let (an, nn, dn) = (norm(&grad), norm(&numeric), norm(&diff));
        params.push(ParamCheck {
            name,
            relative_error: if an + nn > 0.0 { dn / (an + nn) } else { 0.0 },
            analytic_norm: an,
            numeric_norm: nn,
            max_abs_difference: diff.iter().fold(0.0, |m, v| m.max(v.abs())),
        });
    }
    Ok(GradCheckReport { params })
}

fn value_at(model: &mut ViML<f64>, index: usize, r: usize, c: usize, set: Option<f64>) -> f64 {
    let mut i = 0;
    let mut out = 0.0;
    model.visit_mut("", &mut |_, p| {
        if i == index {
            if let Some(v) = set {
                p.value[[r, c]] = v;
            }
            out = p.value[[r, c]];
        }
        i += 1;
    });
    out
}
