//! Two-component equal-weight mixture `½ N(θ₁, σ²) + ½ N(θ₁+θ₂, σ²)`.

use crate::math::{log_add_exp, LN_2PI};

#[inline]
fn exponents(theta: &[f64], x: f64, var_x: f64) -> (f64, f64, f64, f64) {
    let r1 = x - theta[0];
    let r2 = x - theta[0] - theta[1];
    (-0.5 * r1 * r1 / var_x, -0.5 * r2 * r2 / var_x, r1, r2)
}

#[inline]
fn constant(var_x: f64) -> f64 {
    -0.5 * (LN_2PI + var_x.ln()) - std::f64::consts::LN_2
}

#[inline]
pub(super) fn log_lik(theta: &[f64], x: f64, var_x: f64) -> f64 {
    let (a, b, _, _) = exponents(theta, x, var_x);
    constant(var_x) + log_add_exp(a, b)
}

/// `Σ log p(x | θ)` over `xs`, with the normalising constant added once.
pub(super) fn sum_log_lik(theta: &[f64], xs: impl Iterator<Item = f64>, var_x: f64) -> f64 {
    let mut count = 0usize;
    let mut sum = 0.0;
    for x in xs {
        let (a, b, _, _) = exponents(theta, x, var_x);
        sum += log_add_exp(a, b);
        count += 1;
    }
    sum + count as f64 * constant(var_x)
}

#[inline]
pub(super) fn accumulate(theta: &[f64], x: f64, var_x: f64, grad: &mut [f64]) -> f64 {
    let (a, b, r1, r2) = exponents(theta, x, var_x);
    let lse = log_add_exp(a, b);
    // component responsibilities
    let w1 = (a - lse).exp();
    let w2 = (b - lse).exp();
    grad[0] += (w1 * r1 + w2 * r2) / var_x;
    grad[1] += w2 * r2 / var_x;
    constant(var_x) + lse
}
