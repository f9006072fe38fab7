//! Finite-difference verification of analytic gradients.

use crate::tensor::{Result, Tensor, TensorError};

/// Compare analytic gradients of `f` against central finite differences.
///
/// `f` must rebuild its graph from the current values of `params` on every
/// call and return a scalar. Returns the maximum relative error
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)` over every
/// component of every parameter.
pub fn grad_check<F>(f: F, params: &[Tensor], step: f64) -> Result<f64>
where
    F: Fn() -> Result<Tensor>,
{
    let eval = |ctx: &str| -> Result<f64> {
        let out = f()?;
        let v = out.item();
        if !v.is_finite() {
            return Err(TensorError::NonFinite {
                context: format!("grad_check {ctx}"),
            });
        }
        Ok(v)
    };

    for p in params {
        p.zero_grad();
    }
    let loss = f()?;
    if !loss.item().is_finite() {
        return Err(TensorError::NonFinite {
            context: "grad_check analytic pass".to_string(),
        });
    }
    loss.backward()?;

    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| p.grad().unwrap_or_else(|| vec![0.0; p.numel()]))
        .collect();

    let mut max_rel = 0.0_f64;
    for (p, grads) in params.iter().zip(&analytic) {
        let original = p.data();
        for i in 0..original.len() {
            let mut probe = original.clone();
            probe[i] = original[i] + step;
            p.set_data(&probe);
            let plus = eval("forward (+step)")?;
            probe[i] = original[i] - step;
            p.set_data(&probe);
            let minus = eval("forward (-step)")?;
            probe[i] = original[i];
            p.set_data(&probe);

            let numeric = (plus - minus) / (2.0 * step);
            let a = grads[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}
