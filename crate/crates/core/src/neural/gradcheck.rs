//! Central finite-difference gradient checking.

use crate::error::{Error, Result};
use crate::neural::{GradientSet, ParameterSet};
use crate::scalar::Real;

/// Compare analytic gradients against central finite differences of
/// `loss_fn`, perturbing every parameter entry in turn. Returns the
/// maximum relative error |analytic - numeric| / max(|a|, |n|, 1e-8).
pub fn check_gradients<T: Real>(
    params: &mut ParameterSet<T>,
    analytic: &GradientSet<T>,
    epsilon: T,
    mut loss_fn: impl FnMut(&ParameterSet<T>) -> Result<T>,
) -> Result<T> {
    if !analytic.all_finite() {
        return Err(Error::Numerical("analytic gradient is not finite".into()));
    }
    let floor = T::of(1e-8);
    let mut max_rel = T::zero();
    for i in 0..params.len() {
        for k in 0..params.by_index(i).len() {
            let original = params.by_index(i).data()[k];
            params.by_index_mut(i).data_mut()[k] = original + epsilon;
            let plus = loss_fn(params)?;
            params.by_index_mut(i).data_mut()[k] = original - epsilon;
            let minus = loss_fn(params)?;
            params.by_index_mut(i).data_mut()[k] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numerical("loss is not finite during check".into()));
            }
            let numeric = (plus - minus) / (T::of(2.0) * epsilon);
            let a = analytic.by_index(i).data()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Graph, Init};

    #[test]
    fn quadratic_form_checks_out() {
        let mut ps = ParameterSet::<f64>::new();
        ps.register("w", &[3, 3], Init::Gaussian(0.5)).unwrap();
        ps.register("x", &[3], Init::Gaussian(1.0)).unwrap();
        ps.initialize(11);

        let loss = |ps: &ParameterSet<f64>| -> crate::Result<f64> {
            let mut g = Graph::new(ps);
            let w = g.param("w")?;
            let x = g.param("x")?;
            let wx = g.matvec(w, x)?;
            let s = g.sigmoid(wx);
            let t = g.tanh(s);
            let sq = g.mul(t, t)?;
            let mut total = g.slice(sq, 0, 1)?;
            for i in 1..3 {
                let si = g.slice(sq, i, 1)?;
                total = g.add(total, si)?;
            }
            Ok(g.value(total).item())
        };

        let mut g = Graph::new(&ps);
        let w = g.param("w").unwrap();
        let x = g.param("x").unwrap();
        let wx = g.matvec(w, x).unwrap();
        let s = g.sigmoid(wx);
        let t = g.tanh(s);
        let sq = g.mul(t, t).unwrap();
        let mut total = g.slice(sq, 0, 1).unwrap();
        for i in 1..3 {
            let si = g.slice(sq, i, 1).unwrap();
            total = g.add(total, si).unwrap();
        }
        let analytic = g.backward(total).unwrap();
        drop(g);

        let max_rel = check_gradients(&mut ps, &analytic, 1e-5, loss).unwrap();
        assert!(max_rel < 1e-8, "max relative error {max_rel}");
    }
}
