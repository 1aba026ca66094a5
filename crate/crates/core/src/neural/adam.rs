//! Bias-corrected Adam.

use crate::error::{Error, Result};
use crate::neural::{GradientSet, ParameterSet};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub step: u64,
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    pub first_moment: Vec<Tensor<T>>,
    pub second_moment: Vec<Tensor<T>>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(params: &ParameterSet<T>, learning_rate: T) -> Self {
        let zeros: Vec<Tensor<T>> = params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        OptimizerState {
            step: 0,
            learning_rate,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            epsilon: T::of(1e-8),
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }
}

/// One Adam step: update moments, bias-correct, and move the parameters.
pub fn adam_update<T: Real>(
    params: &mut ParameterSet<T>,
    grads: &GradientSet<T>,
    state: &mut OptimizerState<T>,
) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::Config(format!(
            "gradient set has {} tensors for {} parameters",
            grads.len(),
            params.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bias1 = T::one() - state.beta1.powi(t);
    let bias2 = T::one() - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads.by_index(i).data();
        let m = state.first_moment[i].data_mut();
        let v = state.second_moment[i].data_mut();
        let p = params.by_index_mut(i).data_mut();
        for k in 0..p.len() {
            m[k] = state.beta1 * m[k] + (T::one() - state.beta1) * g[k];
            v[k] = state.beta2 * v[k] + (T::one() - state.beta2) * g[k] * g[k];
            let m_hat = m[k] / bias1;
            let v_hat = v[k] / bias2;
            p[k] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Init;

    fn one_param(value: &[f64]) -> ParameterSet<f64> {
        let mut ps = ParameterSet::new();
        ps.register("x", &[value.len()], Init::Zeros).unwrap();
        ps.get_mut("x").unwrap().data_mut().copy_from_slice(value);
        ps
    }

    #[test]
    fn zero_gradient_leaves_parameters_and_decays_moments() {
        let mut ps = one_param(&[1.5, -2.0]);
        let mut st = OptimizerState::new(&ps, 0.1);
        let g = GradientSet::zeros_like(&ps);
        adam_update(&mut ps, &g, &mut st).unwrap();
        assert_eq!(ps.get("x").unwrap().data(), &[1.5, -2.0]);

        // once the moments are non-zero, a zero gradient decays them
        let mut g1 = GradientSet::zeros_like(&ps);
        g1.by_index_mut(0).data_mut().copy_from_slice(&[1.0, -1.0]);
        adam_update(&mut ps, &g1, &mut st).unwrap();
        let m_before = st.first_moment[0].data()[0];
        let v_before = st.second_moment[0].data()[0];
        adam_update(&mut ps, &g, &mut st).unwrap();
        assert!((st.first_moment[0].data()[0] - 0.9 * m_before).abs() < 1e-15);
        assert!((st.second_moment[0].data()[0] - 0.999 * v_before).abs() < 1e-18);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut ps = one_param(&[0.0, 0.0]);
        let mut st = OptimizerState::new(&ps, 0.01);
        let mut g = GradientSet::zeros_like(&ps);
        g.by_index_mut(0).data_mut().copy_from_slice(&[3.0, -0.2]);
        adam_update(&mut ps, &g, &mut st).unwrap();
        let p = ps.get("x").unwrap().data();
        assert!((p[0] + 0.01).abs() < 1e-8);
        assert!((p[1] - 0.01).abs() < 1e-7);
    }

    #[test]
    fn quadratic_trajectory_matches_scalar_oracle() {
        // minimize f(x) = x^2 from x=1; hand-rolled scalar Adam as oracle
        let mut ps = one_param(&[1.0]);
        let mut st = OptimizerState::new(&ps, 0.05);

        let (lr, b1, b2, eps) = (0.05, 0.9, 0.999, 1e-8);
        let (mut xo, mut mo, mut vo) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=10 {
            let grad = 2.0 * ps.get("x").unwrap().data()[0];
            let mut g = GradientSet::zeros_like(&ps);
            g.by_index_mut(0).data_mut()[0] = grad;
            adam_update(&mut ps, &g, &mut st).unwrap();

            let go = 2.0 * xo;
            mo = b1 * mo + (1.0 - b1) * go;
            vo = b2 * vo + (1.0 - b2) * go * go;
            let m_hat = mo / (1.0 - b1f64(t));
            let v_hat = vo / (1.0 - b2f64(t));
            xo -= lr * m_hat / (v_hat.sqrt() + eps);

            let x = ps.get("x").unwrap().data()[0];
            assert!((x - xo).abs() < 1e-15, "step {t}: {x} vs {xo}");
        }

        fn b1f64(t: u64) -> f64 {
            0.9f64.powi(t as i32)
        }
        fn b2f64(t: u64) -> f64 {
            0.999f64.powi(t as i32)
        }
    }
}
