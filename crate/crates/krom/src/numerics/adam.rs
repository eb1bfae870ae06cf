use super::tensor::{GradRecord, ParamSet, Tensor};
use super::NumericsError;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// First/second moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: GradRecord,
    v: GradRecord,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        Self {
            m: GradRecord::zeros_like(params),
            v: GradRecord::zeros_like(params),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update, applied in deterministic parameter
/// order. Returns the updated parameter set; the originals are untouched.
pub fn adam_step(
    params: &ParamSet,
    grads: &GradRecord,
    state: &mut AdamState,
    lr: f64,
) -> Result<ParamSet, NumericsError> {
    grads.matches(params)?;
    for (name, g) in grads.iter() {
        if !g.all_finite() {
            return Err(NumericsError::NonFiniteGrad(name.clone()));
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - BETA1.powf(t);
    let bc2 = 1.0 - BETA2.powf(t);

    let mut out = ParamSet::new();
    for (name, p) in params.iter() {
        let g = grads.get(name).expect("key sets match").data();
        let mut new_p = p.data().to_vec();
        // zeros_like guarantees both moment entries exist
        let m = state.m.get(name).unwrap().data().to_vec();
        let v = state.v.get(name).unwrap().data().to_vec();
        let mut m_new = m;
        let mut v_new = v;
        for i in 0..new_p.len() {
            m_new[i] = BETA1 * m_new[i] + (1.0 - BETA1) * g[i];
            v_new[i] = BETA2 * v_new[i] + (1.0 - BETA2) * g[i] * g[i];
            let m_hat = m_new[i] / bc1;
            let v_hat = v_new[i] / bc2;
            new_p[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
        }
        state
            .m
            .insert(name.clone(), Tensor::new(p.shape().to_vec(), m_new)?);
        state
            .v
            .insert(name.clone(), Tensor::new(p.shape().to_vec(), v_new)?);
        out.insert(name.clone(), Tensor::new(p.shape().to_vec(), new_p)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_params(v: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.insert("w", Tensor::from_vec(vec![v]));
        ps
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let ps = scalar_params(1.5);
        let grads = GradRecord::zeros_like(&ps);
        let mut state = AdamState::new(&ps);
        let out = adam_step(&ps, &grads, &mut state, 0.01).unwrap();
        assert_eq!(out.get("w").unwrap().data(), &[1.5]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // Bias correction makes the very first update lr * g/|g| up to eps.
        let ps = scalar_params(1.0);
        let mut grads = GradRecord::zeros_like(&ps);
        grads.insert("w".into(), Tensor::from_vec(vec![1.0]));
        let mut state = AdamState::new(&ps);
        let out = adam_step(&ps, &grads, &mut state, 0.01).unwrap();
        let w = out.get("w").unwrap().data()[0];
        // m_hat = 1, v_hat = 1 -> step = 0.01 / (1 + 1e-8)
        assert!((w - (1.0 - 0.01 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn identical_inputs_give_identical_outputs() {
        let ps = scalar_params(2.0);
        let mut grads = GradRecord::zeros_like(&ps);
        grads.insert("w".into(), Tensor::from_vec(vec![0.3]));
        let mut s1 = AdamState::new(&ps);
        let mut s2 = AdamState::new(&ps);
        let a = adam_step(&ps, &grads, &mut s1, 0.01).unwrap();
        let b = adam_step(&ps, &grads, &mut s2, 0.01).unwrap();
        assert_eq!(a.get("w").unwrap().data(), b.get("w").unwrap().data());
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let ps = scalar_params(1.0);
        let mut grads = GradRecord::zeros_like(&ps);
        grads.insert("w".into(), Tensor::from_vec(vec![f64::NAN]));
        let mut state = AdamState::new(&ps);
        match adam_step(&ps, &grads, &mut state, 0.01) {
            Err(NumericsError::NonFiniteGrad(name)) => assert_eq!(name, "w"),
            other => panic!("expected NonFiniteGrad, got {other:?}"),
        }
    }
}
