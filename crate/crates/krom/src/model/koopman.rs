//! Finite-dimensional Koopman operator: `phi_{t+1} = A phi_t + B u_t`,
//! exactly linear, rolled out recursively for multi-step prediction.

use crate::numerics::Tensor;

use super::{ModelError, ModelParams};

/// Borrowed view of the Koopman matrices of a multi-step model.
#[derive(Debug, Clone, Copy)]
pub struct KoopmanView<'a> {
    pub a: &'a Tensor,
    pub b: &'a Tensor,
}

impl<'a> KoopmanView<'a> {
    pub fn from_params(model: &'a ModelParams) -> Result<Self, ModelError> {
        let a = model
            .params
            .get("koopman.a")
            .ok_or_else(|| ModelError::InvalidHyper("missing parameter `koopman.a`".into()))?;
        let b = model
            .params
            .get("koopman.b")
            .ok_or_else(|| ModelError::InvalidHyper("missing parameter `koopman.b`".into()))?;
        Ok(Self { a, b })
    }

    pub fn lifted_dim(&self) -> usize {
        self.a.shape()[0]
    }

    pub fn control_dim(&self) -> usize {
        self.b.shape()[1]
    }
}

fn matvec_into(m: &Tensor, x: &[f64], acc: &mut [f64]) {
    let (rows, cols) = (m.shape()[0], m.shape()[1]);
    let data = m.data();
    for r in 0..rows {
        let row = &data[r * cols..(r + 1) * cols];
        let mut s = 0.0;
        for c in 0..cols {
            s += row[c] * x[c];
        }
        acc[r] += s;
    }
}

/// One lifted step `A phi + B u`.
pub fn koopman_step(k: &KoopmanView, phi: &[f64], u: &[f64]) -> Result<Vec<f64>, ModelError> {
    let m = k.lifted_dim();
    if phi.len() != m {
        return Err(ModelError::InputShape {
            got: vec![phi.len()],
            want: vec![m],
        });
    }
    if u.len() != k.control_dim() {
        return Err(ModelError::InputShape {
            got: vec![u.len()],
            want: vec![k.control_dim()],
        });
    }
    let mut out = vec![0.0; m];
    matvec_into(k.a, phi, &mut out);
    matvec_into(k.b, u, &mut out);
    Ok(out)
}

/// `p` recursive steps from `phi`, consuming one control per step;
/// returns all intermediate lifted states `phi_{t+1} .. phi_{t+p}`.
pub fn koopman_rollout(
    k: &KoopmanView,
    phi: &[f64],
    controls: &[Vec<f64>],
    p: usize,
) -> Result<Vec<Vec<f64>>, ModelError> {
    if controls.len() < p {
        return Err(ModelError::ShortControls {
            got: controls.len(),
            need: p,
        });
    }
    let mut out = Vec::with_capacity(p);
    let mut cur = phi.to_vec();
    for u in controls.iter().take(p) {
        cur = koopman_step(k, &cur, u)?;
        out.push(cur.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::tiny_hyper;
    use crate::model::{init_model, ModelKind};

    fn view_with(a: Vec<f64>, b: Vec<f64>, m: usize, n_u: usize) -> (Tensor, Tensor) {
        (
            Tensor::new(vec![m, m], a).unwrap(),
            Tensor::new(vec![m, n_u], b).unwrap(),
        )
    }

    fn eye(m: usize) -> Vec<f64> {
        let mut d = vec![0.0; m * m];
        for i in 0..m {
            d[i * m + i] = 1.0;
        }
        d
    }

    #[test]
    fn identity_dynamics_leave_phi_unchanged() {
        let (a, b) = view_with(eye(5), vec![0.0; 5 * 2], 5, 2);
        let k = KoopmanView { a: &a, b: &b };
        let phi = [0.3, -1.0, 2.0, 0.0, 0.7];
        let out = koopman_step(&k, &phi, &[9.0, -4.0]).unwrap();
        assert_eq!(out, phi);
    }

    #[test]
    fn zero_a_with_identity_block_b_pads_the_control() {
        let mut bmat = vec![0.0; 5 * 2];
        bmat[0] = 1.0; // (0,0)
        bmat[3] = 1.0; // (1,1)
        let (a, b) = view_with(vec![0.0; 25], bmat, 5, 2);
        let k = KoopmanView { a: &a, b: &b };
        let out = koopman_step(&k, &[1.0; 5], &[7.0, -2.0]).unwrap();
        assert_eq!(out, vec![7.0, -2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn step_is_exactly_linear_in_phi_and_u() {
        let mut seed = 5u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let m = 7;
        let n_u = 3;
        let (a, b) = view_with(
            (0..m * m).map(|_| next()).collect(),
            (0..m * n_u).map(|_| next()).collect(),
            m,
            n_u,
        );
        let k = KoopmanView { a: &a, b: &b };
        for _ in 0..50 {
            let p1: Vec<f64> = (0..m).map(|_| next()).collect();
            let p2: Vec<f64> = (0..m).map(|_| next()).collect();
            let u1: Vec<f64> = (0..n_u).map(|_| next()).collect();
            let u2: Vec<f64> = (0..n_u).map(|_| next()).collect();
            let (al, be) = (next() * 3.0, next() * 3.0);
            let mix_p: Vec<f64> = p1.iter().zip(&p2).map(|(x, y)| al * x + be * y).collect();
            let mix_u: Vec<f64> = u1.iter().zip(&u2).map(|(x, y)| al * x + be * y).collect();
            let lhs = koopman_step(&k, &mix_p, &mix_u).unwrap();
            let s1 = koopman_step(&k, &p1, &u1).unwrap();
            let s2 = koopman_step(&k, &p2, &u2).unwrap();
            for i in 0..m {
                let rhs = al * s1[i] + be * s2[i];
                assert!((lhs[i] - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_step_rollout_reduces_to_step() {
        let m = init_model(tiny_hyper(ModelKind::Mse2c), 2).unwrap();
        let k = m.koopman().unwrap();
        let md = k.lifted_dim();
        let phi: Vec<f64> = (0..md).map(|i| (i as f64 * 0.11).sin()).collect();
        let u = vec![0.5, -0.25, 1.5];
        let roll = koopman_rollout(&k, &phi, std::slice::from_ref(&u), 1).unwrap();
        assert_eq!(roll.len(), 1);
        assert_eq!(roll[0], koopman_step(&k, &phi, &u).unwrap());
    }

    #[test]
    fn identity_a_telescopes_constant_controls() {
        let md = 6;
        let n_u = 2;
        let mut bmat = vec![0.0; md * n_u];
        bmat[0] = 1.0;
        bmat[n_u + 1] = 1.0;
        let (a, b) = view_with(eye(md), bmat.clone(), md, n_u);
        let k = KoopmanView { a: &a, b: &b };
        let phi: Vec<f64> = (0..md).map(|i| i as f64).collect();
        let u = vec![0.5, -1.0];
        let p = 7;
        let roll = koopman_rollout(&k, &phi, &vec![u.clone(); p], p).unwrap();
        let last = &roll[p - 1];
        for r in 0..md {
            let bu: f64 = (0..n_u).map(|c| bmat[r * n_u + c] * u[c]).sum();
            assert!((last[r] - (phi[r] + p as f64 * bu)).abs() < 1e-12);
        }
    }

    #[test]
    fn rollout_requires_enough_controls() {
        let m = init_model(tiny_hyper(ModelKind::Mse2c), 2).unwrap();
        let k = m.koopman().unwrap();
        let phi = vec![0.0; k.lifted_dim()];
        let controls = vec![vec![0.0; 3]; 2];
        assert!(matches!(
            koopman_rollout(&k, &phi, &controls, 3),
            Err(ModelError::ShortControls { got: 2, need: 3 })
        ));
    }
}
