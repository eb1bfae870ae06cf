//! The surrogate models: a convolutional encoder/decoder pair shared by
//! both model kinds, a lift network with finite-dimensional Koopman
//! matrices for the multi-step model, and a locally linear one-step
//! transition for the baseline.

pub mod checkpoint;
mod koopman;
mod net;
mod predict;

pub use koopman::{koopman_rollout, koopman_step, KoopmanView};
pub use net::{decode_node, e2c_transition_node, encode_node, lift_enc_node, lift_node};
pub use predict::{predict_states, PredictMode};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

use crate::numerics::{init, Graph, NumericsError, ParamSet, Tensor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("operation requires a {expected} model, got {got}")]
    KindMismatch { expected: ModelKind, got: ModelKind },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("input shape {got:?} does not match the model ({want:?})")]
    InputShape { got: Vec<usize>, want: Vec<usize> },
    #[error("control sequence has {got} entries, need {need}")]
    ShortControls { got: usize, need: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// One-step baseline with a state-dependent locally linear transition.
    E2c,
    /// Multi-step model with lifted globally linear dynamics.
    Mse2c,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::E2c => write!(f, "e2c"),
            ModelKind::Mse2c => write!(f, "mse2c"),
        }
    }
}

/// Architecture descriptor. Everything the networks need is derived from
/// these seven numbers, so a checkpoint header fully determines shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hyper {
    pub kind: ModelKind,
    pub n_z: usize,
    pub n_l: usize,
    pub n_u: usize,
    pub nx: usize,
    pub ny: usize,
    pub k: usize,
}

impl Hyper {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.nx != self.ny {
            return Err(ModelError::InvalidHyper(format!(
                "grid must be square, got {}x{}",
                self.nx, self.ny
            )));
        }
        if self.nx < 4 || !self.nx.is_power_of_two() {
            return Err(ModelError::InvalidHyper(format!(
                "grid side must be a power of two >= 4, got {}",
                self.nx
            )));
        }
        if self.n_z == 0 || self.n_u == 0 || self.k == 0 || self.n_l == 0 {
            return Err(ModelError::InvalidHyper("n_z, n_l, n_u and k must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of stride-2 convolution levels: 4 on production grids,
    /// fewer on tiny test grids so the bottleneck stays >= 1 cell.
    pub fn levels(&self) -> usize {
        (self.nx.trailing_zeros() as usize - 1).min(4)
    }

    /// Channel widths per level, doubling from 16.
    pub fn channels(&self) -> Vec<usize> {
        (0..self.levels()).map(|i| 16 << i).collect()
    }

    /// Bottleneck spatial side after all stride-2 levels.
    pub fn bottleneck(&self) -> usize {
        self.nx >> self.levels()
    }

    /// Flattened bottleneck dimension feeding the latent head.
    pub fn flat_dim(&self) -> usize {
        let b = self.bottleneck();
        self.channels().last().unwrap() * b * b
    }

    /// Lifted-space dimension `m = n_z + n_l`.
    pub fn lifted_dim(&self) -> usize {
        self.n_z + self.n_l
    }

    /// Width of the baseline transition's hidden layer.
    pub fn trans_hidden(&self) -> usize {
        2 * self.n_z
    }

    /// Every parameter name with its shape, in deterministic order.
    pub fn expected_shapes(&self) -> BTreeMap<String, Vec<usize>> {
        let mut m = BTreeMap::new();
        let ch = self.channels();
        let mut prev = 2;
        for (i, &c) in ch.iter().enumerate() {
            m.insert(format!("enc.conv{}.w", i + 1), vec![c, prev, 3, 3]);
            m.insert(format!("enc.conv{}.b", i + 1), vec![c]);
            prev = c;
        }
        m.insert("enc.fc.w".into(), vec![self.n_z, self.flat_dim()]);
        m.insert("enc.fc.b".into(), vec![self.n_z]);

        m.insert("dec.fc.w".into(), vec![self.flat_dim(), self.n_z]);
        m.insert("dec.fc.b".into(), vec![self.flat_dim()]);
        let mut decoder_chain: Vec<usize> = ch.iter().rev().copied().collect();
        decoder_chain.push(2);
        for j in 1..decoder_chain.len() {
            m.insert(
                format!("dec.convt{j}.w"),
                vec![decoder_chain[j - 1], decoder_chain[j], 3, 3],
            );
            m.insert(format!("dec.convt{j}.b"), vec![decoder_chain[j]]);
        }

        match self.kind {
            ModelKind::Mse2c => {
                m.insert("lift.fc1.w".into(), vec![self.n_l, self.n_z]);
                m.insert("lift.fc1.b".into(), vec![self.n_l]);
                m.insert("lift.fc2.w".into(), vec![self.n_l, self.n_l]);
                m.insert("lift.fc2.b".into(), vec![self.n_l]);
                m.insert("lift.out.w".into(), vec![self.n_l, self.n_l]);
                m.insert("lift.out.b".into(), vec![self.n_l]);
                let md = self.lifted_dim();
                m.insert("koopman.a".into(), vec![md, md]);
                m.insert("koopman.b".into(), vec![md, self.n_u]);
            }
            ModelKind::E2c => {
                let h = self.trans_hidden();
                m.insert("trans.fc.w".into(), vec![h, self.n_z]);
                m.insert("trans.fc.b".into(), vec![h]);
                m.insert("trans.a_head.w".into(), vec![self.n_z * self.n_z, h]);
                m.insert("trans.a_head.b".into(), vec![self.n_z * self.n_z]);
                m.insert("trans.b_head.w".into(), vec![self.n_z * self.n_u, h]);
                m.insert("trans.b_head.b".into(), vec![self.n_z * self.n_u]);
            }
        }
        m
    }
}

/// Latent vector `z`; entries are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState(Tensor);

impl LatentState {
    pub fn new(z: Tensor) -> Result<Self, ModelError> {
        if z.shape().len() != 1 {
            return Err(ModelError::InputShape {
                got: z.shape().to_vec(),
                want: vec![z.len()],
            });
        }
        if !z.all_finite() {
            return Err(ModelError::Numerics(NumericsError::InvalidTensor(
                "latent state has non-finite entries".into(),
            )));
        }
        Ok(Self(z))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Lifted vector `phi = [z, enc(z)]`; the first `n_z` entries always equal
/// the latent state it was lifted from.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedState {
    phi: Tensor,
    n_z: usize,
}

impl LiftedState {
    pub fn from_parts(z: &LatentState, l: &Tensor) -> Self {
        let mut data = z.data().to_vec();
        data.extend_from_slice(l.data());
        let n = data.len();
        Self {
            phi: Tensor::new(vec![n], data).expect("1-d concat"),
            n_z: z.len(),
        }
    }

    pub fn phi(&self) -> &Tensor {
        &self.phi
    }

    pub fn data(&self) -> &[f64] {
        self.phi.data()
    }

    pub fn z_part(&self) -> &[f64] {
        &self.phi.data()[..self.n_z]
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// Trainable arrays plus the architecture descriptor they belong to.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub hyper: Hyper,
    pub params: ParamSet,
}

impl ModelParams {
    /// Checks the parameter set against the architecture descriptor:
    /// exact key set and exact shapes.
    pub fn validate(&self) -> Result<(), ModelError> {
        self.hyper.validate()?;
        let expected = self.hyper.expected_shapes();
        for (name, want) in &expected {
            let got = self
                .params
                .get(name)
                .ok_or_else(|| ModelError::InvalidHyper(format!("missing parameter `{name}`")))?;
            if got.shape() != want.as_slice() {
                return Err(ModelError::InvalidHyper(format!(
                    "parameter `{name}` has shape {:?}, expected {want:?}",
                    got.shape()
                )));
            }
        }
        if self.params.len() != expected.len() {
            let extra: Vec<_> = self
                .params
                .names()
                .filter(|n| !expected.contains_key(*n))
                .cloned()
                .collect();
            return Err(ModelError::InvalidHyper(format!("unexpected parameters {extra:?}")));
        }
        Ok(())
    }

    pub fn expect_kind(&self, expected: ModelKind) -> Result<(), ModelError> {
        if self.hyper.kind != expected {
            return Err(ModelError::KindMismatch {
                expected,
                got: self.hyper.kind,
            });
        }
        Ok(())
    }

    /// Normalized snapshot -> latent state.
    pub fn encode(&self, x: &Tensor) -> Result<LatentState, ModelError> {
        let mut g = Graph::new(&self.params);
        let xi = g.input(x)?;
        let z = encode_node(&mut g, &self.hyper, xi)?;
        LatentState::new(g.value(z).clone())
    }

    /// Latent state -> normalized snapshot in (0, 1).
    pub fn decode(&self, z: &LatentState) -> Result<Tensor, ModelError> {
        let mut g = Graph::new(&self.params);
        let zi = g.input(z.tensor())?;
        let x = decode_node(&mut g, &self.hyper, zi)?;
        Ok(g.value(x).clone())
    }

    /// Latent state -> lifted state `[z, enc(z)]` (multi-step kind only).
    pub fn lift(&self, z: &LatentState) -> Result<LiftedState, ModelError> {
        self.expect_kind(ModelKind::Mse2c)?;
        let mut g = Graph::new(&self.params);
        let zi = g.input(z.tensor())?;
        let l = lift_enc_node(&mut g, &self.hyper, zi)?;
        Ok(LiftedState::from_parts(z, g.value(l)))
    }

    /// One locally linear step `A(z) z + B(z) u` (baseline kind only).
    pub fn e2c_transition(&self, z: &LatentState, u: &[f64]) -> Result<LatentState, ModelError> {
        self.expect_kind(ModelKind::E2c)?;
        if u.len() != self.hyper.n_u {
            return Err(ModelError::InputShape {
                got: vec![u.len()],
                want: vec![self.hyper.n_u],
            });
        }
        let mut g = Graph::new(&self.params);
        let zi = g.input(z.tensor())?;
        let ui = g.input(&Tensor::from_vec(u.to_vec()))?;
        let out = e2c_transition_node(&mut g, &self.hyper, zi, ui)?;
        LatentState::new(g.value(out).clone())
    }

    pub fn koopman(&self) -> Result<KoopmanView<'_>, ModelError> {
        self.expect_kind(ModelKind::Mse2c)?;
        KoopmanView::from_params(self)
    }
}

/// Fresh model: Glorot-uniform weights, zero biases, Koopman `A` at
/// identity plus uniform 1e-3 noise and `B` at uniform 1e-3, drawn in
/// deterministic (lexicographic) parameter order.
pub fn init_model(hyper: Hyper, seed: u64) -> Result<ModelParams, ModelError> {
    hyper.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    for (name, shape) in hyper.expected_shapes() {
        let t = if name == "koopman.a" {
            init::identity_plus_noise(&mut rng, hyper.lifted_dim(), 1e-3)
        } else if name == "koopman.b" {
            init::uniform(&mut rng, &shape, -1e-3, 1e-3)
        } else if name.ends_with(".b") {
            Tensor::zeros(&shape)
        } else if shape.len() == 4 {
            // conv kernels: [co, ci, kh, kw] forward, [ci, co, kh, kw] transposed
            let (fan_in, fan_out) = if name.starts_with("dec.convt") {
                (shape[0] * shape[2] * shape[3], shape[1] * shape[2] * shape[3])
            } else {
                (shape[1] * shape[2] * shape[3], shape[0] * shape[2] * shape[3])
            };
            init::glorot_uniform(&mut rng, &shape, fan_in, fan_out)
        } else {
            init::glorot_uniform(&mut rng, &shape, shape[1], shape[0])
        };
        params.insert(name, t);
    }
    let model = ModelParams { hyper, params };
    model.validate()?;
    Ok(model)
}
