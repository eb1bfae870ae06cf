//! Graph builders for the network forward passes. Training composes these
//! into one tape per window; inference builds throwaway tapes and reads
//! the values off.

use crate::numerics::{Graph, NodeId, NumericsError};

use super::Hyper;

fn dense(g: &mut Graph, prefix: &str, x: NodeId) -> Result<NodeId, NumericsError> {
    let w = g.param(&format!("{prefix}.w"))?;
    let b = g.param(&format!("{prefix}.b"))?;
    let y = g.matmul(w, x)?;
    g.add(y, b)
}

/// Encoder: stride-2 convolution stack, flatten, linear head to `n_z`.
pub fn encode_node(g: &mut Graph, h: &Hyper, x: NodeId) -> Result<NodeId, NumericsError> {
    let mut cur = x;
    for i in 1..=h.levels() {
        let w = g.param(&format!("enc.conv{i}.w"))?;
        let b = g.param(&format!("enc.conv{i}.b"))?;
        cur = g.conv2d(cur, w, 2, 1)?;
        cur = g.bias_channels(cur, b)?;
        cur = g.relu(cur)?;
    }
    cur = g.reshape(cur, &[h.flat_dim()])?;
    dense(g, "enc.fc", cur)
}

/// Decoder: linear from `n_z` to the bottleneck, then mirrored transposed
/// convolutions; sigmoid keeps outputs in (0, 1).
pub fn decode_node(g: &mut Graph, h: &Hyper, z: NodeId) -> Result<NodeId, NumericsError> {
    let mut cur = dense(g, "dec.fc", z)?;
    cur = g.relu(cur)?;
    let b = h.bottleneck();
    let ch = h.channels();
    cur = g.reshape(cur, &[*ch.last().unwrap(), b, b])?;
    let n = h.levels();
    for j in 1..=n {
        let w = g.param(&format!("dec.convt{j}.w"))?;
        let bias = g.param(&format!("dec.convt{j}.b"))?;
        cur = g.conv2d_transpose(cur, w, 2, 1, 1)?;
        cur = g.bias_channels(cur, bias)?;
        cur = if j < n { g.relu(cur)? } else { g.sigmoid(cur)? };
    }
    Ok(cur)
}

/// The lift tower `enc(z)`: two tanh hidden layers, linear output of
/// width `n_l`.
pub fn lift_enc_node(g: &mut Graph, _h: &Hyper, z: NodeId) -> Result<NodeId, NumericsError> {
    let mut cur = dense(g, "lift.fc1", z)?;
    cur = g.tanh(cur)?;
    cur = dense(g, "lift.fc2", cur)?;
    cur = g.tanh(cur)?;
    dense(g, "lift.out", cur)
}

/// Full lifted state `[z, enc(z)]`.
pub fn lift_node(g: &mut Graph, h: &Hyper, z: NodeId) -> Result<NodeId, NumericsError> {
    let l = lift_enc_node(g, h, z)?;
    g.concat(z, l)
}

/// Baseline locally linear transition: a dense net emits `A(z)` and
/// `B(z)`, applied as `A(z) z + B(z) u`.
pub fn e2c_transition_node(g: &mut Graph, h: &Hyper, z: NodeId, u: NodeId) -> Result<NodeId, NumericsError> {
    let mut hid = dense(g, "trans.fc", z)?;
    hid = g.tanh(hid)?;
    let a_flat = dense(g, "trans.a_head", hid)?;
    let b_flat = dense(g, "trans.b_head", hid)?;
    let a = g.reshape(a_flat, &[h.n_z, h.n_z])?;
    let b = g.reshape(b_flat, &[h.n_z, h.n_u])?;
    let az = g.matmul(a, z)?;
    let bu = g.matmul(b, u)?;
    g.add(az, bu)
}
