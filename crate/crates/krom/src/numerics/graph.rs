use super::conv;
use super::tensor::{GradRecord, ParamSet, Tensor};
use super::NumericsError;
use std::collections::BTreeMap;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(String),
    MatMul { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Scale { a: NodeId, c: f64 },
    BiasChannels { x: NodeId, b: NodeId },
    Conv2d { x: NodeId, w: NodeId, stride: usize, pad: usize },
    ConvT2d { x: NodeId, w: NodeId, stride: usize, pad: usize, out_pad: usize },
    Relu { a: NodeId },
    Tanh { a: NodeId },
    Sigmoid { a: NodeId },
    Concat { a: NodeId, b: NodeId },
    Slice { a: NodeId, start: usize },
    Reshape { a: NodeId },
    MeanSquare { a: NodeId },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::MatMul { .. } => "matmul",
            Op::Add { .. } => "add",
            Op::Sub { .. } => "sub",
            Op::Scale { .. } => "scale",
            Op::BiasChannels { .. } => "bias_channels",
            Op::Conv2d { .. } => "conv2d",
            Op::ConvT2d { .. } => "conv2d_transpose",
            Op::Relu { .. } => "relu",
            Op::Tanh { .. } => "tanh",
            Op::Sigmoid { .. } => "sigmoid",
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Reshape { .. } => "reshape",
            Op::MeanSquare { .. } => "mean_square",
        }
    }
}

struct Node {
    op: Op,
    value: Tensor,
    /// im2col buffer kept by `conv2d` for the weight gradient.
    cols: Option<Vec<f64>>,
}

/// Evaluation tape: building a node computes its value eagerly, so the
/// finished graph doubles as the forward pass. `backward` then replays it
/// in reverse for parameter gradients. Rebuilt per evaluation; never
/// mutates the parameter set it reads from.
pub struct Graph<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    param_ids: BTreeMap<String, NodeId>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_ids: BTreeMap::new(),
        }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    fn shape_err(&self, op: &'static str, detail: String) -> NumericsError {
        NumericsError::ShapeMismatch {
            op,
            node: self.nodes.len(),
            detail,
        }
    }

    fn push(&mut self, op: Op, value: Tensor, cols: Option<Vec<f64>>) -> Result<NodeId, NumericsError> {
        if !value.all_finite() {
            return Err(NumericsError::NonFinite {
                op: op.name(),
                node: self.nodes.len(),
            });
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value, cols });
        Ok(id)
    }

    /// Constant leaf; no gradient flows into it.
    pub fn input(&mut self, t: &Tensor) -> Result<NodeId, NumericsError> {
        self.push(Op::Input, t.clone(), None)
    }

    /// Named parameter leaf. Repeated references share one node so
    /// gradients accumulate.
    pub fn param(&mut self, name: &str) -> Result<NodeId, NumericsError> {
        if let Some(&id) = self.param_ids.get(name) {
            return Ok(id);
        }
        let t = self
            .params
            .get(name)
            .ok_or_else(|| NumericsError::UnknownParam(name.to_string()))?
            .clone();
        let id = self.push(Op::Param(name.to_string()), t, None)?;
        self.param_ids.insert(name.to_string(), id);
        Ok(id)
    }

    /// `a @ b` for `a: (m, k)` and `b: (k, n)` or `b: (k,)`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 {
            return Err(self.shape_err("matmul", format!("lhs must be 2-d, got {sa:?}")));
        }
        let (m, k) = (sa[0], sa[1]);
        let (n, out_shape) = match sb.len() {
            2 if sb[0] == k => (sb[1], vec![m, sb[1]]),
            1 if sb[0] == k => (1, vec![m]),
            _ => {
                return Err(self.shape_err("matmul", format!("lhs {sa:?} vs rhs {sb:?}")));
            }
        };
        let mut out = vec![0.0; m * n];
        conv::matmul(
            self.nodes[a.0].value.data(),
            self.nodes[b.0].value.data(),
            m,
            k,
            n,
            &mut out,
        );
        self.push(Op::MatMul { a, b }, Tensor::new(out_shape, out)?, None)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        if self.shape(a) != self.shape(b) {
            let d = format!("{:?} vs {:?}", self.shape(a), self.shape(b));
            return Err(self.shape_err("add", d));
        }
        let data: Vec<f64> = self.nodes[a.0]
            .value
            .data()
            .iter()
            .zip(self.nodes[b.0].value.data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::Add { a, b }, Tensor::new(shape, data)?, None)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        if self.shape(a) != self.shape(b) {
            let d = format!("{:?} vs {:?}", self.shape(a), self.shape(b));
            return Err(self.shape_err("sub", d));
        }
        let data: Vec<f64> = self.nodes[a.0]
            .value
            .data()
            .iter()
            .zip(self.nodes[b.0].value.data())
            .map(|(x, y)| x - y)
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::Sub { a, b }, Tensor::new(shape, data)?, None)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId, NumericsError> {
        let data: Vec<f64> = self.nodes[a.0].value.data().iter().map(|x| c * x).collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::Scale { a, c }, Tensor::new(shape, data)?, None)
    }

    /// Adds `b: (c,)` to every spatial position of `x: (c, h, w)`.
    pub fn bias_channels(&mut self, x: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let (sx, sb) = (self.shape(x).to_vec(), self.shape(b).to_vec());
        if sx.len() != 3 || sb.len() != 1 || sb[0] != sx[0] {
            return Err(self.shape_err("bias_channels", format!("{sx:?} vs bias {sb:?}")));
        }
        let plane = sx[1] * sx[2];
        let mut data = self.nodes[x.0].value.data().to_vec();
        for (c, chunk) in data.chunks_mut(plane).enumerate() {
            let bv = self.nodes[b.0].value.data()[c];
            for v in chunk {
                *v += bv;
            }
        }
        self.push(Op::BiasChannels { x, b }, Tensor::new(sx, data)?, None)
    }

    /// 2-D convolution, `x: (ci, h, w)`, `w: (co, ci, kh, kw)`, zero padding.
    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        stride: usize,
        pad: usize,
    ) -> Result<NodeId, NumericsError> {
        if stride == 0 {
            return Err(self.shape_err("conv2d", "stride must be >= 1".into()));
        }
        let (sx, sw) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if sx.len() != 3 || sw.len() != 4 || sw[1] != sx[0] {
            return Err(self.shape_err("conv2d", format!("input {sx:?} vs kernel {sw:?}")));
        }
        let (ci, h, wd) = (sx[0], sx[1], sx[2]);
        let (co, kh, kw) = (sw[0], sw[2], sw[3]);
        let ho = conv::conv_out_dim(h, kh, stride, pad);
        let wo = conv::conv_out_dim(wd, kw, stride, pad);
        let (ho, wo) = match (ho, wo) {
            (Some(a), Some(b)) if a > 0 && b > 0 => (a, b),
            _ => {
                return Err(self.shape_err(
                    "conv2d",
                    format!("kernel {kh}x{kw} too large for input {h}x{wd} with pad {pad}"),
                ))
            }
        };
        let mut cols = vec![0.0; ci * kh * kw * ho * wo];
        conv::im2col(
            self.nodes[x.0].value.data(),
            ci,
            h,
            wd,
            kh,
            kw,
            stride,
            pad,
            ho,
            wo,
            &mut cols,
        );
        let mut out = vec![0.0; co * ho * wo];
        conv::matmul(
            self.nodes[w.0].value.data(),
            &cols,
            co,
            ci * kh * kw,
            ho * wo,
            &mut out,
        );
        self.push(
            Op::Conv2d { x, w, stride, pad },
            Tensor::new(vec![co, ho, wo], out)?,
            Some(cols),
        )
    }

    /// 2-D transposed convolution, `x: (ci, h, w)`, `w: (ci, co, kh, kw)`.
    pub fn conv2d_transpose(
        &mut self,
        x: NodeId,
        w: NodeId,
        stride: usize,
        pad: usize,
        out_pad: usize,
    ) -> Result<NodeId, NumericsError> {
        if stride == 0 || out_pad >= stride {
            return Err(self.shape_err(
                "conv2d_transpose",
                format!("need stride >= 1 and out_pad < stride, got {stride}/{out_pad}"),
            ));
        }
        let (sx, sw) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if sx.len() != 3 || sw.len() != 4 || sw[0] != sx[0] {
            return Err(self.shape_err("conv2d_transpose", format!("input {sx:?} vs kernel {sw:?}")));
        }
        let (ci, h, wd) = (sx[0], sx[1], sx[2]);
        let (co, kh, kw) = (sw[1], sw[2], sw[3]);
        let ho = conv::conv_transpose_out_dim(h, kh, stride, pad, out_pad);
        let wo = conv::conv_transpose_out_dim(wd, kw, stride, pad, out_pad);
        let (ho, wo) = match (ho, wo) {
            (Some(a), Some(b)) if a > 0 && b > 0 => (a, b),
            _ => {
                return Err(self.shape_err(
                    "conv2d_transpose",
                    format!("padding {pad} too large for kernel {kh}x{kw}"),
                ))
            }
        };
        // cols[(co,ki,kj),(i,j)] = sum_ci w[ci,co,ki,kj] * x[ci,i,j]
        let mut cols = vec![0.0; co * kh * kw * h * wd];
        conv::matmul_tn(
            self.nodes[w.0].value.data(),
            self.nodes[x.0].value.data(),
            co * kh * kw,
            ci,
            h * wd,
            &mut cols,
        );
        let mut out = vec![0.0; co * ho * wo];
        conv::col2im(&cols, co, ho, wo, kh, kw, stride, pad, h, wd, &mut out);
        self.push(
            Op::ConvT2d {
                x,
                w,
                stride,
                pad,
                out_pad,
            },
            Tensor::new(vec![co, ho, wo], out)?,
            None,
        )
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        let data: Vec<f64> = self.nodes[a.0]
            .value
            .data()
            .iter()
            .map(|&x| if x > 0.0 { x } else { 0.0 })
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::Relu { a }, Tensor::new(shape, data)?, None)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        let data: Vec<f64> = self.nodes[a.0].value.data().iter().map(|x| x.tanh()).collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::Tanh { a }, Tensor::new(shape, data)?, None)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        let data: Vec<f64> = self.nodes[a.0]
            .value
            .data()
            .iter()
            .map(|&x| {
                // Split form avoids overflow of exp for large |x|.
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            })
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::Sigmoid { a }, Tensor::new(shape, data)?, None)
    }

    /// Concatenation of two 1-d vectors.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        if self.shape(a).len() != 1 || self.shape(b).len() != 1 {
            let d = format!("{:?} and {:?}", self.shape(a), self.shape(b));
            return Err(self.shape_err("concat", d));
        }
        let mut data = self.nodes[a.0].value.data().to_vec();
        data.extend_from_slice(self.nodes[b.0].value.data());
        let n = data.len();
        self.push(Op::Concat { a, b }, Tensor::new(vec![n], data)?, None)
    }

    /// Contiguous sub-range of a 1-d vector.
    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId, NumericsError> {
        let sa = self.shape(a).to_vec();
        if sa.len() != 1 || start + len > sa[0] || len == 0 {
            return Err(self.shape_err("slice", format!("[{start}, {}) of {sa:?}", start + len)));
        }
        let data = self.nodes[a.0].value.data()[start..start + len].to_vec();
        self.push(Op::Slice { a, start }, Tensor::new(vec![len], data)?, None)
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId, NumericsError> {
        let n: usize = shape.iter().product();
        if n != self.nodes[a.0].value.len() || shape.iter().any(|&d| d == 0) {
            let d = format!("{:?} -> {shape:?}", self.shape(a));
            return Err(self.shape_err("reshape", d));
        }
        let data = self.nodes[a.0].value.data().to_vec();
        self.push(Op::Reshape { a }, Tensor::new(shape.to_vec(), data)?, None)
    }

    /// Mean of squared entries; the scalar reduction used by every loss.
    pub fn mean_square(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        let d = self.nodes[a.0].value.data();
        let v = d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64;
        self.push(Op::MeanSquare { a }, Tensor::scalar(v), None)
    }

    /// Mean of scalar nodes.
    pub fn mean_of(&mut self, ids: &[NodeId]) -> Result<NodeId, NumericsError> {
        let sum = self.sum_of(ids)?;
        self.scale(sum, 1.0 / ids.len() as f64)
    }

    /// Sum of scalar nodes.
    pub fn sum_of(&mut self, ids: &[NodeId]) -> Result<NodeId, NumericsError> {
        let mut it = ids.iter();
        let mut acc = *it.next().ok_or_else(|| {
            self.shape_err("sum_of", "empty node list".into())
        })?;
        for &id in it {
            acc = self.add(acc, id)?;
        }
        Ok(acc)
    }

    /// Reverse-mode gradients of a scalar output with respect to every
    /// parameter in the set; parameters the output does not depend on get
    /// zero tensors.
    pub fn backward(&self, out: NodeId) -> Result<GradRecord, NumericsError> {
        if !self.nodes[out.0].value.is_scalar() {
            return Err(NumericsError::NotScalar(self.nodes[out.0].value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(vec![1.0]);

        for idx in (0..=out.0).rev() {
            let Some(gy) = grads[idx].take() else {
                continue;
            };
            match &self.nodes[idx].op {
                Op::Input | Op::Param(_) => {
                    grads[idx] = Some(gy);
                    continue;
                }
                Op::MatMul { a, b } => {
                    let av = self.nodes[a.0].value.data();
                    let bv = self.nodes[b.0].value.data();
                    let sa = self.nodes[a.0].value.shape();
                    let (m, k) = (sa[0], sa[1]);
                    let n = bv.len() / k;
                    {
                        let ga = Self::grad_buf(&mut grads, *a, m * k);
                        let mut tmp = vec![0.0; m * k];
                        conv::matmul_nt(&gy, bv, m, n, k, &mut tmp);
                        for (g, t) in ga.iter_mut().zip(&tmp) {
                            *g += t;
                        }
                    }
                    {
                        let gb = Self::grad_buf(&mut grads, *b, k * n);
                        let mut tmp = vec![0.0; k * n];
                        conv::matmul_tn(av, &gy, k, m, n, &mut tmp);
                        for (g, t) in gb.iter_mut().zip(&tmp) {
                            *g += t;
                        }
                    }
                }
                Op::Add { a, b } => {
                    for &src in &[*a, *b] {
                        let g = Self::grad_buf(&mut grads, src, gy.len());
                        for (gi, yi) in g.iter_mut().zip(&gy) {
                            *gi += yi;
                        }
                    }
                }
                Op::Sub { a, b } => {
                    {
                        let g = Self::grad_buf(&mut grads, *a, gy.len());
                        for (gi, yi) in g.iter_mut().zip(&gy) {
                            *gi += yi;
                        }
                    }
                    {
                        let g = Self::grad_buf(&mut grads, *b, gy.len());
                        for (gi, yi) in g.iter_mut().zip(&gy) {
                            *gi -= yi;
                        }
                    }
                }
                Op::Scale { a, c } => {
                    let g = Self::grad_buf(&mut grads, *a, gy.len());
                    for (gi, yi) in g.iter_mut().zip(&gy) {
                        *gi += c * yi;
                    }
                }
                Op::BiasChannels { x, b } => {
                    let plane = {
                        let s = self.nodes[x.0].value.shape();
                        s[1] * s[2]
                    };
                    {
                        let g = Self::grad_buf(&mut grads, *x, gy.len());
                        for (gi, yi) in g.iter_mut().zip(&gy) {
                            *gi += yi;
                        }
                    }
                    {
                        let gb = Self::grad_buf(&mut grads, *b, gy.len() / plane);
                        for (c, chunk) in gy.chunks(plane).enumerate() {
                            gb[c] += chunk.iter().sum::<f64>();
                        }
                    }
                }
                Op::Conv2d { x, w, stride, pad } => {
                    let sx = self.nodes[x.0].value.shape().to_vec();
                    let sw = self.nodes[w.0].value.shape().to_vec();
                    let (ci, h, wd) = (sx[0], sx[1], sx[2]);
                    let (co, kh, kw) = (sw[0], sw[2], sw[3]);
                    let ho = conv::conv_out_dim(h, kh, *stride, *pad).unwrap();
                    let wo = conv::conv_out_dim(wd, kw, *stride, *pad).unwrap();
                    let cols = self.nodes[idx].cols.as_ref().expect("conv2d caches im2col");
                    {
                        let gw = Self::grad_buf(&mut grads, *w, co * ci * kh * kw);
                        let mut tmp = vec![0.0; co * ci * kh * kw];
                        conv::matmul_nt(&gy, cols, co, ho * wo, ci * kh * kw, &mut tmp);
                        for (g, t) in gw.iter_mut().zip(&tmp) {
                            *g += t;
                        }
                    }
                    {
                        let wv = self.nodes[w.0].value.data();
                        let mut dcols = vec![0.0; ci * kh * kw * ho * wo];
                        conv::matmul_tn(wv, &gy, ci * kh * kw, co, ho * wo, &mut dcols);
                        let mut dx = vec![0.0; ci * h * wd];
                        conv::col2im(&dcols, ci, h, wd, kh, kw, *stride, *pad, ho, wo, &mut dx);
                        let gx = Self::grad_buf(&mut grads, *x, ci * h * wd);
                        for (g, t) in gx.iter_mut().zip(&dx) {
                            *g += t;
                        }
                    }
                }
                Op::ConvT2d {
                    x,
                    w,
                    stride,
                    pad,
                    out_pad: _,
                } => {
                    let sx = self.nodes[x.0].value.shape().to_vec();
                    let sw = self.nodes[w.0].value.shape().to_vec();
                    let sy = self.nodes[idx].value.shape().to_vec();
                    let (ci, h, wd) = (sx[0], sx[1], sx[2]);
                    let (co, kh, kw) = (sw[1], sw[2], sw[3]);
                    let (ho, wo) = (sy[1], sy[2]);
                    // im2col of the upstream gradient over the output geometry
                    let mut cols_dy = vec![0.0; co * kh * kw * h * wd];
                    conv::im2col(&gy, co, ho, wo, kh, kw, *stride, *pad, h, wd, &mut cols_dy);
                    {
                        let wv = self.nodes[w.0].value.data();
                        let mut dx = vec![0.0; ci * h * wd];
                        conv::matmul(wv, &cols_dy, ci, co * kh * kw, h * wd, &mut dx);
                        let gx = Self::grad_buf(&mut grads, *x, ci * h * wd);
                        for (g, t) in gx.iter_mut().zip(&dx) {
                            *g += t;
                        }
                    }
                    {
                        let xv = self.nodes[x.0].value.data();
                        let mut dw = vec![0.0; ci * co * kh * kw];
                        conv::matmul_nt(xv, &cols_dy, ci, h * wd, co * kh * kw, &mut dw);
                        let gw = Self::grad_buf(&mut grads, *w, ci * co * kh * kw);
                        for (g, t) in gw.iter_mut().zip(&dw) {
                            *g += t;
                        }
                    }
                }
                Op::Relu { a } => {
                    let xv = self.nodes[a.0].value.data();
                    let g = Self::grad_buf(&mut grads, *a, gy.len());
                    for ((gi, yi), &x) in g.iter_mut().zip(&gy).zip(xv) {
                        if x > 0.0 {
                            *gi += yi;
                        }
                    }
                }
                Op::Tanh { a } => {
                    let yv = self.nodes[idx].value.data();
                    let g = Self::grad_buf(&mut grads, *a, gy.len());
                    for ((gi, gyi), &y) in g.iter_mut().zip(&gy).zip(yv) {
                        *gi += gyi * (1.0 - y * y);
                    }
                }
                Op::Sigmoid { a } => {
                    let yv = self.nodes[idx].value.data();
                    let g = Self::grad_buf(&mut grads, *a, gy.len());
                    for ((gi, gyi), &y) in g.iter_mut().zip(&gy).zip(yv) {
                        *gi += gyi * y * (1.0 - y);
                    }
                }
                Op::Concat { a, b } => {
                    let na = self.nodes[a.0].value.len();
                    {
                        let g = Self::grad_buf(&mut grads, *a, na);
                        for (gi, yi) in g.iter_mut().zip(&gy[..na]) {
                            *gi += yi;
                        }
                    }
                    {
                        let g = Self::grad_buf(&mut grads, *b, gy.len() - na);
                        for (gi, yi) in g.iter_mut().zip(&gy[na..]) {
                            *gi += yi;
                        }
                    }
                }
                Op::Slice { a, start } => {
                    let na = self.nodes[a.0].value.len();
                    let g = Self::grad_buf(&mut grads, *a, na);
                    for (gi, yi) in g[*start..*start + gy.len()].iter_mut().zip(&gy) {
                        *gi += yi;
                    }
                }
                Op::Reshape { a } => {
                    let g = Self::grad_buf(&mut grads, *a, gy.len());
                    for (gi, yi) in g.iter_mut().zip(&gy) {
                        *gi += yi;
                    }
                }
                Op::MeanSquare { a } => {
                    let xv = self.nodes[a.0].value.data();
                    let scale = 2.0 * gy[0] / xv.len() as f64;
                    let g = Self::grad_buf(&mut grads, *a, xv.len());
                    for (gi, &x) in g.iter_mut().zip(xv) {
                        *gi += scale * x;
                    }
                }
            }
        }

        let mut record = GradRecord::zeros_like(self.params);
        for (name, id) in &self.param_ids {
            if let Some(g) = grads[id.0].take() {
                let shape = self.nodes[id.0].value.shape().to_vec();
                record.insert(name.clone(), Tensor::new(shape, g)?);
            }
        }
        Ok(record)
    }

    fn grad_buf(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
        grads[id.0].get_or_insert_with(|| vec![0.0; len])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(name: &str, t: Tensor) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.insert(name, t);
        ps
    }

    #[test]
    fn matmul_identity_preserves_vector() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let eye = Tensor::new(vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        let i = g.input(&eye).unwrap();
        let v = g.input(&Tensor::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        let y = g.matmul(i, v).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn conv2d_identity_kernel_passes_input_through() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let x = Tensor::new(vec![1, 4, 4], (0..16).map(|v| v as f64).collect()).unwrap();
        let xi = g.input(&x).unwrap();
        let k = g.input(&Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap()).unwrap();
        let y = g.conv2d(xi, k, 1, 0).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 4, 4]);
        assert_eq!(g.value(y).data(), x.data());
    }

    #[test]
    fn tanh_is_zero_at_origin() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let x = g.input(&Tensor::zeros(&[2, 3])).unwrap();
        let y = g.tanh(x).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn square_gradient_is_two_x() {
        // f(w) = w^2 via mean_square of the 1-element tensor; df/dw = 2w.
        let ps = single_param("w", Tensor::from_vec(vec![3.0]));
        let mut g = Graph::new(&ps);
        let w = g.param("w").unwrap();
        let y = g.mean_square(w).unwrap();
        assert_eq!(g.value(y).scalar_value(), 9.0);
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get("w").unwrap().data(), &[6.0]);
    }

    #[test]
    fn unused_param_gets_zero_gradient() {
        let mut ps = ParamSet::new();
        ps.insert("used", Tensor::from_vec(vec![2.0]));
        ps.insert("unused", Tensor::from_vec(vec![5.0, 6.0]));
        let mut g = Graph::new(&ps);
        let w = g.param("used").unwrap();
        let y = g.mean_square(w).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get("unused").unwrap().data(), &[0.0, 0.0]);
        assert_eq!(grads.get("used").unwrap().data(), &[4.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_output() {
        let ps = single_param("w", Tensor::from_vec(vec![1.0, 2.0]));
        let mut g = Graph::new(&ps);
        let w = g.param("w").unwrap();
        assert!(matches!(g.backward(w), Err(NumericsError::NotScalar(_))));
    }

    #[test]
    fn shape_mismatch_reports_op_and_node() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let a = g.input(&Tensor::zeros(&[2])).unwrap();
        let b = g.input(&Tensor::zeros(&[3])).unwrap();
        match g.add(a, b) {
            Err(NumericsError::ShapeMismatch { op, node, .. }) => {
                assert_eq!(op, "add");
                assert_eq!(node, 2);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_output_is_rejected() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let a = g.input(&Tensor::from_vec(vec![1e308])).unwrap();
        let b = g.input(&Tensor::from_vec(vec![1e308])).unwrap();
        assert!(matches!(
            g.add(a, b),
            Err(NumericsError::NonFinite { op: "add", .. })
        ));
    }

    #[test]
    fn slice_of_concat_recovers_parts() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let a = g.input(&Tensor::from_vec(vec![1.0, 2.0])).unwrap();
        let b = g.input(&Tensor::from_vec(vec![3.0])).unwrap();
        let c = g.concat(a, b).unwrap();
        let s = g.slice(c, 1, 2).unwrap();
        assert_eq!(g.value(s).data(), &[2.0, 3.0]);
    }
}
