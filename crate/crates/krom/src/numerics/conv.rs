//! Flat-buffer kernels shared by the graph ops: a register-blocked matmul
//! and im2col/col2im for convolution and its adjoints.

/// `out = a @ b` with `a` of shape `(m, k)`, `b` of shape `(k, n)`,
/// all row-major. `out` must have length `m * n`.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    let mut i = 0;
    // Four output rows per pass: one load of b's row feeds four accumulator
    // streams, which keeps the inner loop vector-friendly.
    while i + 4 <= m {
        let block = &mut out[i * n..(i + 4) * n];
        let (r0, rest) = block.split_at_mut(n);
        let (r1, rest) = rest.split_at_mut(n);
        let (r2, r3) = rest.split_at_mut(n);
        for p in 0..k {
            let a0 = a[i * k + p];
            let a1 = a[(i + 1) * k + p];
            let a2 = a[(i + 2) * k + p];
            let a3 = a[(i + 3) * k + p];
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                r0[j] += a0 * brow[j];
                r1[j] += a1 * brow[j];
                r2[j] += a2 * brow[j];
                r3[j] += a3 * brow[j];
            }
        }
        i += 4;
    }
    while i < m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                row[j] += av * brow[j];
            }
        }
        i += 1;
    }
}

/// `out = a^T @ b` with `a` of shape `(k, m)`, `b` of shape `(k, n)`.
pub fn matmul_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            let row = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                row[j] += av * brow[j];
            }
        }
    }
}

/// `out = a @ b^T` with `a` of shape `(m, k)`, `b` of shape `(n, k)`.
pub fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let row = &mut out[i * n..(i + 1) * n];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            let mut p = 0;
            while p + 2 <= k {
                s0 += arow[p] * brow[p];
                s1 += arow[p + 1] * brow[p + 1];
                p += 2;
            }
            if p < k {
                s0 += arow[p] * brow[p];
            }
            row[j] = s0 + s1;
        }
    }
}

/// Output spatial size of a strided convolution.
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    (input + 2 * pad).checked_sub(kernel).map(|d| d / stride + 1)
}

/// Output spatial size of a strided transposed convolution.
pub fn conv_transpose_out_dim(
    input: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    out_pad: usize,
) -> Option<usize> {
    ((input - 1) * stride + kernel + out_pad).checked_sub(2 * pad)
}

/// Unfolds `x` of shape `(c, h, w)` into columns of shape
/// `(c*kh*kw, ho*wo)` with zero padding.
#[allow(clippy::too_many_arguments)]
pub fn im2col(
    x: &[f64],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
    cols: &mut [f64],
) {
    debug_assert_eq!(cols.len(), c * kh * kw * ho * wo);
    cols.fill(0.0);
    let plane = ho * wo;
    for ci in 0..c {
        let xin = &x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = &mut cols[((ci * kh + ki) * kw + kj) * plane..][..plane];
                for oy in 0..ho {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &xin[iy as usize * w..(iy as usize + 1) * w];
                    let dst = &mut row[oy * wo..(oy + 1) * wo];
                    for ox in 0..wo {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[ox] = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters columns back into an image, accumulating
/// where footprints overlap.
#[allow(clippy::too_many_arguments)]
pub fn col2im(
    cols: &[f64],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
    x: &mut [f64],
) {
    debug_assert_eq!(cols.len(), c * kh * kw * ho * wo);
    debug_assert_eq!(x.len(), c * h * w);
    x.fill(0.0);
    let plane = ho * wo;
    for ci in 0..c {
        let xout = &mut x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = &cols[((ci * kh + ki) * kw + kj) * plane..][..plane];
                for oy in 0..ho {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut xout[iy as usize * w..(iy as usize + 1) * w];
                    let src = &row[oy * wo..(oy + 1) * wo];
                    for ox in 0..wo {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += src[ox];
                        }
                    }
                }
            }
        }
    }
}
