//! Raw numeric loops behind the tape ops.
//!
//! Everything here is plain `f64` slice arithmetic with no tape knowledge.
//! Inner loops run over contiguous memory so LLVM can vectorize them; this
//! matters because the whole training harness is single-threaded.

/// out[m,n] = a[m,k] * b[k,n]
pub fn matmul(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for kk in 0..k {
            let av = a[i * k + kk];
            if av == 0.0 {
                continue;
            }
            let b_row = &b[kk * n..(kk + 1) * n];
            for j in 0..n {
                out_row[j] += av * b_row[j];
            }
        }
    }
}

/// ga[m,k] += g[m,n] * b[k,n]^T  (gradient w.r.t. the left matmul operand)
pub fn matmul_grad_lhs(g: &[f64], b: &[f64], ga: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        for kk in 0..k {
            let b_row = &b[kk * n..(kk + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += g_row[j] * b_row[j];
            }
            ga[i * k + kk] += acc;
        }
    }
}

/// gb[k,n] += a[m,k]^T * g[m,n]  (gradient w.r.t. the right matmul operand)
pub fn matmul_grad_rhs(a: &[f64], g: &[f64], gb: &mut [f64], m: usize, k: usize, n: usize) {
    for kk in 0..k {
        let gb_row = &mut gb[kk * n..(kk + 1) * n];
        for i in 0..m {
            let av = a[i * k + kk];
            if av == 0.0 {
                continue;
            }
            let g_row = &g[i * n..(i + 1) * n];
            for j in 0..n {
                gb_row[j] += av * g_row[j];
            }
        }
    }
}

/// out[p,q] = sum_d (a[p,d] - b[q,d])^2
///
/// Expanded termwise rather than via ||a||^2 + ||b||^2 - 2ab so that the
/// diagonal of `pairwise_sq_dist(x, x)` is exactly zero.
pub fn pairwise_sq_dist(a: &[f64], b: &[f64], out: &mut [f64], p: usize, q: usize, d: usize) {
    for i in 0..p {
        let ai = &a[i * d..(i + 1) * d];
        for j in 0..q {
            let bj = &b[j * d..(j + 1) * d];
            let mut acc = 0.0;
            for t in 0..d {
                let diff = ai[t] - bj[t];
                acc += diff * diff;
            }
            out[i * q + j] = acc;
        }
    }
}

/// Gradients of pairwise_sq_dist w.r.t. both operands.
pub fn pairwise_sq_dist_grad(
    a: &[f64],
    b: &[f64],
    g: &[f64],
    ga: &mut [f64],
    gb: &mut [f64],
    p: usize,
    q: usize,
    d: usize,
) {
    for i in 0..p {
        let ai = &a[i * d..(i + 1) * d];
        for j in 0..q {
            let gv = g[i * q + j];
            if gv == 0.0 {
                continue;
            }
            let bj = &b[j * d..(j + 1) * d];
            let ga_i = &mut ga[i * d..(i + 1) * d];
            for t in 0..d {
                ga_i[t] += 2.0 * gv * (ai[t] - bj[t]);
            }
            let gb_j = &mut gb[j * d..(j + 1) * d];
            for t in 0..d {
                gb_j[t] -= 2.0 * gv * (ai[t] - bj[t]);
            }
        }
    }
}

/// Convolution geometry: stride 1, symmetric zero padding.
#[derive(Debug, Clone, Copy)]
pub struct ConvDims {
    pub batch: usize,
    pub in_ch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub pad: usize,
}

impl ConvDims {
    pub fn out_h(&self) -> usize {
        self.in_h + 2 * self.pad + 1 - self.kernel
    }
    pub fn out_w(&self) -> usize {
        self.in_w + 2 * self.pad + 1 - self.kernel
    }
}

/// out[n,co,oy,ox] = b[co] + sum_{ci,ky,kx} w[co,ci,ky,kx] * x[n,ci,oy+ky-p,ox+kx-p]
pub fn conv2d(x: &[f64], w: &[f64], b: &[f64], out: &mut [f64], dims: ConvDims) {
    let ConvDims { batch, in_ch, in_h, in_w, out_ch, kernel, pad } = dims;
    let (oh, ow) = (dims.out_h(), dims.out_w());
    for n in 0..batch {
        for co in 0..out_ch {
            let out_plane = &mut out[(n * out_ch + co) * oh * ow..(n * out_ch + co + 1) * oh * ow];
            out_plane.fill(b[co]);
            for ci in 0..in_ch {
                let x_plane = &x[(n * in_ch + ci) * in_h * in_w..(n * in_ch + ci + 1) * in_h * in_w];
                for ky in 0..kernel {
                    for kx in 0..kernel {
                        let wv = w[((co * in_ch + ci) * kernel + ky) * kernel + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        // valid output range for this kernel offset
                        let oy_lo = pad.saturating_sub(ky);
                        let oy_hi = (in_h + pad - ky).min(oh);
                        let ox_lo = pad.saturating_sub(kx);
                        let ox_hi = (in_w + pad - kx).min(ow);
                        for oy in oy_lo..oy_hi {
                            let iy = oy + ky - pad;
                            let x_row = &x_plane[iy * in_w..(iy + 1) * in_w];
                            let o_row = &mut out_plane[oy * ow..(oy + 1) * ow];
                            let shift = kx as isize - pad as isize;
                            for ox in ox_lo..ox_hi {
                                o_row[ox] += wv * x_row[(ox as isize + shift) as usize];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradients of conv2d w.r.t. input, weights, and bias.
pub fn conv2d_grad(
    x: &[f64],
    w: &[f64],
    g: &[f64],
    gx: &mut [f64],
    gw: &mut [f64],
    gb: &mut [f64],
    dims: ConvDims,
) {
    let ConvDims { batch, in_ch, in_h, in_w, out_ch, kernel, pad } = dims;
    let (oh, ow) = (dims.out_h(), dims.out_w());
    for n in 0..batch {
        for co in 0..out_ch {
            let g_plane = &g[(n * out_ch + co) * oh * ow..(n * out_ch + co + 1) * oh * ow];
            let mut gb_acc = 0.0;
            for v in g_plane {
                gb_acc += v;
            }
            gb[co] += gb_acc;
            for ci in 0..in_ch {
                let x_plane = &x[(n * in_ch + ci) * in_h * in_w..(n * in_ch + ci + 1) * in_h * in_w];
                let gx_plane =
                    &mut gx[(n * in_ch + ci) * in_h * in_w..(n * in_ch + ci + 1) * in_h * in_w];
                for ky in 0..kernel {
                    for kx in 0..kernel {
                        let w_idx = ((co * in_ch + ci) * kernel + ky) * kernel + kx;
                        let wv = w[w_idx];
                        let oy_lo = pad.saturating_sub(ky);
                        let oy_hi = (in_h + pad - ky).min(oh);
                        let ox_lo = pad.saturating_sub(kx);
                        let ox_hi = (in_w + pad - kx).min(ow);
                        let shift = kx as isize - pad as isize;
                        let mut gw_acc = 0.0;
                        for oy in oy_lo..oy_hi {
                            let iy = oy + ky - pad;
                            let g_row = &g_plane[oy * ow..(oy + 1) * ow];
                            let x_row = &x_plane[iy * in_w..(iy + 1) * in_w];
                            let gx_row = &mut gx_plane[iy * in_w..(iy + 1) * in_w];
                            for ox in ox_lo..ox_hi {
                                let ix = (ox as isize + shift) as usize;
                                gw_acc += g_row[ox] * x_row[ix];
                                gx_row[ix] += wv * g_row[ox];
                            }
                        }
                        gw[w_idx] += gw_acc;
                    }
                }
            }
        }
    }
}

/// 2x2 max pool, stride 2. Returns per-output argmax (linear index into the
/// input plane) with ties resolved to the lowest linear index.
pub fn maxpool2x2(
    x: &[f64],
    out: &mut [f64],
    argmax: &mut [usize],
    planes: usize,
    in_h: usize,
    in_w: usize,
) {
    let (oh, ow) = (in_h / 2, in_w / 2);
    for p in 0..planes {
        let x_plane = &x[p * in_h * in_w..(p + 1) * in_h * in_w];
        let base_out = p * oh * ow;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_idx = (2 * oy) * in_w + 2 * ox;
                let mut best = x_plane[best_idx];
                // fixed scan order == increasing linear index, so strict >
                // keeps the first maximal element on ties
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = (2 * oy + dy) * in_w + (2 * ox + dx);
                    if x_plane[idx] > best {
                        best = x_plane[idx];
                        best_idx = idx;
                    }
                }
                out[base_out + oy * ow + ox] = best;
                argmax[base_out + oy * ow + ox] = p * in_h * in_w + best_idx;
            }
        }
    }
}
