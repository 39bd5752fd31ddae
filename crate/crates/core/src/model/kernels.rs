//! Dense numeric kernels for the recurrent U-Net: im2col convolution,
//! 2x2 transposed convolution, spatial max-pooling and their adjoints.
//!
//! Feature maps are row-major `[channels, height * width]` slices.

use std::fmt::Debug;

use num_traits::Float;

/// Scalar type the network can be evaluated in.
pub trait Real: Float + Debug + Default + Send + Sync + 'static + std::iter::Sum {
    /// `c = alpha * op(a) * op(b) + beta * c` with explicit strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );

    fn from_f32(v: f32) -> Self;
    fn to_f32(self) -> f32;
    fn c(v: f64) -> Self {
        Self::from(v).unwrap()
    }
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                let a_end = extent(m, k, rsa, csa);
                let b_end = extent(k, n, rsb, csb);
                let c_end = extent(m, n, rsc, csc);
                assert!(a.len() >= a_end && b.len() >= b_end && c.len() >= c_end);
                // SAFETY: the asserts above bound every strided access.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    );
                }
            }

            fn from_f32(v: f32) -> Self {
                v as $t
            }

            fn to_f32(self) -> f32 {
                self as f32
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

fn extent(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    ((rows - 1) as isize * rs + (cols - 1) as isize * cs) as usize + 1
}

/// `c[m,n] (+)= a[m,k] * b[k,n]`, all row-major contiguous.
pub fn matmul<R: Real>(m: usize, k: usize, n: usize, a: &[R], b: &[R], c: &mut [R], accumulate: bool) {
    let beta = if accumulate { R::one() } else { R::zero() };
    R::gemm(m, k, n, R::one(), a, k as isize, 1, b, n as isize, 1, beta, c, n as isize, 1);
}

/// `c[m,n] (+)= a[k,m]^T * b[k,n]`.
pub fn matmul_tn<R: Real>(m: usize, k: usize, n: usize, a: &[R], b: &[R], c: &mut [R], accumulate: bool) {
    let beta = if accumulate { R::one() } else { R::zero() };
    R::gemm(m, k, n, R::one(), a, 1, m as isize, b, n as isize, 1, beta, c, n as isize, 1);
}

/// `c[m,n] (+)= a[m,k] * b[n,k]^T`.
pub fn matmul_nt<R: Real>(m: usize, k: usize, n: usize, a: &[R], b: &[R], c: &mut [R], accumulate: bool) {
    let beta = if accumulate { R::one() } else { R::zero() };
    R::gemm(m, k, n, R::one(), a, k as isize, 1, b, 1, k as isize, beta, c, n as isize, 1);
}

/// 3x3, stride 1, zero padding 1. `col` is `[cin * 9, h * w]`.
pub fn im2col3<R: Real>(input: &[R], cin: usize, h: usize, w: usize, col: &mut [R]) {
    let hw = h * w;
    debug_assert_eq!(input.len(), cin * hw);
    debug_assert_eq!(col.len(), cin * 9 * hw);
    for ci in 0..cin {
        let src = &input[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    let dst = &mut row[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        dst.fill(R::zero());
                        continue;
                    }
                    let srow = &src[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            dst[0] = R::zero();
                            dst[1..].copy_from_slice(&srow[..w - 1]);
                        }
                        1 => dst.copy_from_slice(srow),
                        _ => {
                            dst[..w - 1].copy_from_slice(&srow[1..]);
                            dst[w - 1] = R::zero();
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col3`]: accumulates `col` back into `grad_input`.
pub fn col2im3<R: Real>(col: &[R], cin: usize, h: usize, w: usize, grad_input: &mut [R]) {
    let hw = h * w;
    for ci in 0..cin {
        let dst = &mut grad_input[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let drow = &mut dst[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            for (d, &s) in drow[..w - 1].iter_mut().zip(&src[1..]) {
                                *d = *d + s;
                            }
                        }
                        1 => {
                            for (d, &s) in drow.iter_mut().zip(src) {
                                *d = *d + s;
                            }
                        }
                        _ => {
                            for (d, &s) in drow[1..].iter_mut().zip(&src[..w - 1]) {
                                *d = *d + s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adds `bias[c]` to every pixel of channel `c`.
pub fn add_bias<R: Real>(out: &mut [R], bias: &[R], hw: usize) {
    for (chan, &b) in out.chunks_exact_mut(hw).zip(bias) {
        for v in chan {
            *v = *v + b;
        }
    }
}

/// Accumulates per-channel sums of `grad` into `grad_bias`.
pub fn bias_grad<R: Real>(grad: &[R], hw: usize, grad_bias: &mut [R]) {
    for (chan, gb) in grad.chunks_exact(hw).zip(grad_bias.iter_mut()) {
        *gb = *gb + chan.iter().copied().sum::<R>();
    }
}

pub fn relu_inplace<R: Real>(v: &mut [R]) {
    for x in v {
        if *x < R::zero() {
            *x = R::zero();
        }
    }
}

/// Zeroes `grad` where the ReLU output was not positive.
pub fn relu_backward<R: Real>(out: &[R], grad: &mut [R]) {
    for (g, &o) in grad.iter_mut().zip(out) {
        if o <= R::zero() {
            *g = R::zero();
        }
    }
}

/// 2x2 stride-2 max-pooling. Returns pooled map and source offsets.
pub fn maxpool2<R: Real>(input: &[R], c: usize, h: usize, w: usize) -> (Vec<R>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![R::zero(); c * oh * ow];
    let mut arg = vec![0u32; c * oh * ow];
    for ci in 0..c {
        let base = ci * h * w;
        for y in 0..oh {
            for x in 0..ow {
                let mut best = base + 2 * y * w + 2 * x;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * y + dy) * w + 2 * x + dx;
                    if input[idx] > input[best] {
                        best = idx;
                    }
                }
                let o = ci * oh * ow + y * ow + x;
                out[o] = input[best];
                arg[o] = best as u32;
            }
        }
    }
    (out, arg)
}

pub fn maxpool2_backward<R: Real>(grad_out: &[R], arg: &[u32], grad_input: &mut [R]) {
    for (&g, &a) in grad_out.iter().zip(arg) {
        grad_input[a as usize] = grad_input[a as usize] + g;
    }
}

/// Transposed convolution, kernel 2, stride 2.
/// `weight` is `[cin, cout, 2, 2]`; output is `[cout, 2h, 2w]`.
pub fn up2_forward<R: Real>(
    input: &[R],
    cin: usize,
    h: usize,
    w: usize,
    weight: &[R],
    bias: &[R],
    cout: usize,
) -> Vec<R> {
    let hw = h * w;
    // tmp[cout * 4, hw] = weight[cin, cout * 4]^T * input[cin, hw]
    let mut tmp = vec![R::zero(); cout * 4 * hw];
    matmul_tn(cout * 4, cin, hw, weight, input, &mut tmp, false);
    let ow = 2 * w;
    let mut out = vec![R::zero(); cout * 4 * hw];
    for co in 0..cout {
        for d in 0..4 {
            let (dy, dx) = (d / 2, d % 2);
            let src = &tmp[(co * 4 + d) * hw..][..hw];
            for y in 0..h {
                for x in 0..w {
                    out[co * 4 * hw + (2 * y + dy) * ow + 2 * x + dx] = src[y * w + x] + bias[co];
                }
            }
        }
    }
    out
}

/// Returns `grad_input` and accumulates weight/bias gradients.
#[allow(clippy::too_many_arguments)]
pub fn up2_backward<R: Real>(
    input: &[R],
    cin: usize,
    h: usize,
    w: usize,
    weight: &[R],
    cout: usize,
    grad_out: &[R],
    grad_weight: &mut [R],
    grad_bias: &mut [R],
) -> Vec<R> {
    let hw = h * w;
    let ow = 2 * w;
    let mut gtmp = vec![R::zero(); cout * 4 * hw];
    for co in 0..cout {
        let mut bsum = R::zero();
        for d in 0..4 {
            let (dy, dx) = (d / 2, d % 2);
            let dst = &mut gtmp[(co * 4 + d) * hw..][..hw];
            for y in 0..h {
                for x in 0..w {
                    let g = grad_out[co * 4 * hw + (2 * y + dy) * ow + 2 * x + dx];
                    dst[y * w + x] = g;
                    bsum = bsum + g;
                }
            }
        }
        grad_bias[co] = grad_bias[co] + bsum;
    }
    // grad_weight[cin, cout * 4] += input[cin, hw] * gtmp[cout * 4, hw]^T
    matmul_nt(cin, hw, cout * 4, input, &gtmp, grad_weight, true);
    let mut grad_input = vec![R::zero(); cin * hw];
    matmul(cin, cout * 4, hw, weight, &gtmp, &mut grad_input, false);
    grad_input
}

pub fn sigmoid<R: Real>(z: R) -> R {
    if z >= R::zero() {
        R::one() / (R::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (R::one() + e)
    }
}
