//! Channel-major (`[channel][y][x]`) convolution and pooling kernels for
//! square feature maps.

use alloc::vec;
use alloc::vec::Vec;

pub(crate) const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

/// Column range `x` for which `x + dx` stays inside `0..side`.
#[inline]
fn span(side: usize, d: isize) -> (usize, usize) {
    let lo = if d < 0 { (-d) as usize } else { 0 };
    let hi = if d > 0 { side - d as usize } else { side };
    (lo, hi)
}

/// 3x3 convolution (cross-correlation) with one pixel of zero padding, so the
/// output keeps the input side. Weights are `[out][in][ky][kx]`.
pub(crate) fn conv3x3_forward(input: &[f64], in_ch: usize, side: usize, weights: &[f64], bias: &[f64]) -> Vec<f64> {
    let out_ch = bias.len();
    let area = side * side;
    let mut out = vec![0.0; out_ch * area];
    for (o, plane) in out.chunks_exact_mut(area).enumerate() {
        plane.fill(bias[o]);
        for c in 0..in_ch {
            let src = &input[c * area..(c + 1) * area];
            let taps = &weights[(o * in_ch + c) * TAPS..(o * in_ch + c + 1) * TAPS];
            for (t, &w) in taps.iter().enumerate() {
                let (dy, dx) = ((t / KERNEL) as isize - 1, (t % KERNEL) as isize - 1);
                let (x0, x1) = span(side, dx);
                let (y0, y1) = span(side, dy);
                for y in y0..y1 {
                    let sy = (y as isize + dy) as usize;
                    let dst = &mut plane[y * side + x0..y * side + x1];
                    let s = &src[sy * side + (x0 as isize + dx) as usize..sy * side + (x1 as isize + dx) as usize];
                    for (d, v) in dst.iter_mut().zip(s) {
                        *d += w * v;
                    }
                }
            }
        }
    }
    out
}

/// Accumulate weight and bias gradients of [`conv3x3_forward`], and the input
/// gradient when `grad_input` is given.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv3x3_backward(
    input: &[f64],
    in_ch: usize,
    side: usize,
    weights: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    mut grad_input: Option<&mut [f64]>,
) {
    let area = side * side;
    for (o, g_plane) in grad_out.chunks_exact(area).enumerate() {
        grad_b[o] += g_plane.iter().sum::<f64>();
        for c in 0..in_ch {
            let src = &input[c * area..(c + 1) * area];
            let base = (o * in_ch + c) * TAPS;
            for t in 0..TAPS {
                let (dy, dx) = ((t / KERNEL) as isize - 1, (t % KERNEL) as isize - 1);
                let (x0, x1) = span(side, dx);
                let (y0, y1) = span(side, dy);
                let w = weights[base + t];
                let mut acc = 0.0;
                for y in y0..y1 {
                    let sy = (y as isize + dy) as usize;
                    let g = &g_plane[y * side + x0..y * side + x1];
                    let s_lo = sy * side + (x0 as isize + dx) as usize;
                    let s_hi = sy * side + (x1 as isize + dx) as usize;
                    acc += g.iter().zip(&src[s_lo..s_hi]).map(|(a, b)| a * b).sum::<f64>();
                    if let Some(gi) = grad_input.as_deref_mut() {
                        let dst = &mut gi[c * area + s_lo..c * area + s_hi];
                        for (d, gv) in dst.iter_mut().zip(g) {
                            *d += w * gv;
                        }
                    }
                }
                grad_w[base + t] += acc;
            }
        }
    }
}

pub(crate) fn relu(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| v.max(0.0)).collect()
}

/// 2x2 max pooling with stride 2. Returns the pooled maps and, per output,
/// the input index that won (first maximum in row-major window order).
pub(crate) fn maxpool2(input: &[f64], channels: usize, side: usize) -> (Vec<f64>, Vec<u32>) {
    let half = side / 2;
    let mut out = Vec::with_capacity(channels * half * half);
    let mut arg = Vec::with_capacity(channels * half * half);
    for c in 0..channels {
        let base = c * side * side;
        for y in 0..half {
            for x in 0..half {
                let i0 = base + 2 * y * side + 2 * x;
                let mut best = i0;
                for i in [i0 + 1, i0 + side, i0 + side + 1] {
                    if input[i] > input[best] {
                        best = i;
                    }
                }
                out.push(input[best]);
                arg.push(best as u32);
            }
        }
    }
    (out, arg)
}

/// Smallest distance, over all 2x2 windows of the pre-activations `z`, between
/// the window maximum and the next candidate for the pooled output: the
/// runner-up, or zero where ReLU clips it.
pub(crate) fn pool_margin(z: &[f64], channels: usize, side: usize) -> f64 {
    let half = side / 2;
    let mut margin = f64::INFINITY;
    for c in 0..channels {
        let base = c * side * side;
        for y in 0..half {
            for x in 0..half {
                let i0 = base + 2 * y * side + 2 * x;
                let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for i in [i0, i0 + 1, i0 + side, i0 + side + 1] {
                    if z[i] > first {
                        second = first;
                        first = z[i];
                    } else if z[i] > second {
                        second = z[i];
                    }
                }
                margin = margin.min((first - second.max(0.0)).abs());
            }
        }
    }
    margin
}

/// Route pooled gradients back to the winning inputs, gated by the ReLU
/// derivative of the pre-activation `z`.
pub(crate) fn unpool_relu(grad_pooled: &[f64], argmax: &[u32], z: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; z.len()];
    for (&g, &i) in grad_pooled.iter().zip(argmax) {
        let i = i as usize;
        if z[i] > 0.0 {
            grad[i] += g;
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    #[test]
    fn pool_margin_cases() {
        // Positive winner and runner-up, positive winner alone, all clipped.
        let z = [3.0, 1.0, -2.0, 0.5];
        assert_eq!(super::pool_margin(&z, 1, 2), 2.0);
        let z = [0.25, -1.0, -2.0, -0.5];
        assert_eq!(super::pool_margin(&z, 1, 2), 0.25);
        let z = [-0.75, -1.0, -2.0, -0.5];
        assert_eq!(super::pool_margin(&z, 1, 2), 0.5);
        let z = [1.0, 1.0, 0.0, 0.0];
        assert_eq!(super::pool_margin(&z, 1, 2), 0.0);
    }

    use super::*;

    fn naive_conv(input: &[f64], in_ch: usize, side: usize, w: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; b.len() * side * side];
        for o in 0..b.len() {
            for y in 0..side as isize {
                for x in 0..side as isize {
                    let mut acc = b[o];
                    for c in 0..in_ch {
                        for ky in 0..3isize {
                            for kx in 0..3isize {
                                let (sy, sx) = (y + ky - 1, x + kx - 1);
                                if sy < 0 || sx < 0 || sy >= side as isize || sx >= side as isize {
                                    continue;
                                }
                                acc += w[((o * in_ch + c) * 3 + ky as usize) * 3 + kx as usize]
                                    * input[(c * side + sy as usize) * side + sx as usize];
                            }
                        }
                    }
                    out[(o * side + y as usize) * side + x as usize] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive_loops() {
        let (in_ch, side) = (2, 5);
        let input: Vec<f64> = (0..in_ch * side * side)
            .map(|i| ((i * 37) % 17) as f64 / 17.0 - 0.4)
            .collect();
        let w: Vec<f64> = (0..3 * in_ch * 9)
            .map(|i| ((i * 13) % 11) as f64 / 11.0 - 0.5)
            .collect();
        let b = [0.1, -0.2, 0.3];
        let fast = conv3x3_forward(&input, in_ch, side, &w, &b);
        let slow = naive_conv(&input, in_ch, side, &w, &b);
        for (a, e) in fast.iter().zip(&slow) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn pool_picks_first_maximum() {
        let input = [1.0, 1.0, 0.0, 1.0];
        let (out, arg) = maxpool2(&input, 1, 2);
        assert_eq!(out, vec![1.0]);
        assert_eq!(arg, vec![0]);
    }
}
