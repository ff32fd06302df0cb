//! Low-level kernels: patch extraction for convolutions and a thin sgemm wrapper.

/// Sliding-window geometry of a convolution from an `in_h × in_w` image to an
/// `out_h × out_w` grid. Transposed convolutions reuse the geometry of the
/// convolution they are the adjoint of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Geometry {
    pub channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

impl Geometry {
    /// "same" padding: output is `ceil(in / stride)`, any odd padding goes to the bottom/right.
    pub fn same(channels: usize, in_h: usize, in_w: usize, kernel: usize, stride: usize) -> Self {
        let (out_h, pad_top) = same_axis(in_h, kernel, stride);
        let (out_w, pad_left) = same_axis(in_w, kernel, stride);
        Self {
            channels,
            in_h,
            in_w,
            out_h,
            out_w,
            kernel,
            stride,
            pad_top,
            pad_left,
        }
    }

    pub fn rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn cols(&self) -> usize {
        self.out_h * self.out_w
    }
}

pub(crate) fn same_output(size: usize, stride: usize) -> usize {
    size.div_ceil(stride)
}

fn same_axis(size: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = same_output(size, stride);
    let needed = (out.saturating_sub(1)) * stride + kernel;
    let total = needed.saturating_sub(size);
    (out, total / 2)
}

/// Unfolds `input` (C×H×W) into a `(C·k·k) × (out_h·out_w)` row-major matrix.
pub(crate) fn im2col(input: &[f32], g: &Geometry, cols: &mut [f32]) {
    debug_assert_eq!(input.len(), g.channels * g.in_h * g.in_w);
    debug_assert_eq!(cols.len(), g.rows() * g.cols());
    let k = g.kernel;
    let ncols = g.cols();
    for c in 0..g.channels {
        let plane = &input[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * ncols..(row + 1) * ncols];
                for oy in 0..g.out_h {
                    let line = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    let iy = (oy * g.stride + ky) as isize - g.pad_top as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad_left as isize;
                        *v = if ix < 0 || ix >= g.in_w as isize {
                            0.0
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters the patch matrix back, accumulating into `out` (C×H×W).
pub(crate) fn col2im(cols: &[f32], g: &Geometry, out: &mut [f32]) {
    debug_assert_eq!(out.len(), g.channels * g.in_h * g.in_w);
    debug_assert_eq!(cols.len(), g.rows() * g.cols());
    let k = g.kernel;
    let ncols = g.cols();
    for c in 0..g.channels {
        let plane = &mut out[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * ncols..(row + 1) * ncols];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.pad_top as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    let line = &src[oy * g.out_w..(oy + 1) * g.out_w];
                    for (ox, &v) in line.iter().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad_left as isize;
                        if ix >= 0 && ix < g.in_w as isize {
                            dst[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Row-major matrix operand, optionally read transposed.
#[derive(Clone, Copy)]
pub(crate) struct Mat<'a> {
    pub data: &'a [f32],
    pub rows: usize,
    pub cols: usize,
    pub transposed: bool,
}

impl<'a> Mat<'a> {
    pub fn new(data: &'a [f32], rows: usize, cols: usize) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self {
            data,
            rows,
            cols,
            transposed: false,
        }
    }

    pub fn t(self) -> Self {
        Self {
            transposed: !self.transposed,
            ..self
        }
    }

    fn logical(&self) -> (usize, usize) {
        if self.transposed {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.cols as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

/// `c = a · b + beta · c` with `c` row-major `m × n`.
pub(crate) fn gemm(a: Mat<'_>, b: Mat<'_>, beta: f32, c: &mut [f32]) {
    let (m, k) = a.logical();
    let (kb, n) = b.logical();
    assert_eq!(k, kb, "inner dimensions differ");
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: the operand slices were checked to hold exactly rows·cols elements and
    // the strides describe those dense row-major buffers; `c` holds m·n elements.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    fn transpose(x: &[f32], rows: usize, cols: usize) -> Vec<f32> {
        let mut t = vec![0.0; x.len()];
        for r in 0..rows {
            for c in 0..cols {
                t[c * rows + r] = x[r * cols + c];
            }
        }
        t
    }

    #[test]
    fn gemm_matches_naive_product_with_transposes() {
        let (m, k, n) = (3, 5, 4);
        let a: Vec<f32> = (0..m * k).map(|v| v as f32 * 0.5 - 3.0).collect();
        let b: Vec<f32> = (0..k * n).map(|v| (v % 7) as f32 - 2.0).collect();
        let want = naive(&a, &b, m, k, n);

        let mut c = vec![0.0; m * n];
        gemm(Mat::new(&a, m, k), Mat::new(&b, k, n), 0.0, &mut c);
        assert_eq!(c, want);

        let at = transpose(&a, m, k);
        let bt = transpose(&b, k, n);
        let mut c2 = vec![0.0; m * n];
        gemm(
            Mat::new(&at, k, m).t(),
            Mat::new(&bt, n, k).t(),
            0.0,
            &mut c2,
        );
        assert_eq!(c2, want);
    }

    #[test]
    fn same_padding_halves_even_sizes() {
        let g = Geometry::same(1, 256, 256, 4, 2);
        assert_eq!((g.out_h, g.pad_top), (128, 1));
        let g = Geometry::same(1, 16, 16, 4, 1);
        assert_eq!((g.out_h, g.pad_top), (16, 1));
        let g = Geometry::same(1, 2, 2, 4, 2);
        assert_eq!((g.out_h, g.pad_top), (1, 1));
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)> for arbitrary x, y.
        let g = Geometry::same(2, 5, 6, 4, 2);
        let x: Vec<f32> = (0..2 * 5 * 6)
            .map(|v| ((v * 37) % 11) as f32 - 5.0)
            .collect();
        let y: Vec<f32> = (0..g.rows() * g.cols())
            .map(|v| ((v * 13) % 7) as f32 - 3.0)
            .collect();
        let mut cols = vec![0.0; g.rows() * g.cols()];
        im2col(&x, &g, &mut cols);
        let mut back = vec![0.0; x.len()];
        col2im(&y, &g, &mut back);
        let lhs: f32 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f32 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert_eq!(lhs, rhs);
    }
}
