//! Thin safe wrapper over `matrixmultiply::dgemm` for row-major buffers.

/// A row-major matrix view with explicit row stride, used for column sub-blocks.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub stride: usize,
}

impl<'a> MatRef<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            stride: cols,
        }
    }

    /// Columns `[start, start + cols)` of a row-major matrix with `stride` columns.
    pub fn block(data: &'a [f64], rows: usize, stride: usize, start: usize, cols: usize) -> Self {
        Self {
            data: &data[start..],
            rows,
            cols,
            stride,
        }
    }

    fn check(&self) {
        if self.rows > 0 && self.cols > 0 {
            assert!((self.rows - 1) * self.stride + self.cols <= self.data.len());
        }
    }
}

pub(crate) struct MatMut<'a> {
    pub data: &'a mut [f64],
    pub rows: usize,
    pub cols: usize,
    pub stride: usize,
}

impl<'a> MatMut<'a> {
    pub fn new(data: &'a mut [f64], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            stride: cols,
        }
    }

    pub fn block(data: &'a mut [f64], rows: usize, stride: usize, start: usize, cols: usize) -> Self {
        Self {
            data: &mut data[start..],
            rows,
            cols,
            stride,
        }
    }
}

/// `c = a_op * b_op + beta * c`, where `a_op` is `a` or its transpose.
pub(crate) fn gemm(a: MatRef<'_>, trans_a: bool, b: MatRef<'_>, trans_b: bool, beta: f64, c: MatMut<'_>) {
    a.check();
    b.check();
    let (m, k) = if trans_a { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (kb, n) = if trans_b { (b.cols, b.rows) } else { (b.rows, b.cols) };
    assert_eq!(k, kb, "gemm inner dimension");
    assert_eq!((m, n), (c.rows, c.cols), "gemm output dimension");
    if m > 0 && n > 0 {
        assert!((m - 1) * c.stride + n <= c.data.len());
    }
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for i in 0..m {
            for v in &mut c.data[i * c.stride..i * c.stride + n] {
                *v *= beta;
            }
        }
        return;
    }
    if beta == 0.0 {
        for i in 0..m {
            c.data[i * c.stride..i * c.stride + n].fill(0.0);
        }
    }
    let (rsa, csa) = if trans_a { (1, a.stride) } else { (a.stride, 1) };
    let (rsb, csb) = if trans_b { (1, b.stride) } else { (b.stride, 1) };
    // SAFETY: bounds for every operand were asserted above against the
    // strides handed to dgemm.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa as isize,
            csa as isize,
            b.data.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.data.as_mut_ptr(),
            c.stride as isize,
            1,
        );
    }
}
