//! Strided matrix products on flat slices, used by the model's hot loops.
//!
//! All three variants compute `C[m×n] (+)= op(A) · op(B)` with row-major
//! operands addressed by a leading stride, so sub-blocks of wider matrices
//! (e.g. the left half of a `[H×2F]` weight) need no copy. The kernel is
//! single-threaded and its blocking is fixed, so results are bit-reproducible.

/// Operand view: `rows × cols` block starting at `data[0]` with row stride `ld`.
#[derive(Clone, Copy)]
pub struct Mat<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub ld: usize,
}

impl<'a> Mat<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize, ld: usize) -> Self {
        Self { data, rows, cols, ld }
    }

    /// Dense row-major `rows × cols`.
    pub fn dense(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self::new(data, rows, cols, cols)
    }

    fn check(&self) {
        assert!(self.cols <= self.ld || self.rows <= 1, "row stride shorter than row");
        if self.rows > 0 && self.cols > 0 {
            assert!(
                (self.rows - 1) * self.ld + self.cols <= self.data.len(),
                "matrix view exceeds its slice"
            );
        }
    }
}

pub struct MatMut<'a> {
    pub data: &'a mut [f64],
    pub rows: usize,
    pub cols: usize,
    pub ld: usize,
}

impl<'a> MatMut<'a> {
    pub fn new(data: &'a mut [f64], rows: usize, cols: usize, ld: usize) -> Self {
        Self { data, rows, cols, ld }
    }

    pub fn dense(data: &'a mut [f64], rows: usize, cols: usize) -> Self {
        Self::new(data, rows, cols, cols)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Op {
    N,
    T,
}

fn run(a: Mat, op_a: Op, b: Mat, op_b: Op, c: MatMut, accumulate: bool) {
    a.check();
    b.check();
    let (m, k) = match op_a {
        Op::N => (a.rows, a.cols),
        Op::T => (a.cols, a.rows),
    };
    let (kb, n) = match op_b {
        Op::N => (b.rows, b.cols),
        Op::T => (b.cols, b.rows),
    };
    assert_eq!(k, kb, "inner extents disagree");
    assert_eq!((c.rows, c.cols), (m, n), "output block has the wrong shape");
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.cols <= c.ld || c.rows <= 1);
    assert!((m - 1) * c.ld + n <= c.data.len(), "output view exceeds its slice");
    if k == 0 {
        if !accumulate {
            for r in 0..m {
                c.data[r * c.ld..r * c.ld + n].fill(0.0);
            }
        }
        return;
    }
    let (rsa, csa) = match op_a {
        Op::N => (a.ld as isize, 1),
        Op::T => (1, a.ld as isize),
    };
    let (rsb, csb) = match op_b {
        Op::N => (b.ld as isize, 1),
        Op::T => (1, b.ld as isize),
    };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: every view was bounds-checked above against its slice, the
    // output is uniquely borrowed and does not alias the inputs.
    unsafe {
        matrixmultiply::dgemm(
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
            c.data.as_mut_ptr(),
            c.ld as isize,
            1,
        );
    }
}

/// `C (+)= A · B`.
pub fn gemm_nn(a: Mat, b: Mat, c: MatMut, accumulate: bool) {
    run(a, Op::N, b, Op::N, c, accumulate)
}

/// `C (+)= A · Bᵀ`.
pub fn gemm_nt(a: Mat, b: Mat, c: MatMut, accumulate: bool) {
    run(a, Op::N, b, Op::T, c, accumulate)
}

/// `C (+)= Aᵀ · B`.
pub fn gemm_tn(a: Mat, b: Mat, c: MatMut, accumulate: bool) {
    run(a, Op::T, b, Op::N, c, accumulate)
}
