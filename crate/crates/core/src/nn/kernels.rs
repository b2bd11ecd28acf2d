use super::Scalar;

const LANES: usize = 8;

/// Dot product with eight independent accumulators. The summation order is
/// fixed, so results are reproducible across runs and thread counts.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [S::zero(); LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..LANES {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = S::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy<S: Scalar>(alpha: S, x: &[S], y: &mut [S]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out += W x` for row-major `W` with `out.len()` rows.
pub fn matvec_acc<S: Scalar>(out: &mut [S], w: &[S], x: &[S]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += Wᵀ y` for row-major `W` with `y.len()` rows.
pub fn matvec_t_acc<S: Scalar>(out: &mut [S], w: &[S], y: &[S]) {
    let cols = out.len();
    debug_assert_eq!(w.len(), y.len() * cols);
    for (&yr, row) in y.iter().zip(w.chunks_exact(cols)) {
        if yr != S::zero() {
            axpy(yr, row, out);
        }
    }
}

/// `g += y xᵀ`
pub fn outer_acc<S: Scalar>(g: &mut [S], y: &[S], x: &[S]) {
    let cols = x.len();
    debug_assert_eq!(g.len(), y.len() * cols);
    for (&yr, row) in y.iter().zip(g.chunks_exact_mut(cols)) {
        if yr != S::zero() {
            axpy(yr, x, row);
        }
    }
}

#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    // the two branches avoid overflow in exp for large |x|
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}
