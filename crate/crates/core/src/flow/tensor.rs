//! Scalar abstraction and row-major matrix helpers over `matrixmultiply`.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

pub trait Real: Float + Default + Debug + Send + Sync + AddAssign + SubAssign + MulAssign + DivAssign + Sum + 'static {
    fn of(v: f64) -> Self;

    /// `c = alpha·a·b + beta·c` with explicit element strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], rsa: isize, csa: isize, b: &[Self], rsb: isize, csb: isize, beta: Self, c: &mut [Self], rsc: isize, csc: isize);
}

macro_rules! real_impl {
    ($t:ty, $f:ident) => {
        impl Real for $t {
            fn of(v: f64) -> Self {
                v as $t
            }

            fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], rsa: isize, csa: isize, b: &[Self], rsb: isize, csb: isize, beta: Self, c: &mut [Self], rsc: isize, csc: isize) {
                if m == 0 || n == 0 {
                    return;
                }
                let last = |r: usize, c: usize, rs: isize, cs: isize| (r as isize - 1) * rs + (c as isize - 1) * cs;
                if k > 0 {
                    assert!(last(m, k, rsa, csa) < a.len() as isize && last(k, n, rsb, csb) < b.len() as isize);
                }
                assert!(last(m, n, rsc, csc) < c.len() as isize);
                // SAFETY: the asserts above bound every index the kernel touches.
                unsafe {
                    matrixmultiply::$f(m, k, n, alpha, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), rsc, csc);
                }
            }
        }
    };
}

real_impl!(f32, sgemm);
real_impl!(f64, dgemm);

/// `c (m×n) = op(a) · op(b) (+ c if accumulate)`, all row-major. `ta` means
/// `a` is stored `k×m`; `tb` means `b` is stored `n×k`.
#[allow(clippy::too_many_arguments)]
pub fn matmul<T: Real>(a: &[T], ta: bool, b: &[T], tb: bool, c: &mut [T], m: usize, k: usize, n: usize, accumulate: bool) {
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { T::one() } else { T::zero() };
    T::gemm(m, k, n, T::one(), a, rsa, csa, b, rsb, csb, beta, c, n as isize, 1);
}

/// Add `bias` to every row of the `rows×bias.len()` matrix `x`.
pub fn add_row<T: Real>(x: &mut [T], bias: &[T]) {
    for row in x.chunks_exact_mut(bias.len()) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// Accumulate column sums of `x` into `out`.
pub fn col_sum<T: Real>(x: &[T], out: &mut [T]) {
    for row in x.chunks_exact(out.len()) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

pub fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

pub fn silu<T: Real>(x: T) -> T {
    x * sigmoid(x)
}

pub fn silu_grad<T: Real>(x: T) -> T {
    let s = sigmoid(x);
    s * (T::one() + x * (T::one() - s))
}

const GELU_K: f64 = 0.797_884_560_802_865_4;
const GELU_C: f64 = 0.044_715;

/// Tanh-approximated GELU.
pub fn gelu<T: Real>(x: T) -> T {
    let inner = T::of(GELU_K) * (x + T::of(GELU_C) * x * x * x);
    T::of(0.5) * x * (T::one() + inner.tanh())
}

pub fn gelu_grad<T: Real>(x: T) -> T {
    let inner = T::of(GELU_K) * (x + T::of(GELU_C) * x * x * x);
    let th = inner.tanh();
    let dinner = T::of(GELU_K) * (T::one() + T::of(3.0 * GELU_C) * x * x);
    T::of(0.5) * (T::one() + th) + T::of(0.5) * x * (T::one() - th * th) * dinner
}
