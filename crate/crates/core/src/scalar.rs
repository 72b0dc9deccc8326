//! The floating-point scalar abstraction every kernel in this crate is generic over.
//!
//! Arithmetic comes from [`num_traits::Float`]. The two heavy kernels (matrix
//! products and the SVD) are hooks on the trait so that each concrete type can
//! route them to an optimized backend.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use nalgebra::DMatrix;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Raw output of the backend SVD: column-major `u` (m×r), singular values
/// (unsorted), and optionally column-major `vt` (r×n), with r = min(m, n).
#[derive(Debug, Clone)]
pub struct RawSvd<T> {
    pub u: Vec<T>,
    pub singular_values: Vec<T>,
    pub vt: Option<Vec<T>>,
}

/// Real scalar usable by the reduced-order-model kernels.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// `C ← alpha·op(A)·B + beta·C` for column-major operands, where `op(A)`
    /// is `A` (m×k, stored with leading dimension m) or, with `transpose_a`,
    /// `Aᵀ` for `A` stored as k×m.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        transpose_a: bool,
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        b: &[Self],
        beta: Self,
        c: &mut [Self],
    );

    /// Thin SVD of a column-major `rows × cols` matrix.
    fn svd(rows: usize, cols: usize, data: &[Self], want_vt: bool) -> RawSvd<Self>;

    /// Lossless-enough conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            fn gemm(
                transpose_a: bool,
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                b: &[Self],
                beta: Self,
                c: &mut [Self],
            ) {
                assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
                if m == 0 || n == 0 {
                    return;
                }
                // Row/column strides of op(A) in column-major storage.
                let (rsa, csa) = if transpose_a {
                    (k as isize, 1)
                } else {
                    (1, m as isize)
                };
                // SAFETY: bounds asserted above; strides address inside the slices.
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
                        1,
                        k as isize,
                        beta,
                        c.as_mut_ptr(),
                        1,
                        m as isize,
                    );
                }
            }

            fn svd(rows: usize, cols: usize, data: &[Self], want_vt: bool) -> RawSvd<Self> {
                let m = DMatrix::<$t>::from_column_slice(rows, cols, data);
                let svd = m.svd(true, want_vt);
                RawSvd {
                    u: svd
                        .u
                        .expect("left singular vectors requested")
                        .as_slice()
                        .to_vec(),
                    singular_values: svd.singular_values.as_slice().to_vec(),
                    vt: svd.v_t.map(|vt| vt.as_slice().to_vec()),
                }
            }
        }
    };
}

impl_scalar!(f64, matrixmultiply::dgemm);
impl_scalar!(f32, matrixmultiply::sgemm);
