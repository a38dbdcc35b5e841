//! Scalar abstraction shared by every numeric module.
//!
//! All signal-processing and network code is written against [`Scalar`], which
//! is implemented for `f32` (training speed) and `f64` (verification).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type usable throughout the pipeline.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Width tag written into diagnostics.
    const NAME: &'static str;

    /// `c ← a·b + beta·c` for strided row/column layouts.
    ///
    /// `a` is `m × k`, `b` is `k × n`, `c` is `m × n`; each layout is given as
    /// `(row_stride, col_stride)` in elements.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_layout: (usize, usize),
        b: &[Self],
        b_layout: (usize, usize),
        beta: Self,
        c: &mut [Self],
        c_layout: (usize, usize),
    );

    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

fn span(rows: usize, cols: usize, (rs, cs): (usize, usize)) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

fn check_gemm_bounds<T>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    a_layout: (usize, usize),
    b: &[T],
    b_layout: (usize, usize),
    c: &[T],
    c_layout: (usize, usize),
) {
    assert!(span(m, k, a_layout) <= a.len(), "gemm: lhs out of bounds");
    assert!(span(k, n, b_layout) <= b.len(), "gemm: rhs out of bounds");
    assert!(span(m, n, c_layout) <= c.len(), "gemm: output out of bounds");
}

/// While alive, the current thread flushes subnormal floating-point results
/// and inputs to zero. Saturated softmax gradients otherwise push whole
/// tensors into the subnormal range, where x86 arithmetic runs an order of
/// magnitude slower. The previous mode is restored on drop. A no-op on other
/// architectures.
pub struct FlushToZero {
    #[cfg(target_arch = "x86_64")]
    saved: u32,
    _not_send: std::marker::PhantomData<*const ()>,
}

#[cfg(target_arch = "x86_64")]
const MXCSR_FTZ_DAZ: u32 = (1 << 15) | (1 << 6);

impl FlushToZero {
    #[cfg(target_arch = "x86_64")]
    pub fn enable() -> Self {
        let mut saved: u32 = 0;
        // SAFETY: stmxcsr/ldmxcsr only read and write the SSE control word
        // through a valid pointer to a local u32.
        unsafe {
            std::arch::asm!("stmxcsr [{}]", in(reg) &mut saved as *mut u32, options(nostack));
            let flushed = saved | MXCSR_FTZ_DAZ;
            std::arch::asm!("ldmxcsr [{}]", in(reg) &flushed as *const u32, options(nostack, readonly));
        }
        Self {
            saved,
            _not_send: std::marker::PhantomData,
        }
    }

    #[cfg(not(target_arch = "x86_64"))]
    pub fn enable() -> Self {
        Self {
            _not_send: std::marker::PhantomData,
        }
    }
}

impl Drop for FlushToZero {
    fn drop(&mut self) {
        #[cfg(target_arch = "x86_64")]
        // SAFETY: restores the control word saved in `enable`.
        unsafe {
            std::arch::asm!("ldmxcsr [{}]", in(reg) &self.saved as *const u32, options(nostack, readonly));
        }
    }
}

macro_rules! impl_scalar {
    ($t:ty, $name:literal, $kernel:path) => {
        impl Scalar for $t {
            const NAME: &'static str = $name;

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                a_layout: (usize, usize),
                b: &[Self],
                b_layout: (usize, usize),
                beta: Self,
                c: &mut [Self],
                c_layout: (usize, usize),
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                check_gemm_bounds(m, k, n, a, a_layout, b, b_layout, c, c_layout);
                // SAFETY: every index the kernel touches lies inside the spans
                // checked above; strides fit in isize for any allocatable slice.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        a_layout.0 as isize,
                        a_layout.1 as isize,
                        b.as_ptr(),
                        b_layout.0 as isize,
                        b_layout.1 as isize,
                        beta,
                        c.as_mut_ptr(),
                        c_layout.0 as isize,
                        c_layout.1 as isize,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, "f32", matrixmultiply::sgemm);
impl_scalar!(f64, "f64", matrixmultiply::dgemm);
