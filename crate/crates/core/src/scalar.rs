use num_traits::{FromPrimitive, ToPrimitive};

/// Floating scalar the numerical kernels are generic over (f32 or f64).
///
/// `nalgebra::RealField` supplies the transcendental and comparison surface;
/// `num_traits::Float` is deliberately absent because its method names collide
/// with `RealField`'s at every call site.
pub trait Scalar:
    nalgebra::RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Lossy conversion from an f64 literal. Panics on non-finite input,
    /// which never happens for source-code constants.
    #[inline]
    fn fl(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    /// Conversion from a grid index or count.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("index fits scalar")
    }

    /// Value as f64 for reporting.
    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("scalar fits f64")
    }
}

impl<T> Scalar for T where
    T: nalgebra::RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
}
