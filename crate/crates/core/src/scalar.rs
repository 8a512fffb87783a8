use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Scalar type used for free energies (kcal/mol).
///
/// Implemented for `f32` and `f64`.
pub trait Energy: Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Converts a literal; every literal used by the crate is representable.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in the energy scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Energy for T where T: Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {}

/// Formats an energy with at most two decimals, trailing zeros trimmed to
/// one decimal place (`-3.0`, `-2.85`, `4.8`), and `+inf` for infinity.
pub fn format_energy<T: Energy>(v: T) -> String {
    let x = v.to_f64_lossy();
    if x.is_infinite() {
        return if x > 0.0 { "+inf".into() } else { "-inf".into() };
    }
    let mut s = format!("{:.2}", x);
    if s.ends_with('0') {
        s.pop();
    }
    if s == "-0.0" {
        s = "0.0".into();
    }
    s
}
