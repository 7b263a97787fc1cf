//! Special functions and quadrature engines.
//!
//! Complete elliptic integrals use the arithmetic-geometric mean and take the
//! *modulus* `k` (not the parameter `m = k^2`). Bessel functions of order 0
//! and 1 are backed by `libm`.

mod hankel;
mod quad;

pub use hankel::{
    integrate_bessel_laplace, integrate_bessel_terms, BesselIntegrand, BesselTerm, Factor,
};
pub use quad::{gauss_legendre, integrate_adaptive, integrate_adaptive_points, QuadratureSpec, TailPolicy};

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

const AGM_TOL: f64 = 1e-15;
const AGM_MAX_ITER: usize = 40;

/// Complete elliptic integral of the first kind, `K(k) = ∫₀^{π/2} dθ / √(1 − k² sin²θ)`.
pub fn ellipk(k: f64) -> Result<f64> {
    check_modulus(k)?;
    Ok(ellipke_param(k * k).0)
}

/// Complete elliptic integral of the second kind, `E(k) = ∫₀^{π/2} √(1 − k² sin²θ) dθ`.
pub fn ellipe(k: f64) -> Result<f64> {
    check_modulus(k)?;
    Ok(ellipke_param(k * k).1)
}

fn check_modulus(k: f64) -> Result<()> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain(format!(
            "elliptic modulus must lie in [0, 1), got {k}"
        )));
    }
    Ok(())
}

/// `(K, E)` as functions of the parameter `m = k²`, `0 ≤ m < 1`.
///
/// Unchecked: callers inside the crate guarantee the range. Uses the
/// complementary `1 − m` directly so that kernels near `m → 1` keep their
/// precision when the caller can supply it (see [`ellipke_comp`]).
pub(crate) fn ellipke_param(m: f64) -> (f64, f64) {
    ellipke_comp(1.0 - m)
}

/// `(K, E)` from the complementary parameter `mc = 1 − m`, `0 < mc ≤ 1`.
pub(crate) fn ellipke_comp(mc: f64) -> (f64, f64) {
    let mut a = 1.0_f64;
    let mut b = mc.sqrt();
    let mut c2_sum = 0.5 * (1.0 - mc); // c_0² / 2 with c_0² = m
    let mut pow2 = 0.5;
    for _ in 0..AGM_MAX_ITER {
        let c = 0.5 * (a - b);
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        pow2 *= 2.0;
        c2_sum += pow2 * c * c;
        if c.abs() < AGM_TOL * a {
            break;
        }
    }
    let k = FRAC_PI_2 / a;
    (k, k * (1.0 - c2_sum))
}

/// Bessel function of the first kind, order 0.
#[inline]
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Bessel function of the first kind, order 1 (odd in `x`).
#[inline]
pub fn bessel_j1(x: f64) -> f64 {
    libm::j1(x)
}

/// `J_order(x)` for `order ∈ {0, 1}`.
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    match order {
        0 => Ok(bessel_j0(x)),
        1 => Ok(bessel_j1(x)),
        n => Err(Error::Domain(format!(
            "only Bessel orders 0 and 1 are supported, got {n}"
        ))),
    }
}
