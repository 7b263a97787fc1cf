//! Neumann Green's functions for the unit sphere and the general
//! Coulomb-plus-curvature singular kernel.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, dot, norm, Vec3};

const SINGULAR_R: f64 = 1e-12;

/// Regular part of the sphere surface Green's function at coincidence.
pub const SPHERE_V: f64 = LN_2 / (4.0 * PI) - 9.0 / (20.0 * PI);

/// `g(r) = 1/(2πr) − (H/4π) log r`.
pub fn general_singular(h: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("singular kernel needs r > 0, got {r}")));
    }
    Ok(1.0 / (2.0 * PI * r) - h / (4.0 * PI) * r.ln())
}

/// Singular kernel, regular part and curvature at a boundary point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreensSplit {
    pub curvature: f64,
    pub regular_at_center: f64,
}

impl GreensSplit {
    pub fn singular(&self, r: f64) -> Result<f64> {
        general_singular(self.curvature, r)
    }
}

pub fn greens_split_sphere() -> GreensSplit {
    GreensSplit {
        curvature: 1.0,
        regular_at_center: SPHERE_V,
    }
}

/// Surface Green's function as a function of the chord `r = |x − y|`.
///
/// No singularity guard; callers integrating near `r = 0` rely on the
/// integrable `1/r` behaviour.
pub fn gs_sphere_chord(r: f64) -> f64 {
    1.0 / (2.0 * PI * r) - (0.5 * r * r + r).ln() / (4.0 * PI) + SPHERE_V
}

/// Surface–surface Neumann Green's function of the unit sphere.
pub fn gs_sphere_surface(x: &Vec3, y: &Vec3) -> Result<f64> {
    let r = distance(x, y);
    if r < SINGULAR_R {
        return Err(Error::Singularity(r));
    }
    Ok(gs_sphere_chord(r))
}

/// Interior–surface Neumann Green's function of the unit ball; `|x| ≤ 1`, `|y| = 1`.
pub fn gs_sphere_interior(x: &Vec3, y: &Vec3) -> Result<f64> {
    let r = distance(x, y);
    if r < SINGULAR_R {
        return Err(Error::Singularity(r));
    }
    let nx = norm(x);
    if nx > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("interior point has norm {nx} > 1")));
    }
    let cos_gamma = if nx > 0.0 {
        (dot(x, y) / (nx * norm(y))).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Ok(1.0 / (2.0 * PI * r) + (nx * nx + 1.0) / (8.0 * PI) + (2.0 / (1.0 - nx * cos_gamma + r)).ln() / (4.0 * PI)
        - 7.0 / (10.0 * PI))
}

/// `2π G_s − 2π v` for the sphere at chord `l`: `1/l − ½ log(l²/2 + l)`.
pub(crate) fn sphere_interaction(l: f64) -> f64 {
    1.0 / l - 0.5 * (0.5 * l * l + l).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::from_angles;
    use proptest::prelude::*;

    #[test]
    fn surface_examples() {
        let n = [0.0, 0.0, 1.0];
        let s = [0.0, 0.0, -1.0];
        let v = gs_sphere_surface(&n, &s).unwrap();
        assert!((v - ((1.0 - LN_2) / (4.0 * PI) - 9.0 / (20.0 * PI))).abs() < 1e-15);
        assert!((v + 0.118_820_877).abs() < 1e-9);
        let e = from_angles(std::f64::consts::FRAC_PI_3, 0.4);
        let v1 = gs_sphere_surface(&n, &e).unwrap();
        let want = 1.0 / (2.0 * PI) - (1.5f64).ln() / (4.0 * PI) + LN_2 / (4.0 * PI) - 9.0 / (20.0 * PI);
        assert!((v1 - want).abs() < 1e-14);
        assert!((v1 - 0.038_808_506).abs() < 1e-9);
        assert_eq!(gs_sphere_surface(&e, &n).unwrap(), v1);
        assert!(matches!(gs_sphere_surface(&n, &n), Err(Error::Singularity(_))));
    }

    #[test]
    fn interior_examples() {
        let y = from_angles(1.1, 2.3);
        let c = gs_sphere_interior(&[0.0; 3], &y).unwrap();
        assert!((c - (5.0 / (8.0 * PI) - 7.0 / (10.0 * PI))).abs() < 1e-15);
        assert!((c + 0.023_873_2).abs() < 1e-7);
        let half = [0.5 * y[0], 0.5 * y[1], 0.5 * y[2]];
        let want = 1.0 / PI + 1.25 / (8.0 * PI) + LN_2 / (4.0 * PI) - 7.0 / (10.0 * PI);
        assert!((gs_sphere_interior(&half, &y).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn interior_reduces_to_surface_on_the_boundary() {
        for &(t, f) in &[(0.3, 0.0), (1.5, 2.0), (3.0, 4.0)] {
            let x = from_angles(t, f);
            let y = from_angles(0.2, 1.0);
            let a = gs_sphere_interior(&x, &y).unwrap();
            let b = gs_sphere_surface(&x, &y).unwrap();
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn interior_laplacian_is_inverse_volume() {
        let y = from_angles(0.7, 0.3);
        let h = 1e-3;
        for x in [[0.1, -0.2, 0.05], [0.0, 0.0, 0.0], [-0.3, 0.2, -0.4]] {
            let f = |p: Vec3| gs_sphere_interior(&p, &y).unwrap();
            let mut lap = -6.0 * f(x);
            for k in 0..3 {
                let mut a = x;
                let mut b = x;
                a[k] += h;
                b[k] -= h;
                lap += f(a) + f(b);
            }
            lap /= h * h;
            assert!((lap - 3.0 / (4.0 * PI)).abs() < 1e-5, "{lap}");
        }
    }

    #[test]
    fn interior_volume_mean_is_small() {
        // Coarse check: midpoint rule in spherical shells avoiding the boundary source.
        let y = [0.0, 0.0, 1.0];
        let (nr, nt, np) = (40, 40, 16);
        let mut sum = 0.0;
        let mut vol = 0.0;
        for i in 0..nr {
            let r = (i as f64 + 0.5) / nr as f64;
            for j in 0..nt {
                let t = PI * (j as f64 + 0.5) / nt as f64;
                for k in 0..np {
                    let f = 2.0 * PI * (k as f64 + 0.5) / np as f64;
                    let x = from_angles(t, f).map(|c| c * r);
                    let w = r * r * t.sin();
                    sum += w * gs_sphere_interior(&x, &y).unwrap();
                    vol += w;
                }
            }
        }
        assert!((sum / vol).abs() < 1e-2, "{}", sum / vol);
    }

    #[test]
    fn split_examples() {
        let s = greens_split_sphere();
        assert!((s.regular_at_center + 0.088_080_549).abs() < 1e-9);
        assert_eq!(s.curvature, 1.0);
        assert!((s.singular(1.0).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-16);
        assert!((general_singular(0.0, 0.1).unwrap() - 1.0 / (0.2 * PI)).abs() < 1e-14);
        assert!((general_singular(2.0, 0.5).unwrap() - (1.0 / PI + LN_2 / (2.0 * PI))).abs() < 1e-15);
        assert!(general_singular(1.0, 0.0).is_err());
    }

    #[test]
    fn split_remainder_is_linear_in_r() {
        let s = greens_split_sphere();
        let rem = |r: f64| (gs_sphere_chord(r) - s.singular(r).unwrap() - s.regular_at_center).abs();
        let ratio = rem(1e-2) / rem(1e-3);
        assert!((ratio - 10.0).abs() < 0.1, "{ratio}");
    }

    proptest! {
        #[test]
        fn surface_is_symmetric(t1 in 0.0f64..3.1, f1 in 0.0f64..6.2, t2 in 0.0f64..3.1, f2 in 0.0f64..6.2) {
            let (a, b) = (from_angles(t1, f1), from_angles(t2, f2));
            prop_assume!(distance(&a, &b) > 1e-6);
            prop_assert_eq!(gs_sphere_surface(&a, &b).unwrap(), gs_sphere_surface(&b, &a).unwrap());
        }
    }
}
