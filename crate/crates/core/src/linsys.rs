//! Finite-ε solve of the window interaction system for the mixed problem.
//!
//! Unknowns are the Weber constants `C_2 … C_N` of the absorbing windows and
//! the mean concentration `ū`, coupled through the saddle-point system
//! `[(π/2) I + ε M, 1; 1ᵀ, 0] [C; ū] = [−π ε² b; −ε/2]`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::asymptotics::{d_coeff, FluxVector};
use crate::error::{Error, Result};
use crate::geometry::{cap_point, tangent_frame, ProblemKind, ValidatedConfig, Vec3};
use crate::greens::{gs_sphere_chord, SPHERE_V};
use crate::specfun::{gauss_legendre, integrate_adaptive, QuadratureSpec};

const MAX_CONDITION: f64 = 1e12;

/// How window integrals of the Green's function are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelTreatment {
    /// Leading-order window integrals (`π/2 + d_i ε`, centre values of `G_s`).
    #[default]
    Truncated,
    /// Window integrals of the full sphere kernel by quadrature.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSystem {
    pub eps: f64,
    pub m: DMatrix<f64>,
    pub b: DVector<f64>,
    /// `∫_{W1} G_s(x; x1) dx`.
    pub influx_self: f64,
    /// `∫_{Wj} G_s(x; x1) w_j(x) dx` for each exit window.
    pub to_influx: DVector<f64>,
    pub treatment: KernelTreatment,
}

/// `∫_cap f` over the spherical cap of chord radius `eps` around `c`.
///
/// With `weber = true` the measure carries the edge density `1/√(ε² − r²)`.
pub(crate) fn cap_integral(c: &Vec3, eps: f64, weber: bool, n: usize, f: impl Fn(&Vec3) -> f64) -> f64 {
    let frame = tangent_frame(c);
    let (xr, wr) = gauss_legendre(n);
    let (xp, wp) = gauss_legendre(2 * n);
    let mut sum = 0.0;
    for (a, wa) in xr.iter().zip(&wr) {
        let s = 0.5 * (a + 1.0);
        // r = ε sin ψ removes the edge singularity of the Weber weight.
        let (r, jac) = if weber {
            let psi = FRAC_PI_2 * s;
            (eps * psi.sin(), FRAC_PI_2 * 0.5 * eps * psi.sin())
        } else {
            (eps * s, 0.5 * eps * eps * s)
        };
        let mut ring = 0.0;
        for (b, wb) in xp.iter().zip(&wp) {
            let phi = PI * (b + 1.0);
            ring += wb * f(&cap_point(c, &frame, r, phi));
        }
        sum += wa * jac * ring * PI;
    }
    sum
}

/// `2π ∫₀^ε G_s(r) r dr`: the influx window integral at its own centre.
pub(crate) fn influx_self_integral(eps: f64) -> Result<f64> {
    let spec = QuadratureSpec::new(1e-15, 1e-13, 2000)?;
    integrate_adaptive(|r| 2.0 * PI * r * gs_sphere_chord(r), 0.0, eps, &spec)
}

/// `∫₀^ε G_s(r) 2π r / √(ε² − r²) dr`: Weber-weighted window integral at its own centre.
pub(crate) fn weber_self_integral(eps: f64) -> Result<f64> {
    let spec = QuadratureSpec::new(1e-15, 1e-13, 2000)?;
    integrate_adaptive(
        |psi: f64| {
            let r = eps * psi.sin();
            2.0 * PI * r * gs_sphere_chord(r)
        },
        0.0,
        FRAC_PI_2,
        &spec,
    )
}

fn cap_points_per_axis(eps: f64, l: f64) -> usize {
    // Nearest singularity sits l − ε from the cap centre; tighten as windows approach tangency.
    let ratio = (l - eps) / eps;
    if ratio > 4.0 {
        16
    } else if ratio > 2.0 {
        24
    } else {
        48
    }
}

/// Interaction system with leading-order window integrals.
pub fn build_system(cfg: &ValidatedConfig) -> Result<InteractionSystem> {
    build_system_with(cfg, KernelTreatment::Truncated)
}

pub fn build_system_with(cfg: &ValidatedConfig, treatment: KernelTreatment) -> Result<InteractionSystem> {
    cfg.require_unit_sphere()?;
    if cfg.kind()? != ProblemKind::Mixed {
        return Err(Error::Role("interaction system needs absorbing exit windows".into()));
    }
    let eps = cfg.eps;
    let n = cfg.n_windows() - 1;
    let dist = &cfg.distances;
    let mut m = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let mut to_influx = DVector::zeros(n);
    let influx_self;
    match treatment {
        KernelTreatment::Truncated => {
            let d = d_coeff(1.0, eps, SPHERE_V)?;
            for i in 0..n {
                m[(i, i)] = d;
                for j in 0..n {
                    if i != j {
                        m[(i, j)] = 2.0 * PI * gs_sphere_chord(dist.get(i + 1, j + 1));
                    }
                }
                b[i] = gs_sphere_chord(dist.get(0, i + 1));
                to_influx[i] = 2.0 * PI * eps * gs_sphere_chord(dist.get(0, i + 1));
            }
            influx_self = eps - 0.25 * eps * eps * eps.ln() + 0.125 * eps * eps + PI * SPHERE_V * eps * eps;
        }
        KernelTreatment::Exact => {
            let self_weber = weber_self_integral(eps)?;
            let c = &cfg.centers;
            let weber_at = |j: usize, target: usize| {
                let q = cap_points_per_axis(eps, dist.get(j, target));
                cap_integral(&c[j], eps, true, q, |x| gs_sphere_chord(crate::geometry::distance(x, &c[target])))
            };
            for i in 0..n {
                m[(i, i)] = (self_weber - FRAC_PI_2) / eps;
                for j in 0..n {
                    if i != j {
                        m[(i, j)] = weber_at(j + 1, i + 1) / eps;
                    }
                }
                let q = cap_points_per_axis(eps, dist.get(0, i + 1));
                b[i] = cap_integral(&c[0], eps, false, q, |x| gs_sphere_chord(crate::geometry::distance(x, &c[i + 1])))
                    / (PI * eps * eps);
                to_influx[i] = weber_at(i + 1, 0);
            }
            influx_self = influx_self_integral(eps)?;
        }
    }
    Ok(InteractionSystem {
        eps,
        m,
        b,
        influx_self,
        to_influx,
        treatment,
    })
}

/// Solves the augmented system without series truncation. Returns `ū` and the Weber constants.
pub fn solve_exact(sys: &InteractionSystem) -> Result<(f64, FluxVector)> {
    let n = sys.b.len();
    let eps = sys.eps;
    let mut a = DMatrix::zeros(n + 1, n + 1);
    let mut rhs = DVector::zeros(n + 1);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = eps * sys.m[(i, j)];
        }
        a[(i, i)] += FRAC_PI_2;
        a[(i, n)] = 1.0;
        a[(n, i)] = 1.0;
        rhs[i] = -PI * eps * eps * sys.b[i];
    }
    rhs[n] = -0.5 * eps;
    let sv = a.clone().singular_values();
    let cond = sv.max() / sv.min();
    if !(cond < MAX_CONDITION) {
        return Err(Error::SingularSystem(cond));
    }
    let x = a.lu().solve(&rhs).ok_or(Error::SingularSystem(f64::INFINITY))?;
    let c: Vec<f64> = x.iter().take(n).copied().collect();
    Ok((x[n], FluxVector::from_constants(eps, c)))
}

/// `u(x1) = ū + ∫_{W1} G_s(x; x1) dx + Σ_j C_j ∫_{Wj} G_s(x; x1) w_j dx`.
pub fn u_at_influx_exact(sys: &InteractionSystem, ubar: f64, weber_constants: &[f64]) -> Result<f64> {
    if weber_constants.len() != sys.to_influx.len() {
        return Err(Error::DimensionMismatch {
            expected: sys.to_influx.len(),
            got: weber_constants.len(),
        });
    }
    Ok(ubar + sys.influx_self + weber_constants.iter().zip(sys.to_influx.iter()).map(|(c, t)| c * t).sum::<f64>())
}

/// Builds, solves and evaluates the influx concentration in one call.
pub fn influx_drop(cfg: &ValidatedConfig, treatment: KernelTreatment) -> Result<(f64, f64, FluxVector)> {
    let sys = build_system_with(cfg, treatment)?;
    let (ubar, flux) = solve_exact(&sys)?;
    let u1 = u_at_influx_exact(&sys, ubar, &flux.weber_constants)?;
    Ok((u1, ubar, flux))
}
