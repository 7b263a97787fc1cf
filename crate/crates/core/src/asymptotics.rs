//! Closed-form small-window expansions with term-by-term breakdowns.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, DistanceMatrix, Vec3};
use crate::greens::{gs_sphere_interior, sphere_interaction, SPHERE_V};
use crate::specfun::{ellipke_param, integrate_adaptive, QuadratureSpec};

const EPS_WARN: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    TwoTerm,
    ThreeTerm,
}

/// `leading·ε + log·ε² log ε + quad·ε²`, stored as evaluated terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionResult {
    pub leading: f64,
    pub log_term: f64,
    pub quad_term: Option<f64>,
    pub total: f64,
    pub order: Order,
}

impl ExpansionResult {
    fn new(leading: f64, log_term: f64, quad_term: Option<f64>) -> Self {
        Self {
            leading,
            log_term,
            quad_term,
            total: leading + log_term + quad_term.unwrap_or(0.0),
            order: if quad_term.is_some() { Order::ThreeTerm } else { Order::TwoTerm },
        }
    }

    /// Same expansion with the quadratic term dropped.
    pub fn two_term(&self) -> Self {
        Self::new(self.leading, self.log_term, None)
    }
}

/// Weber constants `C_j` and window fluxes `Φ_j = 2π ε C_j` of the exit windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxVector {
    pub weber_constants: Vec<f64>,
    pub fluxes: Vec<f64>,
}

impl FluxVector {
    pub fn from_constants(eps: f64, weber_constants: Vec<f64>) -> Self {
        let fluxes = weber_constants.iter().map(|c| 2.0 * PI * eps * c).collect();
        Self {
            weber_constants,
            fluxes,
        }
    }

    pub fn total_flux(&self) -> f64 {
        self.fluxes.iter().sum()
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    if eps > EPS_WARN {
        log::warn!("eps = {eps} exceeds {EPS_WARN}; small-window expansions lose accuracy");
    }
    Ok(())
}

fn check_chord(eps: f64, l: f64) -> Result<()> {
    check_eps(eps)?;
    if !(l >= 2.0 * eps * (1.0 - 1e-12) && l <= 2.0 * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!("need 2 eps <= l <= 2, got l = {l}, eps = {eps}")));
    }
    Ok(())
}

/// Regular-part data for the three-term Neumann formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeumannQuadData {
    pub v1: f64,
    pub v2: f64,
    pub gs12: f64,
}

/// Influx/outflux Neumann pair on a general smooth boundary.
pub fn drop_two_window_neumann_general(
    h1: f64,
    h2: f64,
    eps: f64,
    quad_data: Option<NeumannQuadData>,
) -> Result<ExpansionResult> {
    check_eps(eps)?;
    let e2 = eps * eps;
    let quad = quad_data.map(|q| ((h1 + h2) / 8.0 + PI * (q.v1 + q.v2 - 2.0 * q.gs12)) * e2);
    Ok(ExpansionResult::new(2.0 * eps, -(h1 + h2) / 4.0 * e2 * eps.ln(), quad))
}

/// Green's data for the interior-point drop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteriorGreens {
    /// `G(x2; x1)` on the boundary.
    pub g21: f64,
    /// `G(x1; y)` and `G(x2; y)` with `y` interior.
    pub g1y: f64,
    pub g2y: f64,
    pub v1: f64,
}

/// `u(x1) − u(y)` for an interior point `y` in the Neumann pair problem.
pub fn drop_interior_point(h1: f64, eps: f64, greens: &InteriorGreens) -> Result<ExpansionResult> {
    check_eps(eps)?;
    let e2 = eps * eps;
    let quad = (h1 / 8.0 + PI * greens.v1 - PI * greens.g21 - PI * greens.g1y + PI * greens.g2y) * e2;
    Ok(ExpansionResult::new(eps, -h1 / 4.0 * e2 * eps.ln(), Some(quad)))
}

/// Interior-point drop in the unit ball with Green's data from the sphere kernels.
pub fn drop_interior_point_sphere(eps: f64, y: &Vec3, x1: &Vec3, x2: &Vec3) -> Result<ExpansionResult> {
    for x in [x1, x2] {
        let d = distance(y, x);
        if d < 2.0 * eps {
            return Err(Error::Domain(format!(
                "interior point at distance {d} from a window center; need at least 2 eps = {}",
                2.0 * eps
            )));
        }
    }
    let greens = InteriorGreens {
        g21: crate::greens::gs_sphere_surface(x2, x1)?,
        g1y: gs_sphere_interior(y, x1)?,
        g2y: gs_sphere_interior(y, x2)?,
        v1: SPHERE_V,
    };
    drop_interior_point(1.0, eps, &greens)
}

/// Leading coefficient `2 − (4/π) ∫₀¹ u/(η+u) K(2√(ηu)/(η+u)) du`, `K` of the modulus.
pub fn close_window_coefficient(eta: f64) -> Result<f64> {
    if !(eta >= 2.0) || !eta.is_finite() {
        return Err(Error::Domain(format!("eta = l/eps must be at least 2, got {eta}")));
    }
    let spec = QuadratureSpec::new(1e-13, 1e-12, 2000)?;
    let integral = integrate_adaptive(
        |u| {
            let s = eta + u;
            let k2 = 4.0 * eta * u / (s * s);
            u / s * ellipke_param(k2).0
        },
        0.0,
        1.0,
        &spec,
    )?;
    Ok(2.0 - 4.0 / PI * integral)
}

/// Two windows at separation `l = η ε`, `η ≥ 2`.
///
/// The angular mean of `log ω` over a disk of radius `1 < η` equals `2 log η`,
/// so the quadratic coefficient is `(1/8 + log(η)/4)(H1 + H2)`.
pub fn drop_close_windows(eps: f64, eta: f64, h1: f64, h2: f64) -> Result<ExpansionResult> {
    check_eps(eps)?;
    let lead = close_window_coefficient(eta)?;
    let quad = (0.125 + 0.25 * eta.ln()) * (h1 + h2) * eps * eps;
    Ok(ExpansionResult::new(lead * eps, 0.0, Some(quad)))
}

/// Result-2 style two-term drop for one influx and `N − 1` absorbing windows.
pub fn drop_mixed_general(h: &[f64], eps: f64) -> Result<ExpansionResult> {
    check_eps(eps)?;
    if h.len() < 2 {
        return Err(Error::Domain(format!("need N >= 2 curvature values, got {}", h.len())));
    }
    let m = (h.len() - 1) as f64;
    let hsum: f64 = h[1..].iter().sum();
    let lead = (1.0 + PI / (4.0 * m)) * eps;
    let log = -(h[0] + hsum / (m * m)) * eps * eps / 4.0 * eps.ln();
    Ok(ExpansionResult::new(lead, log, None))
}

/// Pairwise `G_s(x_i; x_j)` values, window 0 = influx. Diagonal entries are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreensTable {
    n: usize,
    g: Vec<f64>,
}

impl GreensTable {
    pub fn new(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    g[i * n + j] = f(i, j);
                }
            }
        }
        Self { n, g }
    }

    pub fn sphere(dist: &DistanceMatrix) -> Self {
        Self::new(dist.len(), |i, j| crate::greens::gs_sphere_chord(dist.get(i, j)))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.g[i * self.n + j]
    }

    /// Every entry shifted by `c` (the Green's function is defined up to a constant).
    pub fn shifted(&self, c: f64) -> Self {
        Self::new(self.n, |i, j| self.get(i, j) + c)
    }
}

/// Three-term influx drop for the mixed problem on a general boundary.
pub fn drop_mixed_three_term(eps: f64, h: &[f64], v: &[f64], greens: &GreensTable) -> Result<ExpansionResult> {
    check_eps(eps)?;
    let n = h.len();
    if n < 2 {
        return Err(Error::Domain(format!("need N >= 2 windows, got {n}")));
    }
    for got in [v.len(), greens.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    let m = (n - 1) as f64;
    let m2 = m * m;
    let hsum: f64 = h[1..].iter().sum();
    let vsum: f64 = v[1..].iter().sum();
    let mut pairs = 0.0;
    for i in 1..n {
        for j in (i + 1)..n {
            pairs += greens.get(i, j);
        }
    }
    let influx: f64 = (1..n).map(|i| greens.get(0, i)).sum();
    let e2 = eps * eps;
    let quad = h[0] / 8.0 + (1.0 - LN_2) / (4.0 * m2) * hsum + PI * v[0] + PI / m2 * vsum + 2.0 * PI / m2 * pairs
        - 2.0 * PI / m * influx;
    Ok(ExpansionResult::new(
        (1.0 + PI / (4.0 * m)) * eps,
        -(h[0] + hsum / m2) * e2 / 4.0 * eps.ln(),
        Some(quad * e2),
    ))
}

/// Influx and one Neumann outflux window on the unit sphere at chord `l`.
pub fn sphere_drop_neumann(eps: f64, l: f64) -> Result<ExpansionResult> {
    check_chord(eps, l)?;
    let e2 = eps * eps;
    Ok(ExpansionResult::new(
        2.0 * eps,
        -0.5 * e2 * eps.ln(),
        Some((0.25 - sphere_interaction(l)) * e2),
    ))
}

/// Influx and one absorbing window on the unit sphere at chord `l`.
pub fn sphere_drop_absorbing(eps: f64, l: f64) -> Result<ExpansionResult> {
    check_chord(eps, l)?;
    let e2 = eps * eps;
    Ok(ExpansionResult::new(
        (1.0 + PI / 4.0) * eps,
        -0.5 * e2 * eps.ln(),
        Some((0.375 - LN_2 / 4.0 - sphere_interaction(l)) * e2),
    ))
}

fn check_sphere_distances(eps: f64, dist: &DistanceMatrix) -> Result<()> {
    check_eps(eps)?;
    if dist.len() < 2 {
        return Err(Error::Domain(format!("need N >= 2 windows, got {}", dist.len())));
    }
    let min = dist.min_offdiag();
    if min < 2.0 * eps * (1.0 - 1e-12) {
        return Err(Error::Domain(format!("windows closer than 2 eps (min chord {min})")));
    }
    Ok(())
}

/// Influx at window 0 and `N − 1` absorbing windows on the unit sphere.
pub fn sphere_drop_n(eps: f64, dist: &DistanceMatrix) -> Result<ExpansionResult> {
    check_sphere_distances(eps, dist)?;
    let n = dist.len();
    let m = (n - 1) as f64;
    let mut pairs = 0.0;
    for i in 1..n {
        for j in (i + 1)..n {
            pairs += sphere_interaction(dist.get(i, j));
        }
    }
    let influx: f64 = (1..n).map(|i| sphere_interaction(dist.get(0, i))).sum();
    let e2 = eps * eps;
    let quad = 0.125 + (1.0 - LN_2) / (4.0 * m) + pairs / (m * m) - influx / m;
    Ok(ExpansionResult::new(
        (1.0 + PI / (4.0 * m)) * eps,
        -(n as f64) / (4.0 * m) * e2 * eps.ln(),
        Some(quad * e2),
    ))
}

/// Exit-window fluxes on the unit sphere to `O(ε³)`.
pub fn sphere_fluxes(eps: f64, dist: &DistanceMatrix) -> Result<FluxVector> {
    check_sphere_distances(eps, dist)?;
    let n = dist.len();
    let d = vec![d_coeff(1.0, eps, SPHERE_V)?; n - 1];
    Ok(ubar_cj_expansion(eps, &GreensTable::sphere(dist), &d)?.1)
}

/// `d_i = −(H/2) log ε + (1 − log 2) H / 2 + 2π v`.
pub fn d_coeff(h: f64, eps: f64, v: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    Ok(-0.5 * h * eps.ln() + 0.5 * (1.0 - LN_2) * h + 2.0 * PI * v)
}

/// Series for `ū` and the Weber constants, truncated at `O(ε³)`.
///
/// `d` holds `d_2 … d_N` (one entry per exit window).
pub fn ubar_cj_expansion(eps: f64, greens: &GreensTable, d: &[f64]) -> Result<(f64, FluxVector)> {
    check_eps(eps)?;
    let n = greens.len();
    if n < 2 {
        return Err(Error::Domain(format!("need N >= 2 windows, got {n}")));
    }
    if d.len() != n - 1 {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            got: d.len(),
        });
    }
    let m = (n - 1) as f64;
    let e2 = eps * eps;
    let dsum: f64 = d.iter().sum();
    let mut pairs = 0.0;
    for i in 1..n {
        for k in (i + 1)..n {
            pairs += greens.get(k, i);
        }
    }
    let influx: f64 = (1..n).map(|i| greens.get(0, i)).sum();
    let ubar = PI * eps / (4.0 * m) + e2 / (2.0 * m * m) * dsum + 2.0 * PI * e2 / (m * m) * pairs
        - PI * e2 / m * influx;

    let c = (1..n)
        .map(|j| {
            let mut dd = 0.0;
            let mut gg = 0.0;
            for i in (1..n).filter(|&i| i != j) {
                dd += d[i - 1] - d[j - 1];
                gg += greens.get(0, j) - greens.get(0, i) - greens.get(i, j);
            }
            -eps / (2.0 * m) - e2 / (PI * m * m) * (dd + 2.0 * PI * m * gg + 4.0 * PI * pairs)
        })
        .collect();
    Ok((ubar, FluxVector::from_constants(eps, c)))
}
