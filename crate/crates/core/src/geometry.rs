//! Problem instances: domains, windows, validation and chord distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

const CENTER_INPUT_TOL: f64 = 1e-6;

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn distance(a: &Vec3, b: &Vec3) -> f64 {
    norm(&sub(a, b))
}

/// Unit vector at the given colatitude and azimuth (radians).
pub fn from_angles(colatitude: f64, azimuth: f64) -> Vec3 {
    let s = colatitude.sin();
    [s * azimuth.cos(), s * azimuth.sin(), colatitude.cos()]
}

/// Point on the unit sphere at chord distance `l` from the north pole, in the `xz` plane.
pub fn at_chord_from_pole(l: f64) -> Vec3 {
    from_angles(2.0 * (0.5 * l).clamp(-1.0, 1.0).asin(), 0.0)
}

/// Orthonormal pair spanning the tangent plane at unit vector `c`.
pub(crate) fn tangent_frame(c: &Vec3) -> (Vec3, Vec3) {
    let helper = if c[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = cross(c, &helper);
    let e1 = scale(&e1, 1.0 / norm(&e1));
    let e2 = cross(c, &e1);
    (e1, e2)
}

/// Point on the unit sphere at chord distance `r` from `c`, in direction `phi` of `frame`.
pub(crate) fn cap_point(c: &Vec3, frame: &(Vec3, Vec3), r: f64, phi: f64) -> Vec3 {
    let cos_t = 1.0 - 0.5 * r * r;
    let sin_t = r * (1.0 - 0.25 * r * r).max(0.0).sqrt();
    let (e1, e2) = frame;
    let (sp, cp) = phi.sin_cos();
    [
        cos_t * c[0] + sin_t * (cp * e1[0] + sp * e2[0]),
        cos_t * c[1] + sin_t * (cp * e1[1] + sp * e2[1]),
        cos_t * c[2] + sin_t * (cp * e1[2] + sp * e2[2]),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    UnitSphere,
    Sphere {
        #[serde(rename = "R")]
        r: f64,
    },
    HalfSpace,
}

impl Domain {
    fn radius(&self) -> Option<f64> {
        match *self {
            Domain::UnitSphere => Some(1.0),
            Domain::Sphere { r } => Some(r),
            Domain::HalfSpace => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Influx,
    OutfluxNeumann,
    Absorbing,
}

/// Window center as given in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Center {
    Cartesian(Vec<f64>),
    Angles { colatitude: f64, azimuth: f64 },
}

impl From<Vec3> for Center {
    fn from(c: Vec3) -> Self {
        Center::Cartesian(c.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub center: Center,
    pub radius: f64,
    pub role: Role,
}

impl WindowSpec {
    pub fn new(center: impl Into<Center>, radius: f64, role: Role) -> Self {
        Self {
            center: center.into(),
            radius,
            role,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub domain: Domain,
    pub current: f64,
    pub diffusion: f64,
    pub windows: Vec<WindowSpec>,
}

impl WindowConfig {
    pub fn unit_sphere(windows: Vec<WindowSpec>) -> Self {
        Self {
            domain: Domain::UnitSphere,
            current: 1.0,
            diffusion: 1.0,
            windows,
        }
    }

    /// Influx at the north pole and one exit at chord distance `l`.
    pub fn sphere_pair(eps: f64, l: f64, exit: Role) -> Self {
        Self::unit_sphere(vec![
            WindowSpec::new([0.0, 0.0, 1.0], eps, Role::Influx),
            WindowSpec::new(at_chord_from_pole(l), eps, exit),
        ])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Symmetric matrix of chord distances between window centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    l: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_points(points: &[Vec3]) -> Self {
        let n = points.len();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = distance(&points[i], &points[j]);
                l[i * n + j] = d;
                l[j * n + i] = d;
            }
        }
        Self { n, l }
    }

    /// Builds from the strict upper triangle, row by row.
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: upper.len(),
            });
        }
        let mut l = vec![0.0; n * n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = *it.next().expect("length checked");
                if !(d > 0.0) {
                    return Err(Error::Domain(format!("distance l[{i}][{j}] = {d} must be positive")));
                }
                l[i * n + j] = d;
                l[j * n + i] = d;
            }
        }
        Ok(Self { n, l })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    pub fn min_offdiag(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| ((i + 1)..self.n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Kind of exit boundary condition shared by all non-influx windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Neumann,
    Mixed,
}

/// A checked configuration. Window 0 is the influx window; centers are
/// stored as exact unit vectors (sphere) or `[x, y, 0]` (half-space).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedConfig {
    pub config: WindowConfig,
    pub centers: Vec<Vec3>,
    pub roles: Vec<Role>,
    pub eps: f64,
    pub distances: DistanceMatrix,
}

impl ValidatedConfig {
    pub fn n_windows(&self) -> usize {
        self.centers.len()
    }

    pub fn kind(&self) -> Result<ProblemKind> {
        let exits = &self.roles[1..];
        if exits.iter().all(|r| *r == Role::OutfluxNeumann) {
            Ok(ProblemKind::Neumann)
        } else if exits.iter().all(|r| *r == Role::Absorbing) {
            Ok(ProblemKind::Mixed)
        } else {
            Err(Error::Role(
                "exit windows mix Neumann outflux and absorbing conditions".into(),
            ))
        }
    }

    pub fn is_sphere(&self) -> bool {
        !matches!(self.config.domain, Domain::HalfSpace)
    }

    pub fn require_unit_sphere(&self) -> Result<()> {
        match self.config.domain {
            Domain::UnitSphere => Ok(()),
            Domain::Sphere { r } if r == 1.0 => Ok(()),
            other => Err(Error::Domain(format!(
                "operation needs a unit-sphere configuration, got {other:?}; nondimensionalize first"
            ))),
        }
    }
}

/// Checks roles, radii, centers and spacing; reorders windows so the influx comes first.
pub fn validate_config(cfg: &WindowConfig) -> Result<ValidatedConfig> {
    if !(cfg.diffusion > 0.0) {
        return Err(Error::Domain(format!("diffusion must be positive, got {}", cfg.diffusion)));
    }
    if !cfg.current.is_finite() {
        return Err(Error::Domain("current must be finite".into()));
    }
    let sphere_r = cfg.domain.radius();
    if let Some(r) = sphere_r {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("sphere radius must be positive, got {r}")));
        }
    }
    let influx: Vec<usize> = cfg
        .windows
        .iter()
        .enumerate()
        .filter(|(_, w)| w.role == Role::Influx)
        .map(|(i, _)| i)
        .collect();
    match influx.len() {
        0 => return Err(Error::Role("no influx window".into())),
        1 => {}
        n => return Err(Error::Role(format!("{n} influx windows, expected exactly one"))),
    }
    if cfg.windows.len() < 2 {
        return Err(Error::Role("need at least one outflux or absorbing window".into()));
    }

    let mut order = vec![influx[0]];
    order.extend((0..cfg.windows.len()).filter(|&i| i != influx[0]));
    let mut windows: Vec<WindowSpec> = order.iter().map(|&i| cfg.windows[i].clone()).collect();

    let eps = windows[0].radius;
    for (i, w) in windows.iter().enumerate() {
        if !(w.radius > 0.0) {
            return Err(Error::Domain(format!("window {i} radius must be positive, got {}", w.radius)));
        }
        if (w.radius - eps).abs() > 1e-12 * eps {
            return Err(Error::Domain(format!(
                "windows must share a common radius ({} vs {eps})",
                w.radius
            )));
        }
        if let Some(r) = sphere_r {
            if w.radius >= r {
                return Err(Error::Domain(format!("window radius {} must be below sphere radius {r}", w.radius)));
            }
        }
    }

    let mut centers = Vec::with_capacity(windows.len());
    for (i, w) in windows.iter_mut().enumerate() {
        let c = normalize_center(&w.center, sphere_r, i)?;
        w.center = Center::Cartesian(c.to_vec());
        centers.push(c);
    }
    let distances = DistanceMatrix::from_points(&centers);
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            let d = distances.get(i, j);
            // Tangent windows (l = 2ε) are admissible.
            if d < 2.0 * eps * (1.0 - 1e-12) {
                return Err(Error::Overlap {
                    i: order[i],
                    j: order[j],
                    distance: d,
                    limit: 2.0 * eps,
                });
            }
        }
    }
    let roles = windows.iter().map(|w| w.role).collect();
    Ok(ValidatedConfig {
        config: WindowConfig {
            windows,
            ..cfg.clone()
        },
        centers,
        roles,
        eps,
        distances,
    })
}

fn normalize_center(center: &Center, sphere_r: Option<f64>, i: usize) -> Result<Vec3> {
    match (center, sphere_r) {
        (Center::Angles { colatitude, azimuth }, Some(r)) => Ok(scale(&from_angles(*colatitude, *azimuth), r)),
        (Center::Angles { .. }, None) => Err(Error::Domain(format!(
            "window {i}: half-space centers must be given as [x, y]"
        ))),
        (Center::Cartesian(v), Some(r)) => {
            if v.len() != 3 {
                return Err(Error::DimensionMismatch { expected: 3, got: v.len() });
            }
            let c = [v[0], v[1], v[2]];
            let n = norm(&c);
            if !n.is_finite() || (n / r - 1.0).abs() > CENTER_INPUT_TOL {
                return Err(Error::Domain(format!(
                    "window {i}: center {v:?} is off the sphere of radius {r} (norm {n})"
                )));
            }
            Ok(scale(&c, r / n))
        }
        (Center::Cartesian(v), None) => match v.len() {
            2 => Ok([v[0], v[1], 0.0]),
            3 if v[2] == 0.0 => Ok([v[0], v[1], 0.0]),
            n => Err(Error::Domain(format!(
                "window {i}: half-space center must lie in the z = 0 plane (got {n} coordinates {v:?})"
            ))),
        },
    }
}

/// Rescales a sphere configuration to the unit sphere.
///
/// Returns the scaled config and the factor `I R / D` with `c = factor · u`.
pub fn nondimensionalize(cfg: &WindowConfig) -> Result<(WindowConfig, f64)> {
    let valid = validate_config(cfg)?;
    let r = match cfg.domain {
        Domain::UnitSphere => 1.0,
        Domain::Sphere { r } => r,
        Domain::HalfSpace => {
            return Err(Error::Domain("half-space configurations have no length scale".into()));
        }
    };
    let factor = cfg.current * r / cfg.diffusion;
    let windows = valid
        .config
        .windows
        .iter()
        .zip(&valid.centers)
        .map(|(w, c)| WindowSpec::new(scale(c, 1.0 / r), w.radius / r, w.role))
        .collect();
    Ok((
        WindowConfig {
            domain: Domain::UnitSphere,
            current: cfg.current,
            diffusion: cfg.diffusion,
            windows,
        },
        factor,
    ))
}
