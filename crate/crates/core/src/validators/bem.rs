//! Collocation boundary elements on the unit sphere.
//!
//! Absorbing windows carry a flux density `σ_e w(r)` per element, where
//! `w = (ε² − r²)^{-1/2}` is the single-disk edge profile and `σ_e` is
//! piecewise constant. Elements are rings and ring sectors in the variables
//! `(ψ, φ)` with chord radius `r = ε sin ψ`; in these variables the weighted
//! measure `w dA` becomes `ε sin ψ dψ dφ` and is smooth up to the rim.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::FluxVector;
use crate::error::{Error, Result};
use crate::geometry::{cap_point, distance, norm, tangent_frame, ProblemKind, ValidatedConfig, Vec3};
use crate::greens::{gs_sphere_chord, gs_sphere_interior};
use crate::linsys::influx_self_integral;
use crate::specfun::gauss_legendre;

/// Rings per window and sectors per ring (the innermost ring is a single disk).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BemMesh {
    pub n_rings: usize,
    pub n_sectors: usize,
}

impl BemMesh {
    pub fn new(n_rings: usize, n_sectors: usize) -> Result<Self> {
        if n_rings < 2 {
            return Err(Error::Resolution(format!("need at least 2 rings per window, got {n_rings}")));
        }
        if n_sectors < 3 {
            return Err(Error::Resolution(format!("need at least 3 sectors per ring, got {n_sectors}")));
        }
        Ok(Self { n_rings, n_sectors })
    }

    /// `4·2^level` rings with twice as many sectors.
    pub fn level(level: u32) -> Self {
        let n = 4usize << level;
        Self {
            n_rings: n,
            n_sectors: 2 * n,
        }
    }

    pub fn refined(&self) -> Self {
        Self {
            n_rings: 2 * self.n_rings,
            n_sectors: 2 * self.n_sectors,
        }
    }

    fn elements_per_window(&self) -> usize {
        1 + (self.n_rings - 1) * self.n_sectors
    }
}

impl Default for BemMesh {
    fn default() -> Self {
        Self::level(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Density {
    Weber,
    Uniform,
}

#[derive(Debug, Clone)]
struct Patch {
    c: Vec3,
    frame: (Vec3, Vec3),
    eps: f64,
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    psi: (f64, f64),
    phi: (f64, f64),
}

impl Rect {
    fn full() -> Self {
        Rect {
            psi: (0.0, FRAC_PI_2),
            phi: (0.0, 2.0 * PI),
        }
    }

    fn is_disk(&self) -> bool {
        self.psi.0 == 0.0 && self.phi.1 - self.phi.0 > 2.0 * PI - 1e-12
    }

    fn split(&self) -> [Rect; 4] {
        let pm = 0.5 * (self.psi.0 + self.psi.1);
        let fm = 0.5 * (self.phi.0 + self.phi.1);
        [
            Rect { psi: (self.psi.0, pm), phi: (self.phi.0, fm) },
            Rect { psi: (pm, self.psi.1), phi: (self.phi.0, fm) },
            Rect { psi: (self.psi.0, pm), phi: (fm, self.phi.1) },
            Rect { psi: (pm, self.psi.1), phi: (fm, self.phi.1) },
        ]
    }
}

impl Patch {
    fn new(c: Vec3, eps: f64) -> Self {
        Self {
            frame: tangent_frame(&c),
            c,
            eps,
        }
    }

    fn point(&self, psi: f64, phi: f64) -> Vec3 {
        cap_point(&self.c, &self.frame, self.eps * psi.sin(), phi)
    }

    fn measure(&self, psi: f64, density: Density) -> f64 {
        match density {
            Density::Weber => self.eps * psi.sin(),
            Density::Uniform => self.eps * self.eps * psi.sin() * psi.cos(),
        }
    }

    fn extent(&self, r: &Rect) -> (Vec3, f64) {
        let outer = self.eps * r.psi.1.sin();
        if r.is_disk() {
            return (self.c, 2.0 * outer);
        }
        let radial = outer - self.eps * r.psi.0.sin();
        let angular = (outer * (r.phi.1 - r.phi.0)).min(2.0 * outer);
        let centre = self.point(0.5 * (r.psi.0 + r.psi.1), 0.5 * (r.phi.0 + r.phi.1));
        (centre, radial.hypot(angular))
    }
}

struct Rules {
    g4: (Vec<f64>, Vec<f64>),
    g8: (Vec<f64>, Vec<f64>),
    g12: (Vec<f64>, Vec<f64>),
}

impl Rules {
    fn new() -> Self {
        Self {
            g4: gauss_legendre(4),
            g8: gauss_legendre(8),
            g12: gauss_legendre(12),
        }
    }
}

type Kernel<'a> = &'a (dyn Fn(&Vec3) -> f64 + Sync);

fn gl_rect(p: &Patch, r: &Rect, d: Density, k: Kernel, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let (ha, ma) = (0.5 * (r.psi.1 - r.psi.0), 0.5 * (r.psi.1 + r.psi.0));
    let (hb, mb) = (0.5 * (r.phi.1 - r.phi.0), 0.5 * (r.phi.1 + r.phi.0));
    let (x, w) = rule;
    let mut sum = 0.0;
    for (xa, wa) in x.iter().zip(w) {
        let psi = ma + ha * xa;
        let m = p.measure(psi, d);
        let mut ring = 0.0;
        for (xb, wb) in x.iter().zip(w) {
            ring += wb * k(&p.point(psi, mb + hb * xb));
        }
        sum += wa * m * ring;
    }
    sum * ha * hb
}

/// Rectangle split into four triangles meeting at the singular point `s`,
/// each mapped to the unit square so the `1/ρ` kernel is cancelled by the Jacobian.
fn duffy_rect(p: &Patch, r: &Rect, d: Density, k: Kernel, s: (f64, f64), rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let corners = [
        (r.psi.0, r.phi.0),
        (r.psi.1, r.phi.0),
        (r.psi.1, r.phi.1),
        (r.psi.0, r.phi.1),
    ];
    let (x, w) = rule;
    let mut sum = 0.0;
    for e in 0..4 {
        let a = corners[e];
        let b = corners[(e + 1) % 4];
        let det = ((a.0 - s.0) * (b.1 - a.1) - (a.1 - s.1) * (b.0 - a.0)).abs();
        if det == 0.0 {
            continue;
        }
        for (xu, wu) in x.iter().zip(w) {
            let u = 0.5 * (xu + 1.0);
            for (xv, wv) in x.iter().zip(w) {
                let v = 0.5 * (xv + 1.0);
                let psi = s.0 + u * (a.0 + v * (b.0 - a.0) - s.0);
                let phi = s.1 + u * (a.1 + v * (b.1 - a.1) - s.1);
                sum += 0.25 * wu * wv * u * det * p.measure(psi, d) * k(&p.point(psi, phi));
            }
        }
    }
    sum
}

fn near_rect(p: &Patch, r: &Rect, d: Density, k: Kernel, y: &Vec3, rules: &Rules, depth: u32) -> f64 {
    let (centre, diam) = p.extent(r);
    let ratio = distance(y, &centre) / diam;
    if ratio > 3.0 {
        gl_rect(p, r, d, k, &rules.g4)
    } else if ratio > 1.5 || depth == 0 {
        gl_rect(p, r, d, k, &rules.g8)
    } else {
        r.split().iter().map(|s| near_rect(p, s, d, k, y, rules, depth - 1)).sum()
    }
}

#[derive(Debug, Clone)]
struct Element {
    window: usize,
    rect: Rect,
    colloc: Vec3,
    colloc_param: (f64, f64),
    mass: f64,
}

fn build_elements(patches: &[Patch], windows: &[usize], mesh: &BemMesh) -> Vec<Element> {
    // Rings are uniform in chord radius; ψ = asin(r/ε) is only the integration variable.
    let n = mesh.n_rings as f64;
    let psi_at = |k: f64| (k / n).min(1.0).asin();
    let dphi = 2.0 * PI / mesh.n_sectors as f64;
    let mut out = Vec::with_capacity(windows.len() * mesh.elements_per_window());
    for &w in windows {
        let p = &patches[w];
        let psi1 = psi_at(1.0);
        out.push(Element {
            window: w,
            rect: Rect {
                psi: (0.0, psi1),
                phi: (0.0, 2.0 * PI),
            },
            colloc: p.c,
            colloc_param: (0.0, 0.0),
            mass: p.eps * (1.0 - psi1.cos()) * 2.0 * PI,
        });
        for k in 1..mesh.n_rings {
            let psi = (psi_at(k as f64), psi_at(k as f64 + 1.0));
            for s in 0..mesh.n_sectors {
                let phi = (s as f64 * dphi, (s + 1) as f64 * dphi);
                let param = (psi_at(k as f64 + 0.5), 0.5 * (phi.0 + phi.1));
                out.push(Element {
                    window: w,
                    rect: Rect { psi, phi },
                    colloc: p.point(param.0, param.1),
                    colloc_param: param,
                    mass: p.eps * (psi.0.cos() - psi.1.cos()) * dphi,
                });
            }
        }
    }
    out
}

/// Result of one boundary-element solve on the unit sphere (unit influx density, D = 1).
#[derive(Debug, Clone)]
pub struct BemSolution {
    pub kind: ProblemKind,
    pub eps: f64,
    pub ubar: f64,
    /// Concentration at each window centre, influx window first.
    pub u_centers: Vec<f64>,
    pub flux: FluxVector,
    /// `u(x1) − u(x2)`.
    pub drop: f64,
    pub n_unknowns: usize,
    pub mesh: BemMesh,
    patches: Vec<Patch>,
    elements: Vec<Element>,
    sigma: Vec<f64>,
}

impl BemSolution {
    /// Concentration at a point of the closed unit ball.
    pub fn u_at(&self, y: &Vec3) -> Result<f64> {
        let ny = norm(y);
        if ny > 1.0 + 1e-9 {
            return Err(Error::Domain(format!("point has norm {ny} > 1")));
        }
        let on_surface = ny > 1.0 - 1e-12;
        let kernel = |x: &Vec3| {
            if on_surface {
                gs_sphere_chord(distance(x, y))
            } else {
                gs_sphere_interior(y, x).unwrap_or(f64::NAN)
            }
        };
        for p in &self.patches {
            if distance(&p.c, y) < p.eps * (1.0 + 1e-12) && on_surface {
                return Err(Error::Domain("evaluation point lies on a window".into()));
            }
        }
        let rules = Rules::new();
        let mut u = self.ubar;
        match self.kind {
            ProblemKind::Mixed => {
                u += near_rect(&self.patches[0], &Rect::full(), Density::Uniform, &kernel, y, &rules, 6);
                for (e, s) in self.elements.iter().zip(&self.sigma) {
                    u += s * near_rect(&self.patches[e.window], &e.rect, Density::Weber, &kernel, y, &rules, 4);
                }
            }
            ProblemKind::Neumann => {
                let m = (self.patches.len() - 1) as f64;
                for (j, p) in self.patches.iter().enumerate() {
                    let f = near_rect(p, &Rect::full(), Density::Uniform, &kernel, y, &rules, 6);
                    u += if j == 0 { f } else { -f / m };
                }
            }
        }
        Ok(u)
    }
}

/// Boundary-element solution of the sphere window problem.
///
/// Mixed configurations collocate `u = 0` at element centres of the absorbing
/// windows; Neumann configurations integrate the known uniform flux densities
/// directly, with the exits sharing the outflux equally.
pub fn bem_solve(cfg: &ValidatedConfig, mesh: &BemMesh) -> Result<BemSolution> {
    cfg.require_unit_sphere()?;
    let mesh = BemMesh::new(mesh.n_rings, mesh.n_sectors)?;
    let kind = cfg.kind()?;
    let eps = cfg.eps;
    let n = cfg.n_windows();
    let patches: Vec<Patch> = cfg.centers.iter().map(|c| Patch::new(*c, eps)).collect();
    let rules = Rules::new();
    let self_influx = influx_self_integral(eps)?;
    let uniform_at = |w: usize, y: &Vec3| {
        let k = |x: &Vec3| gs_sphere_chord(distance(x, y));
        near_rect(&patches[w], &Rect::full(), Density::Uniform, &k, y, &rules, 6)
    };

    match kind {
        ProblemKind::Neumann => {
            let m = (n - 1) as f64;
            let u_centers: Vec<f64> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let f = if i == j { self_influx } else { uniform_at(j, &cfg.centers[i]) };
                            if j == 0 {
                                f
                            } else {
                                -f / m
                            }
                        })
                        .sum()
                })
                .collect();
            let flux = FluxVector::from_constants(eps, vec![-eps / (2.0 * m); n - 1]);
            Ok(BemSolution {
                kind,
                eps,
                ubar: 0.0,
                drop: u_centers[0] - u_centers[1],
                u_centers,
                flux,
                n_unknowns: 0,
                mesh,
                patches,
                elements: Vec::new(),
                sigma: Vec::new(),
            })
        }
        ProblemKind::Mixed => {
            let exits: Vec<usize> = (1..n).collect();
            let elements = build_elements(&patches, &exits, &mesh);
            let ne = elements.len();
            let rows: Vec<(Vec<f64>, f64)> = elements
                .par_iter()
                .map(|ec| {
                    let y = ec.colloc;
                    let k = |x: &Vec3| gs_sphere_chord(distance(x, &y));
                    let mut row = vec![0.0; ne + 1];
                    for (j, ee) in elements.iter().enumerate() {
                        let p = &patches[ee.window];
                        row[j] = if std::ptr::eq(ec, ee) {
                            if ee.rect.is_disk() {
                                gl_rect(p, &ee.rect, Density::Weber, &k, &rules.g12)
                            } else {
                                duffy_rect(p, &ee.rect, Density::Weber, &k, ee.colloc_param, &rules.g12)
                            }
                        } else {
                            near_rect(p, &ee.rect, Density::Weber, &k, &y, &rules, 4)
                        };
                    }
                    row[ne] = 1.0;
                    (row, -uniform_at(0, &y))
                })
                .collect();
            let mut a = DMatrix::zeros(ne + 1, ne + 1);
            let mut rhs = DVector::zeros(ne + 1);
            for (i, (row, b)) in rows.into_iter().enumerate() {
                for (j, v) in row.into_iter().enumerate() {
                    a[(i, j)] = v;
                }
                rhs[i] = b;
            }
            for (j, e) in elements.iter().enumerate() {
                a[(ne, j)] = e.mass;
            }
            rhs[ne] = -PI * eps * eps;
            let x = a.clone().lu().solve(&rhs).ok_or(Error::SingularSystem(f64::INFINITY))?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularSystem(f64::INFINITY));
            }
            let sigma: Vec<f64> = x.iter().take(ne).copied().collect();
            let ubar = x[ne];

            let mut fluxes = vec![0.0; n - 1];
            for (e, s) in elements.iter().zip(&sigma) {
                fluxes[e.window - 1] += s * e.mass;
            }
            let constants = fluxes.iter().map(|f| f / (2.0 * PI * eps)).collect();
            let x1 = cfg.centers[0];
            let k1 = |x: &Vec3| gs_sphere_chord(distance(x, &x1));
            let mut u1 = ubar + self_influx;
            for (e, s) in elements.iter().zip(&sigma) {
                u1 += s * near_rect(&patches[e.window], &e.rect, Density::Weber, &k1, &x1, &rules, 4);
            }
            let mut u_centers = vec![u1];
            // Exit centres are collocation points of the central disks.
            for w in 1..n {
                let idx = elements.iter().position(|e| e.window == w).expect("disk element per window");
                let row: f64 = (0..ne).map(|j| a[(idx, j)] * sigma[j]).sum();
                u_centers.push(ubar + row - rhs[idx]);
            }
            Ok(BemSolution {
                kind,
                eps,
                ubar,
                drop: u_centers[0] - u_centers[1],
                u_centers,
                flux: FluxVector::from_constants(eps, constants),
                n_unknowns: ne + 1,
                mesh,
                patches,
                elements,
                sigma,
            })
        }
    }
}

/// Two-level solve with Richardson extrapolation of the drop.
#[derive(Debug, Clone)]
pub struct BemEstimate {
    pub coarse: BemSolution,
    pub fine: BemSolution,
    pub drop: f64,
    pub error_estimate: f64,
}

/// Assumed algebraic convergence order of the collocation drop under mesh doubling.
const RICHARDSON_ORDER: i32 = 2;

pub fn bem_solve_extrapolated(cfg: &ValidatedConfig, mesh: &BemMesh) -> Result<BemEstimate> {
    let coarse = bem_solve(cfg, mesh)?;
    let fine = bem_solve(cfg, &mesh.refined())?;
    let delta = (fine.drop - coarse.drop) / (2f64.powi(RICHARDSON_ORDER) - 1.0);
    Ok(BemEstimate {
        drop: fine.drop + delta,
        error_estimate: delta.abs(),
        coarse,
        fine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{sphere_drop_absorbing, sphere_drop_neumann};
    use crate::geometry::{from_angles, validate_config, Role, WindowConfig, WindowSpec};
    use crate::linsys::{influx_drop, KernelTreatment};

    fn pair(eps: f64, role: Role) -> ValidatedConfig {
        validate_config(&WindowConfig::sphere_pair(eps, 2.0, role)).unwrap()
    }

    #[test]
    fn mesh_resolution_checks() {
        assert!(matches!(BemMesh::new(1, 8), Err(Error::Resolution(_))));
        assert!(matches!(BemMesh::new(4, 2), Err(Error::Resolution(_))));
        assert_eq!(BemMesh::level(0).refined(), BemMesh::level(1));
    }

    #[test]
    fn element_masses_sum_to_weber_mass() {
        let p = vec![Patch::new([0.0, 0.0, 1.0], 0.05), Patch::new([0.0, 0.0, -1.0], 0.05)];
        let els = build_elements(&p, &[1], &BemMesh::level(0));
        let total: f64 = els.iter().map(|e| e.mass).sum();
        assert!((total - 2.0 * PI * 0.05).abs() < 1e-15);
    }

    #[test]
    fn duffy_and_refined_gauss_agree_on_self_element() {
        let p = Patch::new(from_angles(0.4, 1.0), 0.1);
        let r = Rect {
            psi: (0.4, 0.6),
            phi: (1.0, 1.5),
        };
        let s = (0.5, 1.25);
        let y = p.point(s.0, s.1);
        let k = |x: &Vec3| gs_sphere_chord(distance(x, &y));
        let rules = Rules::new();
        let duffy = duffy_rect(&p, &r, Density::Weber, &k, s, &rules.g12);
        // Oracle: split at the singular point and integrate each quadrant in polar-like midpoint sums.
        let n = 600;
        let mut mid = 0.0;
        let (da, db) = ((r.psi.1 - r.psi.0) / n as f64, (r.phi.1 - r.phi.0) / n as f64);
        for i in 0..n {
            for j in 0..n {
                let psi = r.psi.0 + (i as f64 + 0.5) * da;
                let phi = r.phi.0 + (j as f64 + 0.5) * db;
                mid += p.measure(psi, Density::Weber) * k(&p.point(psi, phi)) * da * db;
            }
        }
        assert!((duffy - mid).abs() < 2e-3 * duffy.abs(), "{duffy} vs {mid}");
    }

    #[test]
    fn neumann_pair_matches_three_term_series() {
        for &eps in &[0.05, 0.02] {
            let sol = bem_solve(&pair(eps, Role::OutfluxNeumann), &BemMesh::level(0)).unwrap();
            let asym = sphere_drop_neumann(eps, 2.0).unwrap().total;
            assert!(((asym - sol.drop) / sol.drop).abs() < 0.02);
            assert!((sol.flux.total_flux() + PI * eps * eps).abs() < 1e-15);
        }
    }

    #[test]
    fn mixed_pair_converges_monotonically() {
        let cfg = pair(0.05, Role::Absorbing);
        let d: Vec<f64> = (0..3).map(|l| bem_solve(&cfg, &BemMesh::level(l)).unwrap().drop).collect();
        let (d1, d2) = (d[1] - d[0], d[2] - d[1]);
        assert!(d1 * d2 > 0.0 && d2.abs() < d1.abs(), "{d:?}");
        let asym = sphere_drop_absorbing(0.05, 2.0).unwrap().total;
        assert!(((asym - d[2]) / d[2]).abs() < 0.02);
    }

    #[test]
    fn mixed_solution_properties() {
        let cfg = pair(0.05, Role::Absorbing);
        let sol = bem_solve(&cfg, &BemMesh::level(0)).unwrap();
        assert!(sol.u_centers[1].abs() < 1e-12);
        assert!(((sol.flux.total_flux() + PI * 0.0025) / (PI * 0.0025)).abs() < 1e-12);
        // Away from the windows the representation is smooth and bounded by the drop.
        let u_eq = sol.u_at(&[1.0, 0.0, 0.0]).unwrap();
        assert!(u_eq > 0.0 && u_eq < sol.drop);
        let u_in = sol.u_at(&[0.0, 0.0, 0.0]).unwrap();
        assert!((u_in - u_eq).abs() < 0.1 * sol.drop);
        assert!(sol.u_at(&[0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn three_windows_agree_with_exact_interaction_solve() {
        let eps = 0.05;
        let w = vec![
            WindowSpec::new([0.0, 0.0, 1.0], eps, Role::Influx),
            WindowSpec::new(from_angles(std::f64::consts::FRAC_PI_3, 0.0), eps, Role::Absorbing),
            WindowSpec::new([0.0, 0.0, -1.0], eps, Role::Absorbing),
        ];
        let cfg = validate_config(&WindowConfig::unit_sphere(w)).unwrap();
        let est = bem_solve_extrapolated(&cfg, &BemMesh::level(0)).unwrap();
        let (u1, _, _) = influx_drop(&cfg, KernelTreatment::Exact).unwrap();
        assert!(((est.drop - u1) / u1).abs() < 0.01, "{} vs {u1}", est.drop);
    }
}
