//! Two windows on a planar reflecting boundary: field, gradient flow lines,
//! penetration length and travel time.
//!
//! Window 1 (influx, uniform flux density `I`) is centred at `(−l/2, 0, 0)`
//! and window 2 at `(l/2, 0, 0)`, either as a uniform outflux disk or as an
//! absorbing disk. The half-space Neumann kernel is `1/(2π|x − x'|)`.

use std::cell::RefCell;
use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use ode_solvers::{Dopri5, System, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{
    ellipke_comp, gauss_legendre, integrate_adaptive_points, integrate_bessel_terms, BesselTerm,
    Factor, QuadratureSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfSpaceBc {
    #[serde(alias = "neumann")]
    NeumannPair,
    #[serde(alias = "mixed")]
    MixedAbsorbing,
}

impl std::str::FromStr for HalfSpaceBc {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neumann" | "neumann_pair" => Ok(Self::NeumannPair),
            "mixed" | "mixed_absorbing" | "absorbing" => Ok(Self::MixedAbsorbing),
            other => Err(Error::Role(format!("unknown half-space boundary condition {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfSpacePair {
    pub eps: f64,
    pub l: f64,
    pub current: f64,
    pub bc: HalfSpaceBc,
    /// Additive constant; fixed to `π ε I / 4` by flux balance in the absorbing case.
    pub u0: f64,
}

impl HalfSpacePair {
    pub fn new(eps: f64, l: f64, current: f64, bc: HalfSpaceBc) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Domain(format!("eps must be positive, got {eps}")));
        }
        if !(l >= 2.0 * eps * (1.0 - 1e-12)) || !l.is_finite() {
            return Err(Error::Overlap {
                i: 0,
                j: 1,
                distance: l,
                limit: 2.0 * eps,
            });
        }
        if !(current > 0.0) || !current.is_finite() {
            return Err(Error::Domain(format!("current must be positive, got {current}")));
        }
        let u0 = match bc {
            HalfSpaceBc::NeumannPair => 0.0,
            HalfSpaceBc::MixedAbsorbing => PI * eps * current / 4.0,
        };
        Ok(Self {
            eps,
            l,
            current,
            bc,
            u0,
        })
    }

    /// Sets the free additive constant of the Neumann pair.
    pub fn with_u0(mut self, u0: f64) -> Result<Self> {
        if self.bc == HalfSpaceBc::MixedAbsorbing {
            return Err(Error::Role("u0 is fixed by flux balance for an absorbing exit".into()));
        }
        self.u0 = u0;
        Ok(self)
    }

    fn rho(&self, x: f64, y: f64) -> (f64, f64) {
        let h = 0.5 * self.l;
        ((x + h).hypot(y), (x - h).hypot(y))
    }
}

fn hankel_spec() -> QuadratureSpec {
    QuadratureSpec::new(1e-12, 1e-10, 4000).expect("static quadrature settings are valid")
}

/// Concentration via the Laplace–Hankel representation.
pub fn field(p: &HalfSpacePair, x: f64, y: f64, z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("field needs z >= 0, got {z}")));
    }
    let (r1, r2) = p.rho(x, y);
    if z == 0.0 && ((r1 - p.eps).abs() < 1e-12 || (r2 - p.eps).abs() < 1e-12) {
        log::warn!("field evaluated on a window rim; accuracy is reduced");
    }
    let a = p.eps * p.current;
    let mut terms = vec![BesselTerm::new(a, Factor::J1(p.eps), Factor::J0(r1), 1.0)];
    terms.push(match p.bc {
        HalfSpaceBc::NeumannPair => BesselTerm::new(-a, Factor::J1(p.eps), Factor::J0(r2), 1.0),
        HalfSpaceBc::MixedAbsorbing => BesselTerm::new(-0.5 * a, Factor::Sin(p.eps), Factor::J0(r2), 1.0),
    });
    Ok(p.u0 + integrate_bessel_terms(&terms, z, &hankel_spec())?)
}

/// `∂u/∂z` on the plane `z = 0`.
pub fn normal_derivative(p: &HalfSpacePair, x: f64, y: f64) -> Result<f64> {
    let (r1, r2) = p.rho(x, y);
    let a = p.eps * p.current;
    let terms = [
        BesselTerm::new(-a, Factor::J1(p.eps), Factor::J0(r1), 0.0),
        match p.bc {
            HalfSpaceBc::NeumannPair => BesselTerm::new(a, Factor::J1(p.eps), Factor::J0(r2), 0.0),
            HalfSpaceBc::MixedAbsorbing => BesselTerm::new(0.5 * a, Factor::Sin(p.eps), Factor::J0(r2), 0.0),
        },
    ];
    integrate_bessel_terms(&terms, 0.0, &hankel_spec())
}

/// `(∂u/∂x, ∂u/∂z)` in the plane `y = 0` from the Bessel-kernel integrals.
pub fn grad_field_hankel(p: &HalfSpacePair, x: f64, z: f64) -> Result<(f64, f64)> {
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("gradient needs z >= 0, got {z}")));
    }
    let h = 0.5 * p.l;
    let a = p.eps * p.current;
    let (second, w) = match p.bc {
        HalfSpaceBc::NeumannPair => (Factor::J1(p.eps), 1.0),
        HalfSpaceBc::MixedAbsorbing => (Factor::Sin(p.eps), 0.5),
    };
    let spec = hankel_spec();
    let dx = integrate_bessel_terms(
        &[
            BesselTerm::new(-a, Factor::J1(p.eps), Factor::J1(h + x), 0.0),
            BesselTerm::new(-a * w, second, Factor::J1(h - x), 0.0),
        ],
        z,
        &spec,
    )?;
    let dz = integrate_bessel_terms(
        &[
            BesselTerm::new(-a, Factor::J1(p.eps), Factor::J0(h + x), 0.0),
            BesselTerm::new(a * w, second, Factor::J0(h - x), 0.0),
        ],
        z,
        &spec,
    )?;
    Ok((dx, dz))
}

/// `(∂U/∂ρ, ∂U/∂z)` for `U = (1/2π) ∫_{|x'|<ε} dA' / |x − x'|`, by ring integrals.
///
/// Each ring contributes complete elliptic integrals of the angular kernel
/// `(A − B cos θ)^{-3/2}`, `A = ρ² + r² + z²`, `B = 2ρr`.
fn uniform_disk_gradient(eps: f64, rho: f64, z: f64, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let ring = |r: f64| {
        let a = rho * rho + r * r + z * z;
        let b = 2.0 * rho * r;
        let ap = (rho + r) * (rho + r) + z * z;
        let am = (rho - r) * (rho - r) + z * z;
        let (k, e) = ellipke_comp(am / ap);
        let sq = ap.sqrt();
        let i3 = 4.0 * e / (am * sq);
        let i1 = 4.0 * k / sq;
        let beta = b / a;
        let icos = if beta < 1e-4 {
            PI * a.powf(-1.5) * (1.5 * beta + 105.0 / 64.0 * beta.powi(3))
        } else {
            (a * i3 - i1) / b
        };
        (r * (rho * i3 - r * icos), r * i3)
    };
    // Breakpoints resolve the peak of width ~z around r = ρ.
    let mut pts = vec![0.0, eps];
    for c in [rho - 4.0 * z, rho - z, rho, rho + z, rho + 4.0 * z] {
        if c > 0.0 && c < eps {
            pts.push(c);
        }
    }
    pts.sort_by(f64::total_cmp);
    let gr = integrate_adaptive_points(|r| ring(r).0, &pts, spec)?;
    let gz = integrate_adaptive_points(|r| ring(r).1, &pts, spec)?;
    Ok((-gr / (2.0 * PI), -z * gz / (2.0 * PI)))
}

/// `(∂W/∂ρ, ∂W/∂z)` for `W = ∫₀^∞ e^{-mz} sin(mε) J0(mρ) dm/m`, in closed form.
fn weber_disk_gradient(eps: f64, rho: f64, z: f64) -> (f64, f64) {
    let p = Complex64::new(z, -eps);
    let q = (p * p + rho * rho).sqrt();
    let dz = -(1.0 / q).im;
    let dr = if rho < 1e-6 * p.norm() {
        let ip2 = 1.0 / (p * p);
        -0.5 * rho * ip2.im + 0.375 * rho.powi(3) * (ip2 * ip2).im
    } else {
        (p / q).im / rho
    };
    (dr, dz)
}

fn ring_spec() -> QuadratureSpec {
    QuadratureSpec::new(1e-12, 1e-10, 4000).expect("static quadrature settings are valid")
}

/// `(∂u/∂x, ∂u/∂z)` in the plane `y = 0`, `z > 0`: elliptic ring integrals for
/// uniform-flux disks and closed forms for the absorbing disk.
pub fn grad_field(p: &HalfSpacePair, x: f64, z: f64) -> Result<(f64, f64)> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("ring-integral gradient needs z > 0, got {z}")));
    }
    grad_field_ring(p, x, z, &ring_spec())
}

fn grad_field_ring(p: &HalfSpacePair, x: f64, z: f64, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let h = 0.5 * p.l;
    let (s1, s2) = ((x + h).signum(), (x - h).signum());
    let (r1, r2) = ((x + h).abs(), (x - h).abs());
    let (g1r, g1z) = uniform_disk_gradient(p.eps, r1, z, spec)?;
    let (g2r, g2z) = match p.bc {
        HalfSpaceBc::NeumannPair => uniform_disk_gradient(p.eps, r2, z, spec)?,
        HalfSpaceBc::MixedAbsorbing => {
            let (wr, wz) = weber_disk_gradient(p.eps, r2, z);
            (0.5 * p.eps * wr, 0.5 * p.eps * wz)
        }
    };
    let i = p.current;
    Ok((i * (g1r * s1 - g2r * s2), i * (g1z - g2z)))
}

/// Weber outflux per unit amplitude `u0`, integrated from pointwise Hankel flux densities.
fn weber_outflux_per_amplitude(eps: f64) -> Result<f64> {
    // Flux density (2/π) ∫ sin(mε) J0(mρ) dm times the disk measure, with ρ = ε sin ψ
    // absorbing the edge singularity.
    let spec = hankel_spec();
    let (xs, ws) = gauss_legendre(24);
    let mut total = 0.0;
    for (x, w) in xs.iter().zip(&ws) {
        let psi = FRAC_PI_2 * 0.5 * (x + 1.0);
        let rho = eps * psi.sin();
        let dens = integrate_bessel_terms(&[BesselTerm::new(2.0 / PI, Factor::Sin(eps), Factor::J0(rho), 0.0)], 0.0, &spec)?;
        // dA = 2πρ dρ, dρ = ε cos ψ dψ, density ~ 1/(ε cos ψ) near the rim.
        total += w * 0.5 * FRAC_PI_2 * 2.0 * PI * rho * dens * eps * psi.cos();
    }
    Ok(total)
}

/// Additive constant of the absorbing pair that balances influx `π ε² I` against
/// the Weber outflux, computed from quadrature rather than the closed form.
pub fn mixed_u0_from_balance(eps: f64, current: f64) -> Result<f64> {
    Ok(PI * eps * eps * current / weber_outflux_per_amplitude(eps)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ExitReached,
    MaxTime,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    /// `(t, x, z)` at accepted steps, ending on the plane.
    pub points: Vec<(f64, f64, f64)>,
    pub l_pe: f64,
    /// Horizontal position where `l_pe` is attained.
    pub x_at_max: f64,
    pub t_tr: f64,
    pub terminal_x: f64,
    pub terminated: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_time: f64,
    /// Start height above the influx centre, as a fraction of `l`.
    pub lift_off: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            max_time: 1e8,
            lift_off: 1e-4,
        }
    }
}

const MAX_STEPS: u32 = 200_000;

struct FlowSystem<'a> {
    pair: &'a HalfSpacePair,
    spec: QuadratureSpec,
    z_floor: f64,
    z_stop: f64,
    error: RefCell<Option<Error>>,
    /// `(t, x, z, ẋ, ż)` per accepted step.
    record: Vec<[f64; 5]>,
    apex_seen: bool,
    done: bool,
}

impl FlowSystem<'_> {
    fn velocity(&self, x: f64, z: f64) -> (f64, f64) {
        match grad_field_ring(self.pair, x, z.max(self.z_floor), &self.spec) {
            Ok((gx, gz)) => (-gx, -gz),
            Err(e) => {
                self.error.borrow_mut().get_or_insert(e);
                (0.0, 0.0)
            }
        }
    }
}

impl System<f64, Vector2<f64>> for &mut FlowSystem<'_> {
    fn system(&self, _t: f64, y: &Vector2<f64>, dy: &mut Vector2<f64>) {
        let (vx, vz) = self.velocity(y[0], y[1]);
        dy[0] = vx;
        dy[1] = vz;
    }

    fn solout(&mut self, t: f64, y: &Vector2<f64>, dy: &Vector2<f64>) -> bool {
        if self.error.borrow().is_some() {
            return true;
        }
        let (vx, vz) = (dy[0], dy[1]);
        self.record.push([t, y[0], y[1], vx, vz]);
        if vz < 0.0 {
            self.apex_seen = true;
        }
        let over_exit = (y[0] - 0.5 * self.pair.l).abs() < self.pair.eps;
        self.done = self.apex_seen && (y[1] <= 0.0 || (y[1] < self.z_stop && over_exit));
        self.done
    }
}

fn hermite(s: f64, v0: f64, v1: f64, d0: f64, d1: f64) -> f64 {
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * v0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * v1 + (s3 - s2) * d1
}

/// `(max z, x at the max)` of the cubic Hermite interpolant over the recorded steps.
fn hermite_max(rec: &[[f64; 5]]) -> (f64, f64) {
    let mut best = rec.iter().fold((f64::NEG_INFINITY, 0.0), |b, r| if r[2] > b.0 { (r[2], r[1]) } else { b });
    for w in rec.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let h = b[0] - a[0];
        if !(a[4] >= 0.0 && b[4] <= 0.0) || h <= 0.0 {
            continue;
        }
        let (z0, z1, d0, d1) = (a[2], b[2], a[4] * h, b[4] * h);
        // Roots of the derivative of the cubic in s on [0, 1].
        let c2 = 3.0 * (2.0 * z0 + d0 - 2.0 * z1 + d1);
        let c1 = 2.0 * (-3.0 * z0 - 2.0 * d0 + 3.0 * z1 - d1);
        let c0 = d0;
        let roots: Vec<f64> = if c2.abs() < 1e-300 {
            vec![-c0 / c1]
        } else {
            let disc = (c1 * c1 - 4.0 * c2 * c0).max(0.0).sqrt();
            vec![(-c1 + disc) / (2.0 * c2), (-c1 - disc) / (2.0 * c2)]
        };
        for s in roots.into_iter().filter(|s| (0.0..=1.0).contains(s)) {
            let z = hermite(s, z0, z1, d0, d1);
            if z > best.0 {
                best = (z, hermite(s, a[1], b[1], a[3] * h, b[3] * h));
            }
        }
    }
    best
}

/// Follows `dC/dt = −∇u` from just above the influx centre until the curve returns to the plane.
pub fn trace_flow(p: &HalfSpacePair, opts: &TraceOptions) -> Result<FlowTrace> {
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0 && opts.max_time > 0.0 && opts.lift_off > 0.0) {
        return Err(Error::Domain("trace tolerances, max_time and lift_off must be positive".into()));
    }
    let z0 = opts.lift_off * p.l;
    let start = Vector2::new(-0.5 * p.l, z0);
    let mut sys = FlowSystem {
        pair: p,
        spec: ring_spec(),
        z_floor: 1e-3 * z0,
        z_stop: z0,
        error: RefCell::new(None),
        record: Vec::new(),
        apex_seen: false,
        done: false,
    };
    let (vx, vz) = sys.velocity(start[0], start[1]);
    sys.record.push([0.0, start[0], start[1], vx, vz]);
    // Initial step scales with 1/I so that the step sequence is amplitude invariant.
    let h0 = 1e-3 * z0 / vz.abs().max(vx.abs()).max(f64::MIN_POSITIVE);
    let mut solver = Dopri5::from_param(
        &mut sys,
        0.0,
        opts.max_time,
        0.0,
        start,
        opts.rel_tol,
        opts.abs_tol,
        0.9,
        0.04,
        0.2,
        10.0,
        opts.max_time,
        h0,
        MAX_STEPS,
        u32::MAX,
        ode_solvers::OutputType::Sparse,
    );
    let outcome = solver.integrate();
    drop(solver);
    if let Some(e) = sys.error.into_inner() {
        return Err(e);
    }
    let rec = sys.record;
    let last = *rec.last().expect("initial point recorded");
    match outcome {
        Err(ode_solvers::dop_shared::IntegrationError::StepSizeUnderflow { x })
        | Err(ode_solvers::dop_shared::IntegrationError::MaxNumStepReached { x, .. })
        | Err(ode_solvers::dop_shared::IntegrationError::StiffnessDetected { x }) => {
            return Err(Error::Stall { t: x });
        }
        Ok(_) if !sys.done => return Err(Error::MaxTimeExceeded(opts.max_time)),
        Ok(_) => {}
    }
    let (t_end, x_end) = if last[2] <= 0.0 {
        let prev = rec[rec.len() - 2];
        let s = prev[2] / (prev[2] - last[2]);
        (prev[0] + s * (last[0] - prev[0]), prev[1] + s * (last[1] - prev[1]))
    } else {
        let dt = last[2] / -last[4];
        (last[0] + dt, last[1] + dt * last[3])
    };
    let mut points: Vec<(f64, f64, f64)> = rec.iter().filter(|r| r[2] > 0.0).map(|r| (r[0], r[1], r[2])).collect();
    points.insert(0, (0.0, -0.5 * p.l, 0.0));
    points.push((t_end, x_end, 0.0));
    let (l_pe, x_at_max) = hermite_max(&rec);
    Ok(FlowTrace {
        l_pe,
        x_at_max,
        t_tr: t_end,
        terminal_x: x_end,
        points,
        terminated: Termination::ExitReached,
    })
}

/// Penetration length and travel time of one trace, tagged by its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub eps: f64,
    pub l: f64,
    pub current: f64,
    pub l_pe: f64,
    pub t_tr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    /// `L_pe − (a l − ε²/l)` per sample.
    pub residuals_l: Vec<f64>,
    /// `T_tr / (b l³ / (I ε²)) − 1` per sample.
    pub residuals_t: Vec<f64>,
}

pub const MIN_FIT_PAIRS: usize = 6;

/// Least-squares `a` in `L_pe + ε²/l = a l` and mean `b = T_tr I ε² / l³`.
pub fn fit_constants(samples: &[TraceSample]) -> Result<FitResult> {
    let mut pairs: Vec<(u64, u64)> = samples.iter().map(|s| (s.eps.to_bits(), s.l.to_bits())).collect();
    pairs.sort_unstable();
    pairs.dedup();
    if pairs.len() < MIN_FIT_PAIRS {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_FIT_PAIRS} distinct (eps, l) pairs, got {}",
            pairs.len()
        )));
    }
    if samples.iter().any(|s| !(s.eps > 0.0 && s.l > 0.0 && s.current > 0.0)) {
        return Err(Error::Domain("fit samples need positive eps, l and current".into()));
    }
    let num: f64 = samples.iter().map(|s| (s.l_pe + s.eps * s.eps / s.l) * s.l).sum();
    let den: f64 = samples.iter().map(|s| s.l * s.l).sum();
    let a = num / den;
    let b = samples.iter().map(|s| s.t_tr * s.current * s.eps * s.eps / s.l.powi(3)).sum::<f64>() / samples.len() as f64;
    Ok(FitResult {
        a,
        b,
        residuals_l: samples.iter().map(|s| s.l_pe - (a * s.l - s.eps * s.eps / s.l)).collect(),
        residuals_t: samples
            .iter()
            .map(|s| s.t_tr * s.current * s.eps * s.eps / (b * s.l.powi(3)) - 1.0)
            .collect(),
    })
}

/// Traces every grid point with `l ≥ 2ε` and returns the samples, in grid order.
pub fn trace_grid(
    eps: &[f64],
    l: &[f64],
    current: f64,
    bc: HalfSpaceBc,
    opts: &TraceOptions,
) -> Result<Vec<TraceSample>> {
    use rayon::prelude::*;
    let grid: Vec<(f64, f64)> = eps
        .iter()
        .flat_map(|&e| l.iter().map(move |&d| (e, d)))
        .filter(|&(e, d)| d >= 2.0 * e * (1.0 - 1e-12))
        .collect();
    grid.par_iter()
        .map(|&(e, d)| {
            let p = HalfSpacePair::new(e, d, current, bc)?;
            let t = trace_flow(&p, opts)?;
            Ok(TraceSample {
                eps: e,
                l: d,
                current,
                l_pe: t.l_pe,
                t_tr: t.t_tr,
            })
        })
        .collect()
}
