//! Semi-infinite Laplace–Hankel integrals `∫₀^∞ e^{-mz} g(m) dm`.
//!
//! Two routes. [`integrate_bessel_terms`] takes `g` as a sum of products of
//! `J0`, `J1` and `sin` factors: `[0, M]` is integrated adaptively and the
//! tail `[M, ∞)` is summed in closed form from the Hankel asymptotic
//! expansions, so `z = 0` costs the same as `z > 0`. [`integrate_bessel_laplace`]
//! accepts an opaque `g` and relies on exponential truncation or, when that is
//! too long, partition sums accelerated by Wynn's epsilon algorithm.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use super::quad::{integrate_adaptive, integrate_adaptive_points, QuadratureSpec};
use super::{bessel_j0, bessel_j1};
use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const ASYM_ORDER: usize = 10;
const MAX_BREAKPOINTS: usize = 20_000;

/// One oscillatory factor of a structured integrand, as a function of `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factor {
    One,
    J0(f64),
    J1(f64),
    Sin(f64),
}

impl Factor {
    pub fn eval(&self, m: f64) -> f64 {
        match *self {
            Factor::One => 1.0,
            Factor::J0(a) => bessel_j0(a * m),
            Factor::J1(a) => bessel_j1(a * m),
            Factor::Sin(a) => (a * m).sin(),
        }
    }

    /// Sign-normalized form with a nonnegative argument; `None` when identically zero.
    fn normalized(self) -> Option<(f64, Factor)> {
        match self {
            Factor::One => Some((1.0, Factor::One)),
            Factor::J0(a) if a == 0.0 => Some((1.0, Factor::One)),
            Factor::J0(a) => Some((1.0, Factor::J0(a.abs()))),
            Factor::J1(a) | Factor::Sin(a) if a == 0.0 => None,
            Factor::J1(a) => Some((a.signum(), Factor::J1(a.abs()))),
            Factor::Sin(a) => Some((a.signum(), Factor::Sin(a.abs()))),
        }
    }

    fn arg(&self) -> Option<f64> {
        match *self {
            Factor::One => None,
            Factor::J0(a) | Factor::J1(a) | Factor::Sin(a) => Some(a),
        }
    }

    /// `Re[amp · m^{-p} · e^{i(ωm − φ)} · Σ c_k m^{-k}]` representation for large `m`.
    fn asymptotic(&self) -> Oscillation {
        match *self {
            Factor::One => Oscillation::plain(1.0, 0.0, 0.0, 0.0),
            Factor::Sin(a) => Oscillation::plain(1.0, 0.0, a, FRAC_PI_2),
            Factor::J0(a) => Oscillation::hankel(0.0, a),
            Factor::J1(a) => Oscillation::hankel(1.0, a),
        }
    }
}

#[derive(Debug, Clone)]
struct Oscillation {
    amp: f64,
    p: f64,
    omega: f64,
    phase: f64,
    coeffs: Vec<Complex64>,
}

impl Oscillation {
    fn plain(amp: f64, p: f64, omega: f64, phase: f64) -> Self {
        Self {
            amp,
            p,
            omega,
            phase,
            coeffs: vec![Complex64::new(1.0, 0.0)],
        }
    }

    fn hankel(nu: f64, a: f64) -> Self {
        let mu = 4.0 * nu * nu;
        let mut coeffs = Vec::with_capacity(ASYM_ORDER);
        let mut ak = 1.0;
        let mut ik = Complex64::new(1.0, 0.0);
        let step = Complex64::new(0.0, 1.0 / a);
        coeffs.push(ik);
        for k in 1..ASYM_ORDER {
            let odd = (2 * k - 1) as f64;
            ak *= (mu - odd * odd) / (8.0 * k as f64);
            ik *= step;
            coeffs.push(ik * ak);
        }
        Self {
            amp: (2.0 / (PI * a)).sqrt(),
            p: 0.5,
            omega: a,
            phase: (0.5 * nu + 0.25) * PI,
            coeffs,
        }
    }
}

/// `coef · f1(m) · f2(m) · m^{-power}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselTerm {
    pub coef: f64,
    pub f1: Factor,
    pub f2: Factor,
    pub power: f64,
}

impl BesselTerm {
    pub fn new(coef: f64, f1: Factor, f2: Factor, power: f64) -> Self {
        Self { coef, f1, f2, power }
    }

    pub fn eval(&self, m: f64) -> f64 {
        let base = self.coef * self.f1.eval(m) * self.f2.eval(m);
        if self.power == 0.0 {
            base
        } else {
            base * m.powf(-self.power)
        }
    }
}

/// A finite sum of [`BesselTerm`]s.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BesselIntegrand {
    pub terms: Vec<BesselTerm>,
}

impl BesselIntegrand {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, term: BesselTerm) -> &mut Self {
        self.terms.push(term);
        self
    }

    pub fn eval(&self, m: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(m)).sum()
    }

    pub fn integrate(&self, z: f64, spec: &QuadratureSpec) -> Result<f64> {
        integrate_bessel_terms(&self.terms, z, spec)
    }
}

/// `∫₀^∞ e^{-mz} Σ_t coef_t f1_t(m) f2_t(m) m^{-power_t} dm` for `z ≥ 0`.
///
/// Each term must be integrable at `m = 0`. At `z = 0` every
/// non-oscillating component must decay faster than `1/m`; this fails for
/// evaluation exactly on a disk rim, which is reported as `NonConvergence`.
pub fn integrate_bessel_terms(terms: &[BesselTerm], z: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("z must be finite and nonnegative, got {z}")));
    }
    let terms: Vec<BesselTerm> = terms
        .iter()
        .filter_map(|t| {
            let (s1, f1) = t.f1.normalized()?;
            let (s2, f2) = t.f2.normalized()?;
            (t.coef != 0.0).then(|| BesselTerm::new(t.coef * s1 * s2, f1, f2, t.power))
        })
        .collect();
    if terms.is_empty() {
        return Ok(0.0);
    }
    let cutoff = spec.tail.cutoff_factor;
    let min_arg = terms
        .iter()
        .flat_map(|t| [t.f1.arg(), t.f2.arg()])
        .flatten()
        .fold(f64::INFINITY, f64::min);
    let omega_max = terms
        .iter()
        .map(|t| t.f1.arg().unwrap_or(0.0) + t.f2.arg().unwrap_or(0.0))
        .fold(0.0, f64::max);

    let m_decay = if z > 0.0 { cutoff / z } else { f64::INFINITY };
    let (upper, with_tail) = if omega_max == 0.0 {
        if z == 0.0 {
            return Err(Error::NonConvergence(
                "non-oscillating integrand with z = 0 does not decay".into(),
            ));
        }
        (m_decay, false)
    } else {
        // Past `m_asym` every factor is in its asymptotic regime.
        let m_asym = (cutoff / min_arg).max(cutoff / omega_max);
        if m_decay <= m_asym {
            (m_decay, false)
        } else {
            (m_asym, true)
        }
    };

    let f = |m: f64| (-m * z).exp() * terms.iter().map(|t| t.eval(m)).sum::<f64>();
    let body = if omega_max > 0.0 {
        let step = PI / omega_max;
        let n = ((upper / step).ceil() as usize).clamp(1, MAX_BREAKPOINTS);
        let pts: Vec<f64> = (0..=n).map(|i| upper * i as f64 / n as f64).collect();
        let local = QuadratureSpec {
            max_subdivisions: spec.max_subdivisions.max(4 * n),
            ..*spec
        };
        integrate_adaptive_points(f, &pts, &local)?
    } else {
        integrate_adaptive(f, 0.0, upper, spec)?
    };
    if !with_tail {
        return Ok(body);
    }
    let mut tail = 0.0;
    for t in &terms {
        tail += term_tail(t, z, upper)?;
    }
    Ok(body + tail)
}

fn term_tail(t: &BesselTerm, z: f64, upper: f64) -> Result<f64> {
    let a = t.f1.asymptotic();
    let b = t.f2.asymptotic();
    let amp = t.coef * a.amp * b.amp;
    let p = a.p + b.p + t.power;
    let mut total = 0.0;
    for conj in [false, true] {
        let (omega, phase) = if conj {
            (a.omega - b.omega, a.phase - b.phase)
        } else {
            (a.omega + b.omega, a.phase + b.phase)
        };
        let coeffs = convolve(&a.coeffs, &b.coeffs, conj);
        let zeta = Complex64::new(z, -omega);
        let w = zeta * upper;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in coeffs.iter().enumerate() {
            let q = p + k as f64;
            let scale = upper.powf(1.0 - q);
            let piece = c * scale * expint(q, w)?;
            acc += piece;
            if k > 1 && piece.norm() < 1e-18 * acc.norm().max(1e-300) {
                break;
            }
        }
        total += 0.5 * amp * (Complex64::from_polar(1.0, -phase) * acc).re;
    }
    Ok(total)
}

fn convolve(a: &[Complex64], b: &[Complex64], conj_b: bool) -> Vec<Complex64> {
    let n = (a.len() + b.len() - 1).min(ASYM_ORDER);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            if i + j < n {
                out[i + j] += ai * if conj_b { bj.conj() } else { *bj };
            }
        }
    }
    out
}

/// Generalized exponential integral `E_q(w) = ∫₁^∞ e^{-wt} t^{-q} dt`, `Re w ≥ 0`.
pub(crate) fn expint(q: f64, w: Complex64) -> Result<Complex64> {
    if w.norm() == 0.0 {
        return if q > 1.0 {
            Ok(Complex64::new(1.0 / (q - 1.0), 0.0))
        } else {
            Err(Error::NonConvergence(format!(
                "tail integral of m^-{q} diverges without damping or oscillation"
            )))
        };
    }
    let nearest = q.round();
    let integer = (q - nearest).abs() < 1e-12;
    if integer && nearest == 0.0 {
        return Ok((-w).exp() / w);
    }
    if q < 0.0 {
        return Err(Error::Domain(format!("exponential integral order must be >= 0, got {q}")));
    }
    if w.norm() > 1.0 {
        return Ok(expint_cf(q, w));
    }
    Ok(if integer {
        expint_series_int(nearest as i64, w)
    } else {
        expint_series_frac(q, w)
    })
}

fn expint_cf(q: f64, w: Complex64) -> Complex64 {
    let tiny = Complex64::new(1e-300, 0.0);
    let mut b = w + q;
    let mut c = Complex64::new(1e300, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 1..100_000 {
        let an = -(i as f64) * (q - 1.0 + i as f64);
        b += 2.0;
        d = an * d + b;
        if d.norm() == 0.0 {
            d = tiny;
        }
        d = d.inv();
        c = b + an / c;
        if c.norm() == 0.0 {
            c = tiny;
        }
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h * (-w).exp()
}

fn expint_series_frac(q: f64, w: Complex64) -> Complex64 {
    let s = 1.0 - q;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0); // (-w)^k / k!
    for k in 0..200 {
        let piece = term / (s + k as f64);
        sum += piece;
        if k > 2 && piece.norm() < 1e-17 * sum.norm() {
            break;
        }
        term *= -w / (k as f64 + 1.0);
    }
    libm::tgamma(s) * w.powf(q - 1.0) - sum
}

fn expint_series_int(n: i64, w: Complex64) -> Complex64 {
    let nm1 = n - 1;
    let mut ans = if nm1 != 0 {
        Complex64::new(1.0 / nm1 as f64, 0.0)
    } else {
        -w.ln() - EULER_GAMMA
    };
    let mut fact = Complex64::new(1.0, 0.0);
    for i in 1..200_i64 {
        fact *= -w / i as f64;
        let del = if i != nm1 {
            -fact / (i - nm1) as f64
        } else {
            let psi = -EULER_GAMMA + (1..=nm1).map(|k| 1.0 / k as f64).sum::<f64>();
            fact * (-w.ln() + psi)
        };
        ans += del;
        if del.norm() < 1e-17 * ans.norm() {
            break;
        }
    }
    ans
}

/// `∫₀^∞ e^{-mz} g(m) dm` for an opaque oscillatory `g`.
///
/// `half_period` is the spacing of sign changes of `g` for large `m` (for a
/// product of Bessel factors, `π` over the sum of their arguments). For
/// `z > 0` the integrand is cut at `cutoff_factor / z` when that spans at most
/// `max_partitions` half periods; otherwise partition sums over half periods
/// are extrapolated with Wynn's epsilon algorithm.
pub fn integrate_bessel_laplace<G: Fn(f64) -> f64>(
    g: G,
    z: f64,
    half_period: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate()?;
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("z must be finite and nonnegative, got {z}")));
    }
    if !(half_period > 0.0) {
        return Err(Error::Domain(format!("half_period must be positive, got {half_period}")));
    }
    let f = |m: f64| (-m * z).exp() * g(m);
    let max_parts = spec.tail.max_partitions;
    if z > 0.0 {
        let upper = spec.tail.cutoff_factor / z;
        let n = (upper / half_period).ceil() as usize;
        if n <= max_parts {
            let pts: Vec<f64> = (0..=n.max(1)).map(|i| upper * i as f64 / n.max(1) as f64).collect();
            return integrate_adaptive_points(f, &pts, spec);
        }
    }

    let local = QuadratureSpec {
        abs_tol: 0.1 * spec.abs_tol,
        ..*spec
    };
    let mut partial = 0.0;
    let mut wynn = Wynn::default();
    let mut history: Vec<f64> = Vec::new();
    for k in 0..max_parts {
        let a = k as f64 * half_period;
        partial += integrate_adaptive(&f, a, a + half_period, &local)?;
        let est = wynn.push(partial);
        history.push(est);
        let n = history.len();
        if n >= 8 {
            let d1 = (history[n - 1] - history[n - 2]).abs();
            let d2 = (history[n - 2] - history[n - 3]).abs();
            let tol = spec.abs_tol.max(spec.rel_tol * est.abs());
            if d1 <= tol && d2 <= tol {
                return Ok(est);
            }
        }
    }
    let n = history.len();
    let spread = if n >= 2 { (history[n - 1] - history[n - 2]).abs() } else { f64::INFINITY };
    log::warn!("slow decay: Bessel partition extrapolation stalled, last change {spread:e}");
    Err(Error::NonConvergence(format!(
        "partition extrapolation did not settle after {max_parts} partitions (last change {spread:e})"
    )))
}

/// Streaming Wynn epsilon table; returns the best even-column estimate.
#[derive(Debug, Default)]
struct Wynn {
    diag: Vec<f64>,
}

impl Wynn {
    fn push(&mut self, s: f64) -> f64 {
        let mut next = Vec::with_capacity(self.diag.len() + 1);
        next.push(s);
        for k in 0..self.diag.len() {
            let diff = next[k] - self.diag[k];
            if diff == 0.0 || !diff.is_finite() {
                break;
            }
            let prev = if k == 0 { 0.0 } else { self.diag[k - 1] };
            let v = prev + 1.0 / diff;
            if !v.is_finite() {
                break;
            }
            next.push(v);
        }
        self.diag = next;
        let top = if (self.diag.len() - 1) % 2 == 0 {
            self.diag.len() - 1
        } else {
            self.diag.len() - 2
        };
        self.diag[top]
    }
}
