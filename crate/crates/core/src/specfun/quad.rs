//! Adaptive Gauss–Kronrod quadrature and Gauss–Legendre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncation policy for semi-infinite integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPolicy {
    /// For `z > 0` the integrand `e^{-mz} g(m)` is cut at `m = cutoff_factor / z`.
    pub cutoff_factor: f64,
    /// Maximum number of oscillation partitions summed before extrapolation gives up.
    pub max_partitions: usize,
}

impl Default for TailPolicy {
    fn default() -> Self {
        Self {
            cutoff_factor: 40.0,
            max_partitions: 400,
        }
    }
}

/// Tolerances and limits shared by every quadrature routine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub tail: TailPolicy,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
            tail: TailPolicy::default(),
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
            ..Self::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Domain("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions < 10 {
            return Err(Error::Domain(format!(
                "max_subdivisions must be at least 10, got {}",
                self.max_subdivisions
            )));
        }
        if !(self.tail.cutoff_factor > 0.0) || self.tail.max_partitions == 0 {
            return Err(Error::Domain("invalid tail truncation policy".into()));
        }
        Ok(())
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

// 21-point Kronrod abscissae and weights with the embedded 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    let round = 50.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(round);
    }
    Segment { a, b, value, error }
}

/// `∫_a^b f` by globally adaptive 21-point Gauss–Kronrod.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    integrate_adaptive_points(f, &[a, b], spec)
}

/// Like [`integrate_adaptive`] over `[points[0], points[last]]`, with the
/// interior points used as forced breakpoints (kinks, singularities, oscillation nodes).
pub fn integrate_adaptive_points<F: Fn(f64) -> f64>(f: F, points: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Domain("need at least two integration limits".into()));
    }
    if points.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain(format!(
            "integration breakpoints must be strictly increasing: {:?}",
            &points[..points.len().min(4)]
        )));
    }
    let mut heap: BinaryHeap<Segment> = points.windows(2).map(|w| gk21(&f, w[0], w[1])).collect();
    let limit = spec.max_subdivisions.max(heap.len() + 10);
    let mut total: f64 = heap.iter().map(|s| s.value).sum();
    let mut err: f64 = heap.iter().map(|s| s.error).sum();
    loop {
        if !total.is_finite() {
            return Err(Error::NonConvergence("integrand produced non-finite values".into()));
        }
        if err <= spec.target(total) {
            // Re-sum to shed drift from the running updates.
            total = heap.iter().map(|s| s.value).sum();
            err = heap.iter().map(|s| s.error).sum();
            if err <= spec.target(total) {
                return Ok(total);
            }
        }
        if heap.len() >= limit {
            return Err(Error::NonConvergence(format!(
                "{} subdivisions exhausted, error estimate {err:e} for value {total:e}",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval at machine resolution; accept what we have.
            log::warn!("quadrature hit roundoff limit, error estimate {err:e}");
            return Ok(total);
        }
        let left = gk21(&f, worst.a, mid);
        let right = gk21(&f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err = (err + left.error + right.error - worst.error).max(0.0);
        heap.push(left);
        heap.push(right);
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_integrand() {
        let v = integrate_adaptive(|u| u, 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
    }

    #[test]
    fn log_endpoint_singularity() {
        let v = integrate_adaptive(|u: f64| u.ln() * u, 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!((v + 0.25).abs() < 1e-10);
        let v = integrate_adaptive(|u: f64| 1.0 / u.sqrt(), 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let spec = QuadratureSpec::default();
        let v = integrate_adaptive_points(|u: f64| (u - 0.3).abs(), &[0.0, 0.3, 1.0], &spec).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-14);
        assert!(integrate_adaptive_points(|u| u, &[1.0, 0.0], &spec).is_err());
    }

    #[test]
    fn nonconvergence_is_reported() {
        let spec = QuadratureSpec::new(1e-14, 1e-14, 10).unwrap();
        let r = integrate_adaptive(|u: f64| (1.0 / u).sin() / u, 1e-6, 1.0, &spec);
        assert!(matches!(r, Err(Error::NonConvergence(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::new(0.0, 1e-8, 100).is_err());
        assert!(QuadratureSpec::new(1e-8, 1e-8, 5).is_err());
        assert!(QuadratureSpec::default().validate().is_ok());
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        for n in [1usize, 2, 5, 8, 16] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
            assert!((q - exact).abs() < 1e-13, "n={n}");
            let even = 2 * n - 2;
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(even as i32)).sum();
            assert!((q - 2.0 / (even as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }
}
