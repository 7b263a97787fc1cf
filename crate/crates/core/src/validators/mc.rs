//! Brownian particles injected through the influx window and absorbed by exit windows.
//!
//! Far from the wall a particle jumps to a uniform point on the largest
//! sphere that keeps it inside (walk on spheres, exact for hitting
//! locations). Within a boundary layer it takes Euler steps whose length
//! is `√(2 dt)` and shrinks further with the distance to the nearest exit rim,
//! reflecting radially off the wall, absorbing when the wall crossing lies
//! in an exit cap, and testing the Brownian bridge between steps for
//! unseen wall contacts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cap_point, distance, dot, norm, scale, tangent_frame, ProblemKind, ValidatedConfig, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_particles: usize,
    pub master_seed: u64,
    /// Euler time step along the wall, refined automatically near exit rims; `None` means `ε²/20`.
    pub dt: Option<f64>,
    pub max_steps: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_particles: 100_000,
            master_seed: 0,
            dt: None,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    /// Fraction of absorbed particles leaving through each exit window.
    pub p: Vec<f64>,
    pub stderr: Vec<f64>,
    pub counts: Vec<u64>,
    pub timeouts: u64,
    pub dt: f64,
}

impl McResult {
    pub fn absorbed(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `p_i / p_j` with its delta-method standard error.
    pub fn ratio(&self, i: usize, j: usize) -> Result<(f64, f64)> {
        let (pi, pj) = (self.p[i], self.p[j]);
        if pj == 0.0 || pi == 0.0 {
            return Err(Error::DivisionByZero(format!("no particles reached exit {i} or {j}")));
        }
        let r = pi / pj;
        let n = self.absorbed() as f64;
        let var = r * r / n * ((1.0 - pi) / pi + (1.0 - pj) / pj + 2.0);
        Ok((r, var.sqrt()))
    }
}

struct Walker<'a> {
    eps: f64,
    influx: Vec3,
    frame: (Vec3, Vec3),
    exits: &'a [Vec3],
    sigma_wall: f64,
    max_steps: u64,
}

/// Step length relative to the distance from the nearest exit rim.
const RIM_STEP_FRACTION: f64 = 0.25;
/// Smallest step next to a rim, relative to the wall step.
const RIM_REFINEMENT: f64 = 1.0 / 64.0;
/// Boundary layer thickness in units of the local step.
const LAYER_STEPS: f64 = 4.0;

impl Walker<'_> {
    fn exit_at(&self, p: &Vec3) -> Option<usize> {
        self.exits.iter().position(|c| distance(c, p) <= self.eps)
    }

    /// Distance from `x` to the closest exit rim circle.
    fn rim_distance(&self, x: &Vec3) -> f64 {
        let h = 1.0 - 0.5 * self.eps * self.eps;
        let a = self.eps * (1.0 - 0.25 * self.eps * self.eps).sqrt();
        self.exits
            .iter()
            .map(|c| {
                let along = dot(x, c);
                let perp = (dot(x, x) - along * along).max(0.0).sqrt();
                (along - h).hypot(perp - a)
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn launch(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        let r = self.eps * rng.random::<f64>().sqrt();
        let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        scale(&cap_point(&self.influx, &self.frame, r, phi), 1.0 - 1e-12)
    }

    fn run(&self, rng: &mut ChaCha8Rng) -> Option<usize> {
        let mut x = self.launch(rng);
        for _ in 0..self.max_steps {
            let d = 1.0 - norm(&x);
            let sigma = (RIM_STEP_FRACTION * self.rim_distance(&x)).clamp(RIM_REFINEMENT * self.sigma_wall, self.sigma_wall);
            if d > LAYER_STEPS * sigma {
                let u: [f64; 3] = UnitSphere.sample(rng);
                let r = d - 0.5 * sigma;
                x = [x[0] + r * u[0], x[1] + r * u[1], x[2] + r * u[2]];
                continue;
            }
            let xi: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let y = [x[0] + sigma * xi[0], x[1] + sigma * xi[1], x[2] + sigma * xi[2]];
            let ny = norm(&y);
            if ny >= 1.0 {
                let step = [y[0] - x[0], y[1] - x[1], y[2] - x[2]];
                let (a, b, c) = (dot(&step, &step), 2.0 * dot(&x, &step), dot(&x, &x) - 1.0);
                let t = (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a);
                let hit = [x[0] + t * step[0], x[1] + t * step[1], x[2] + t * step[2]];
                if let Some(j) = self.exit_at(&scale(&hit, 1.0 / norm(&hit))) {
                    return Some(j);
                }
                x = scale(&y, (2.0 - ny) / ny);
            } else {
                // Wall contact of the Brownian bridge between x and y (unit diffusivity, local dt = σ²/2).
                let (d0, d1) = (d, 1.0 - ny);
                if rng.random::<f64>() < (-2.0 * d0 * d1 / (sigma * sigma)).exp() {
                    let mid = [0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1]), 0.5 * (x[2] + y[2])];
                    if let Some(j) = self.exit_at(&scale(&mid, 1.0 / norm(&mid))) {
                        return Some(j);
                    }
                }
                x = y;
            }
            debug_assert!(norm(&x) <= 1.0 + 1e-12, "particle left the ball: |x| = {}", norm(&x));
        }
        None
    }
}

/// Splitting fractions between exit windows for particles injected uniformly over the influx cap.
///
/// Each particle draws from its own stream of a counter-based generator, so
/// results depend only on `(master_seed, n_particles)` and not on the worker count.
pub fn mc_flux_split(cfg: &ValidatedConfig, mc: &McConfig) -> Result<McResult> {
    cfg.require_unit_sphere()?;
    if cfg.kind()? != ProblemKind::Mixed {
        return Err(Error::Role("flux splitting needs absorbing exit windows".into()));
    }
    if mc.n_particles == 0 {
        return Err(Error::Domain("n_particles must be positive".into()));
    }
    let eps = cfg.eps;
    let dt = mc.dt.unwrap_or(eps * eps / 20.0);
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let walker = Walker {
        eps,
        influx: cfg.centers[0],
        frame: tangent_frame(&cfg.centers[0]),
        exits: &cfg.centers[1..],
        sigma_wall: (2.0 * dt).sqrt(),
        max_steps: mc.max_steps,
    };
    let n_exits = cfg.n_windows() - 1;
    let (counts, timeouts) = (0..mc.n_particles as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mc.master_seed);
            rng.set_stream(i);
            walker.run(&mut rng)
        })
        .fold(
            || (vec![0u64; n_exits], 0u64),
            |(mut c, t), fate| match fate {
                Some(j) => {
                    c[j] += 1;
                    (c, t)
                }
                None => (c, t + 1),
            },
        )
        .reduce(
            || (vec![0u64; n_exits], 0u64),
            |(mut a, ta), (b, tb)| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                (a, ta + tb)
            },
        );
    if timeouts as f64 > 0.01 * mc.n_particles as f64 {
        log::warn!("{timeouts} of {} particles hit max_steps", mc.n_particles);
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::NonConvergence("no particle reached an exit window".into()));
    }
    let n = total as f64;
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let stderr = p.iter().map(|q| (q * (1.0 - q) / n).sqrt()).collect();
    Ok(McResult {
        p,
        stderr,
        counts,
        timeouts,
        dt,
    })
}
