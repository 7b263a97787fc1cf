//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{FRAC_PI_3, PI};
use std::time::{Duration, Instant};

use narrowflux::asymptotics::{
    close_window_coefficient, drop_two_window_neumann_general, sphere_drop_absorbing, sphere_drop_n, sphere_drop_neumann,
    sphere_fluxes, NeumannQuadData,
};
use narrowflux::geometry::{from_angles, validate_config, DistanceMatrix, Role, ValidatedConfig, WindowConfig, WindowSpec};
use narrowflux::greens::{gs_sphere_chord, SPHERE_V};
use narrowflux::halfspace::{
    field, fit_constants, mixed_u0_from_balance, normal_derivative, trace_flow, trace_grid, HalfSpaceBc, HalfSpacePair,
    TraceOptions,
};
use narrowflux::linsys::{influx_drop, KernelTreatment};
use narrowflux::specfun::{integrate_bessel_terms, BesselTerm, Factor, QuadratureSpec};
use narrowflux::validators::{bem_solve_extrapolated, mc_flux_split, relative_error, BemMesh, McConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn three_windows() -> ValidatedConfig {
    let eps = 0.1;
    validate_config(&WindowConfig::unit_sphere(vec![
        WindowSpec::new([0.0, 0.0, 1.0], eps, Role::Influx),
        WindowSpec::new(from_angles(FRAC_PI_3, 0.0), eps, Role::Absorbing),
        WindowSpec::new([0.0, 0.0, -1.0], eps, Role::Absorbing),
    ]))
    .unwrap()
}

fn c1_tangent_coefficient() -> Outcome {
    let c = close_window_coefficient(2.0).unwrap();
    outcome(
        (c - 1.41676).abs() <= 1e-4,
        format!("coefficient(eta=2) = {c:.6}, target 1.41676 +- 1e-4 (modulus convention differs, see notes)"),
    )
}

fn c2_penetration_fit() -> Outcome {
    let eps = [0.01, 0.02, 0.05, 0.1];
    let l = [0.1, 0.2, 0.3, 0.4];
    let samples = trace_grid(&eps, &l, 1.0, HalfSpaceBc::NeumannPair, &TraceOptions::default()).unwrap();
    let f = fit_constants(&samples).unwrap();
    let ea = (f.a - 0.8610).abs() / 0.8610;
    let eb = (f.b - 1.7445).abs() / 1.7445;
    outcome(
        ea < 0.05 && eb < 0.10,
        format!(
            "a = {:.5} ({:.2}% off), b = {:.5} ({:.2}% off), {} grid points",
            f.a,
            100.0 * ea,
            f.b,
            100.0 * eb,
            samples.len()
        ),
    )
}

fn c3_series_order() -> Outcome {
    let eps = [0.1, 0.05, 0.025, 0.0125];
    let mut pts = Vec::new();
    for &e in &eps {
        let cfg = validate_config(&WindowConfig::sphere_pair(e, 2.0, Role::Absorbing)).unwrap();
        let (u1, _, _) = influx_drop(&cfg, KernelTreatment::Exact).unwrap();
        let series = sphere_drop_absorbing(e, 2.0).unwrap().total;
        pts.push((e.ln(), (u1 - series).abs().ln()));
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    outcome((2.7..=3.3).contains(&slope), format!("log-log slope = {slope:.3}, target [2.7, 3.3]"))
}

fn c4_bem_oracle() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (role, name) in [(Role::OutfluxNeumann, "neumann"), (Role::Absorbing, "absorbing")] {
        let mut re = Vec::new();
        for eps in [0.1, 0.05, 0.02] {
            let cfg = validate_config(&WindowConfig::sphere_pair(eps, 2.0, role)).unwrap();
            let num = bem_solve_extrapolated(&cfg, &BemMesh::level(1)).unwrap().drop;
            let asym = match role {
                Role::Absorbing => sphere_drop_absorbing(eps, 2.0),
                _ => sphere_drop_neumann(eps, 2.0),
            }
            .unwrap()
            .total;
            re.push(relative_error(asym, num).unwrap());
        }
        let ok = re[1].abs() < 2.0 && re[2].abs() < re[1].abs() && re[1].abs() < re[0].abs();
        pass &= ok;
        parts.push(format!("{name} Re% = {:.3}/{:.3}/{:.3}", re[0], re[1], re[2]));
    }
    outcome(pass, format!("{} at eps = 0.1/0.05/0.02", parts.join(", ")))
}

fn c5_c6_mc_and_conservation() -> (Outcome, Outcome) {
    let cfg = three_windows();
    let mc = mc_flux_split(&cfg, &McConfig::default()).unwrap();
    let (ratio, se) = mc.ratio(0, 1).unwrap();
    let asym = sphere_fluxes(0.1, &DistanceMatrix::from_points(&cfg.centers)).unwrap();
    let target = asym.fluxes[0] / asym.fluxes[1];
    let c5 = outcome(
        (ratio - target).abs() <= 3.0 * se && mc.p[0] > mc.p[1] && asym.fluxes[0].abs() > asym.fluxes[1].abs(),
        format!(
            "p_near/p_far = {ratio:.4} +- {se:.4}, expansion {target:.4} ({:.2} sigma), p = {:.4}/{:.4}",
            (ratio - target).abs() / se,
            mc.p[0],
            mc.p[1]
        ),
    );

    let mut worst_lin: f64 = 0.0;
    for cfg in [three_windows(), validate_config(&WindowConfig::sphere_pair(0.05, 2.0, Role::Absorbing)).unwrap()] {
        for t in [KernelTreatment::Truncated, KernelTreatment::Exact] {
            let (_, _, flux) = influx_drop(&cfg, t).unwrap();
            worst_lin = worst_lin.max((flux.total_flux() + PI * cfg.eps * cfg.eps).abs());
        }
    }
    let cfg = validate_config(&WindowConfig::sphere_pair(0.05, 2.0, Role::Absorbing)).unwrap();
    let bem = bem_solve_extrapolated(&cfg, &BemMesh::level(1)).unwrap();
    let influx = PI * 0.05 * 0.05;
    let bem_rel = (bem.fine.flux.total_flux() + influx).abs() / influx;
    let sum_p: f64 = mc.p.iter().sum();
    let counts_ok = mc.counts.iter().sum::<u64>() == mc.absorbed() && mc.absorbed() + mc.timeouts == 100_000;
    let c6 = outcome(
        worst_lin <= 1e-14 && bem_rel <= 1e-3 && (sum_p - 1.0).abs() <= 1e-15 && counts_ok,
        format!(
            "linsys |sum + pi eps^2| = {worst_lin:.1e}, BEM rel = {bem_rel:.1e}, MC sum p - 1 = {:.1e}",
            sum_p - 1.0
        ),
    );
    (c5, c6)
}

fn c7_identities() -> Outcome {
    let mut worst_n2: f64 = 0.0;
    let mut worst_gen: f64 = 0.0;
    for eps in [0.01, 0.05, 0.1] {
        for l in [0.5, 1.0, 2.0] {
            let d = DistanceMatrix::from_upper(2, &[l]).unwrap();
            let a = sphere_drop_n(eps, &d).unwrap().total;
            let b = sphere_drop_absorbing(eps, l).unwrap().total;
            worst_n2 = worst_n2.max((a - b).abs());
            let q = NeumannQuadData {
                v1: SPHERE_V,
                v2: SPHERE_V,
                gs12: gs_sphere_chord(l),
            };
            let g = drop_two_window_neumann_general(1.0, 1.0, eps, Some(q)).unwrap().total;
            worst_gen = worst_gen.max((g - sphere_drop_neumann(eps, l).unwrap().total).abs());
        }
    }
    let mut close_ok = true;
    let mut devs = Vec::new();
    for eta in [20.0, 50.0, 100.0] {
        let dev = close_window_coefficient(eta).unwrap() - (2.0 - 1.0 / eta);
        close_ok &= dev.abs() <= 2e-2 / eta;
        devs.push(format!("{dev:.2e}"));
    }
    outcome(
        worst_n2 == 0.0 && worst_gen <= 1e-12 && close_ok,
        format!(
            "N=2 vs absorbing max diff = {worst_n2:.1e}, general vs sphere = {worst_gen:.1e}, close-window deviations {}",
            devs.join("/")
        ),
    )
}

fn c8_halfspace_bc() -> Outcome {
    let (eps, l, i) = (0.05, 0.2, 1.0);
    let mut worst_in: f64 = 0.0;
    let mut worst_out: f64 = 0.0;
    for bc in [HalfSpaceBc::NeumannPair, HalfSpaceBc::MixedAbsorbing] {
        let p = HalfSpacePair::new(eps, l, i, bc).unwrap();
        for frac in [0.0, 0.2, 0.4, 0.6, 0.8] {
            let v = normal_derivative(&p, -0.5 * l + frac * eps, 0.0).unwrap();
            worst_in = worst_in.max((v + i).abs());
        }
        for rho in [1.2 * eps, 2.0 * eps, 0.15, 0.5, 2.0] {
            let v = normal_derivative(&p, -0.5 * l - rho, 0.0).unwrap();
            worst_out = worst_out.max(v.abs());
        }
    }
    // Isolated absorbing disk: u0 - (eps I / 2) * int sin(m eps) J0(m rho) dm / m at its centre.
    let spec = QuadratureSpec::new(1e-12, 1e-10, 4000).unwrap();
    let u0 = PI * eps * i / 4.0;
    let w = integrate_bessel_terms(&[BesselTerm::new(1.0, Factor::Sin(eps), Factor::J0(0.0), 1.0)], 0.0, &spec).unwrap();
    let centre = u0 - 0.5 * eps * i * w;
    let balance = mixed_u0_from_balance(eps, i).unwrap();
    let pair = HalfSpacePair::new(eps, l, i, HalfSpaceBc::MixedAbsorbing).unwrap();
    let pair_centre = field(&pair, 0.5 * l, 0.0, 0.0).unwrap();
    outcome(
        worst_in <= 1e-6 && worst_out <= 1e-6 && centre.abs() <= 1e-6 && (balance - u0).abs() <= 1e-6,
        format!(
            "influx |du/dz + I| = {worst_in:.1e}, outside |du/dz| = {worst_out:.1e}, disk centre u = {centre:.1e}, \
             u0 balance - pi eps/4 = {:.1e} (pair superposition leaves u = {pair_centre:.2e} at exit centre)",
            balance - u0
        ),
    )
}

fn c9_amplitude() -> Outcome {
    let mut l_pe = Vec::new();
    let mut t_i = Vec::new();
    for i in [0.5, 1.0, 2.0] {
        let p = HalfSpacePair::new(0.05, 0.2, i, HalfSpaceBc::NeumannPair).unwrap();
        let t = trace_flow(&p, &TraceOptions::default()).unwrap();
        l_pe.push(t.l_pe);
        t_i.push(t.t_tr * i);
    }
    let dl = l_pe.iter().map(|v| (v - l_pe[1]).abs()).fold(0.0, f64::max);
    let dt = t_i.iter().map(|v| (v / t_i[1] - 1.0).abs()).fold(0.0, f64::max);
    outcome(
        dl <= 1e-6 && dt <= 1e-4,
        format!("max |dL_pe| = {dl:.1e}, max rel d(T_tr I) = {dt:.1e}"),
    )
}

fn report(id: u32, name: &str, limit: Duration, start: Instant, o: Outcome, failures: &mut u32) {
    let elapsed = start.elapsed();
    let pass = o.pass && elapsed <= limit;
    if !pass {
        *failures += 1;
    }
    println!(
        "{} criterion {id} ({name}): {} [{:.2} s, limit {} s]",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
}

fn main() {
    // `cargo test -- --list` and filters from the harness are not meaningful here.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failures = 0;
    let s = |n| Duration::from_secs(n);

    let t = Instant::now();
    let o = c1_tangent_coefficient();
    report(1, "tangent-window coefficient", s(1), t, o, &mut failures);

    let t = Instant::now();
    let o = c2_penetration_fit();
    report(2, "penetration-length fit", s(300), t, o, &mut failures);

    let t = Instant::now();
    let o = c3_series_order();
    report(3, "series-vs-exact order", s(10), t, o, &mut failures);

    let t = Instant::now();
    let o = c4_bem_oracle();
    report(4, "BEM oracle agreement", s(120), t, o, &mut failures);

    let t = Instant::now();
    let (c5, c6) = c5_c6_mc_and_conservation();
    report(5, "MC flux splitting", s(300), t, c5, &mut failures);
    report(6, "compatibility conservation", s(300), t, c6, &mut failures);

    let t = Instant::now();
    let o = c7_identities();
    report(7, "consistency identities", s(10), t, o, &mut failures);

    let t = Instant::now();
    let o = c8_halfspace_bc();
    report(8, "half-space boundary conditions", s(10), t, o, &mut failures);

    let t = Instant::now();
    let o = c9_amplitude();
    report(9, "amplitude invariance", s(10), t, o, &mut failures);

    println!("{} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
