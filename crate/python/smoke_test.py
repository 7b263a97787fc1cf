"""Quick end-to-end check of the Python bindings."""

import json
import math

import narrowflux_py as nf


def main():
    e = nf.sphere_drop_neumann(0.1, 2.0)
    assert abs(e.total - (e.leading + e.log_term + e.quad_term)) < 1e-15
    assert abs(e.total - 0.21594) < 1e-4
    assert abs(nf.close_window_coefficient(100.0) - (2.0 - 1.0 / 100.0)) < 2e-4

    pair = nf.WindowConfig.sphere_pair(0.05, 2.0, "absorbing")
    u1, ubar, fluxes = pair.solve_linsys()
    assert abs(u1 - nf.sphere_drop_absorbing(0.05, 2.0).total) < 1e-12
    assert abs(sum(fluxes) + math.pi * 0.05**2) < 1e-15
    drop, err = pair.bem_drop(mesh_level=0)
    assert abs(drop / u1 - 1.0) < 0.02, (drop, u1)

    cfg = nf.WindowConfig.from_json(json.dumps({
        "domain": {"type": "unit_sphere"}, "current": 1.0, "diffusion": 1.0,
        "windows": [
            {"center": [0, 0, 1], "radius": 0.2, "role": "influx"},
            {"center": [1, 0, 0], "radius": 0.2, "role": "absorbing"},
            {"center": [-1, 0, 0], "radius": 0.2, "role": "absorbing"},
        ],
    }))
    p, se = cfg.mc_split(n_particles=2000, seed=1)
    assert abs(p[0] - 0.5) < 3 * se[0] and abs(sum(p) - 1.0) < 1e-15

    hs = nf.HalfSpacePair(0.05, 0.2)
    assert abs(hs.field(0.0, 0.0, 0.3) - hs.u0) < 1e-12
    t = hs.trace()
    assert abs(t.l_pe - (0.861 * 0.2 - 0.05**2 / 0.2)) < 0.05 * 0.1597
    assert t.points[0][2] == 0.0 and t.points[-1][2] == 0.0
    a, b = nf.fit_penetration([0.01, 0.02, 0.05, 0.1], [0.1, 0.2, 0.3, 0.4])
    assert abs(a - 0.861) < 0.05 * 0.861 and abs(b - 1.7445) < 0.1 * 1.7445

    for bad in (lambda: nf.WindowConfig.sphere_pair(0.3, 0.4),
                lambda: nf.HalfSpacePair(0.05, 0.2, bc="robin")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")
    print(f"smoke test ok: drop={e.total:.6f} bem={drop:.6f} a={a:.4f} b={b:.4f} L_pe={t.l_pe:.4f}")


if __name__ == "__main__":
    main()
