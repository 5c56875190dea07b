"""End-to-end acceptance criteria, one test each, with a printed verdict line."""

from __future__ import annotations

import json
import math
import time

import numpy as np

from dglab.cli import main
from dglab.degiorgi import energy_sides, giusti_iterate, giusti_threshold, make_cutoff
from dglab.errors import DomainError
from dglab.geometry import Grid, RegionPartition, ball_row, cylinder
from dglab.harnack import expansion_check, harnack_probe, regime_harnack
from dglab.pipeline import Run
from dglab.scenario import bundled, load_scenario, scenario_from_dict
from dglab.solver import (BoundaryData, EquationCoefficients, l2_norm, solve_forward_backward,
                          solve_parabolic)
from dglab.weights import (WeightField, ainfty_plan, concentric_plan, fit_Ainfty, fit_B2q,
                           waiting_time_identities)

# pinned tolerances
HEAT_LINF = 2e-3
HEAT_SECONDS = 5.0
N_RANDOM_PROBES = 50
GIUSTI_SECONDS = 1.0
GAMMA_DRIFT = 0.10
GAUSS_TOL = 1e-3
RATIO_DRIFT = 0.05
LAMBDA_DRIFT = 0.10
LIMIT_TOL = 1e-6
EXAMPLE_SECONDS = 60.0
FB_CONST_TOL = 1e-10
FB_ORDER_MIN = 0.9
FB_SECONDS = 10.0


def verdict(capsys, n: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[acceptance {n:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def scenario_at(name: str, **grid):
    raw = json.loads(bundled(name).read_text())
    raw["grid"].update(grid)
    return scenario_from_dict(raw)


def gauss(x, t):
    return (t + 1) ** -0.5 * np.exp(-x * x / (4 * (t + 1)))


def test_criterion_01_heat_oracle(capsys):
    g = Grid(0.0, 1.0, 0.1, 201, 201)
    w = WeightField.constant(RegionPartition.trivial(g), 1.0)
    bd = BoundaryData(lambda x, t: np.where(t == 0, np.sin(np.pi * x), 0.0))
    t0 = time.perf_counter()
    u = solve_parabolic(EquationCoefficients.constant(g), w, bd)
    secs = time.perf_counter() - t0
    err = float(np.abs(u.values - np.exp(-np.pi ** 2 * g.t)[:, None] * np.sin(np.pi * g.x)).max())
    verdict(capsys, 1, err < HEAT_LINF and secs < HEAT_SECONDS,
            f"heat L-inf error {err:.3e} (< {HEAT_LINF}), solve {secs:.3f} s (< {HEAT_SECONDS} s)")


def test_criterion_02_waiting_time_identities(capsys):
    sc = load_scenario(bundled("figure2_moving_interface"))
    w, kappa = sc.weight, sc.raw.get("kappa", 0.25)
    rng = np.random.default_rng(2)
    reports = []
    while len(reports) < N_RANDOM_PROBES:
        x0, t0, r = rng.uniform(-0.8, 0.8), rng.uniform(0.05, 0.95), rng.uniform(0.02, 0.2)
        try:
            reports.append(waiting_time_identities(w, x0, t0, r, kappa=kappa))
        except DomainError:
            continue
    worst = max(abs(v) for rep in reports for v in rep.shift_residual.values())
    held = sum(all(rep.scaling_holds.values()) for rep in reports)
    verdict(capsys, 2, worst == 0.0 and held == N_RANDOM_PROBES,
            f"shift residual max {worst!r} over {len(reports)} probes; scaling bound holds on {held}")


def test_criterion_03_weight_classes(capsys):
    g = Grid(-1.0, 1.0, 1.0, 200, 3)
    centers, radii = [0.0, 0.2, -0.5], [0.05, 0.1, 0.2, 0.4]
    plan = ainfty_plan(g, centers, radii)
    pairs = concentric_plan(centers, radii)
    one = WeightField.constant(RegionPartition.trivial(g), 1.0)
    fit1 = fit_Ainfty(one, 0, plan)
    K1_one = fit_B2q(one, 0, 3.0, pairs)
    ok_one = fit1.K2 == 1.0 and fit1.varsigma == 1.0 and K1_one <= 1.0
    w = WeightField.from_function(RegionPartition.trivial(g), lambda x, t: np.abs(x) + 0 * t)
    fit = fit_Ainfty(w, 0, plan)
    row = w.values[0]
    bad = 0
    for p in plan:
        a = p.sub.sum() / p.ball.sum()
        ratio = row[p.sub].sum() / row[p.ball].sum()
        bad += ratio > fit.K2 * a ** fit.varsigma * (1 + 1e-12)
        bad += a ** fit.b > fit.K2 * ratio * (1 + 1e-12)
    K1 = fit_B2q(w, 0, 3.0, pairs)
    for c, r, rho in pairs:
        try:
            bad += fit_B2q(w, 0, 3.0, [(c, r, rho)]) > K1
        except DomainError:
            pass
    verdict(capsys, 3, ok_one and fit.in_class and bad == 0,
            f"unit weight K2={fit1.K2} varsigma={fit1.varsigma} K1={K1_one:.4f}; "
            f"|x| K2={fit.K2:.3f} varsigma={fit.varsigma:.3f} b={fit.b:.3f} K1={K1:.3f}, violations {bad}")


def test_criterion_04_giusti_lattice(capsys):
    t0 = time.perf_counter()
    failures = []
    for c in (0.5, 1.0, 2.0):
        for alpha in (0.5, 1.0, 2.0):
            for b in (1.5, 2.0, 4.0):
                th = giusti_threshold(c, b, alpha)
                low = giusti_iterate(0.99 * th, c, b, alpha, 40)
                high = giusti_iterate(1.5 * max(th, 1.0), c, b, alpha, 40)
                if not (low.converged and low.sequence[-1] < 1e-12):
                    failures.append(("converge", c, alpha, b))
                if not (high.overflow or high.sequence[-1] > 1):
                    failures.append(("diverge", c, alpha, b))
    secs = time.perf_counter() - t0
    verdict(capsys, 4, not failures and secs < GIUSTI_SECONDS,
            f"27 lattice points, failures {failures}, {secs * 1e3:.1f} ms (< {GIUSTI_SECONDS} s)")


CUTOFFS = [(0.5, 0.1, 0.3, 0.05, 0.02), (0.4, 0.15, 0.25, 0.06, 0.03), (0.6, 0.05, 0.2, 0.04, 0.01)]


def test_criterion_05_energy_gamma(capsys):
    gammas = []
    for n in (101, 201):
        g = Grid(0.0, 1.0, 0.1, n, n)
        part = RegionPartition.trivial(g)
        w = WeightField.constant(part, 1.0)
        u = solve_parabolic(EquationCoefficients.constant(g), w,
                            BoundaryData(lambda x, t: np.where(t == 0, np.sin(np.pi * x), 0.0)))
        row = []
        for xc, ri, ro, ti, to in CUTOFFS:
            z = make_cutoff(g, cylinder(g, part, xc, 0.1, ri, 1.0, (0.1 - ti) / ri ** 2),
                            cylinder(g, part, xc, 0.1, ro, 1.0, (0.1 - to) / ro ** 2))
            row.append(energy_sides(u, w, z, 0.0, to, 0.1, "plus").gamma_required)
        gammas.append(row)
    drift = [abs(a - b) / b for a, b in zip(*gammas)]
    ok = all(math.isfinite(v) for v in gammas[0] + gammas[1]) and max(drift) < GAMMA_DRIFT
    verdict(capsys, 5, ok, "gamma 101^2 " + ", ".join(f"{v:.4f}" for v in gammas[0])
            + " | 201^2 " + ", ".join(f"{v:.4f}" for v in gammas[1])
            + f" | max drift {max(drift):.3%} (< {GAMMA_DRIFT:.0%})")


def _gauss_reports(sc):
    u = solve_parabolic(sc.coefficients, sc.weight, sc.boundary, sc.form)
    return u, [harnack_probe(u, sc.weight, p, sc.R_bar) for p in sc.probes]


def test_criterion_06_gaussian_harnack(capsys):
    sc = load_scenario(bundled("gaussian_harnack"))
    u, reps = _gauss_reports(sc)
    g = u.grid
    errs = []
    for rep in reps:
        p = rep.probe
        nodes = g.x[ball_row(g, p.x0, p.r)]
        errs += [abs(rep.sup_past - gauss(nodes, rep.t_past).max()),
                 abs(rep.center_value - gauss(g.x[g.node_index(p.x0)], p.t0)),
                 abs(rep.inf_future - gauss(nodes, rep.t_future).min())]
    ratios = [[r.ratio_c, r.ratio_hat, r.ratio_paraboloid] for r in reps]
    _, fine = _gauss_reports(scenario_at("gaussian_harnack", nx=2 * g.nx - 1, nt=2 * g.nt - 1))
    fine_ratios = [[r.ratio_c, r.ratio_hat, r.ratio_paraboloid] for r in fine]
    drift = max(abs(a - b) / b for ra, rb in zip(ratios, fine_ratios) for a, b in zip(ra, rb))
    finite = all(math.isfinite(v) for row in ratios + fine_ratios for v in row)
    verdict(capsys, 6, max(errs) < GAUSS_TOL and finite and drift < RATIO_DRIFT,
            f"{len(reps)} probes: max closed-form error {max(errs):.2e} (< {GAUSS_TOL}), "
            f"ratios finite={finite}, doubling drift {drift:.3%} (< {RATIO_DRIFT:.0%})")


def _expansion(sc):
    e = sc.raw["expansion"]
    u = solve_parabolic(sc.coefficients, sc.weight, sc.boundary, sc.form)
    return expansion_check(u, sc.weight, e["x0"], e["t0"], e["r"], e["h_level"], e["thetas"]).lambda_measured


def test_criterion_07_expansion(capsys):
    sc = load_scenario(bundled("expansion_bump"))
    lam = _expansion(sc)
    g = sc.grid
    lam2 = _expansion(scenario_at("expansion_bump", nx=2 * g.nx - 1, nt=2 * g.nt - 1))
    drift = abs(lam - lam2) / lam2
    verdict(capsys, 7, 0 < lam < 1 and 0 < lam2 < 1 and drift < LAMBDA_DRIFT,
            f"lambda {lam:.4f} -> {lam2:.4f} under doubling, drift {drift:.2%} (< {LAMBDA_DRIFT:.0%})")


def test_criterion_08_step_example(capsys, tmp_path):
    sc = load_scenario(bundled("paper_s7_example"))
    t0 = time.perf_counter()
    run = Run(sc, tmp_path)
    sweep = run.sweep()
    hold = run.holder()
    secs = time.perf_counter() - t0
    eps_ok = sweep["eps"] == [2.0 ** -k for k in range(11)]
    ex = hold["interface_example"]
    alphas = sorted({(r["kind"], r["x0"], r["t0"], r["alpha"]) for r in ex["rows"]})
    ok = (eps_ok and sweep["decreasing"] and ex["passed"] and sweep["targets_ok"]
          and secs < EXAMPLE_SECONDS)
    verdict(capsys, 8, ok,
            f"sweep decreasing={sweep['decreasing']}, discontinuity kept={ex['discontinuity_ok']} "
            f"(jump {ex['jump']:.4f}), holder rows {alphas}, "
            f"limit checks={sweep['targets_ok']} (tol {LIMIT_TOL}), {secs:.1f} s (< {EXAMPLE_SECONDS} s)")


def test_criterion_09_forward_backward(capsys):
    sc = load_scenario(bundled("forward_backward_sign"))
    co, w = sc.coefficients, sc.weight
    const = solve_forward_backward(co, w, 0.0, BoundaryData(lambda x, t: np.ones_like(x)))
    const_err = float(np.abs(const.values - 1.0).max())
    t0 = time.perf_counter()
    u = solve_forward_backward(co, w, sc.raw.get("eps_strip", 0.0), sc.boundary)
    secs = time.perf_counter() - t0
    sols = {}
    for n in (51, 101, 201, 401):
        s = scenario_at("forward_backward_sign", nx=n, nt=n)
        sols[n] = solve_forward_backward(s.coefficients, s.weight, 0.0, s.boundary)
    coarse = sols[51].grid
    diffs = [l2_norm(coarse, sols[a].restrict_to(coarse).values - sols[b].restrict_to(coarse).values)
             for a, b in ((51, 101), (101, 201), (201, 401))]
    orders = [math.log2(diffs[i] / diffs[i + 1]) for i in range(2)]
    reps = regime_harnack(u, w, sc.probes, "forward_backward", sc.R_bar)
    etas = [r.eta for r in reps]
    ok = (const_err < FB_CONST_TOL and min(orders) > FB_ORDER_MIN
          and all(math.isfinite(v) for v in etas) and secs < FB_SECONDS)
    verdict(capsys, 9, ok,
            f"constant data error {const_err:.1e} (< {FB_CONST_TOL}); self-convergence orders "
            f"{', '.join(f'{o:.3f}' for o in orders)} (> {FB_ORDER_MIN}); etas "
            f"{', '.join(f'{e:.4f}' for e in etas)}; 201x201 global solve {secs:.2f} s (< {FB_SECONDS} s)")


def test_criterion_10_determinism(capsys, tmp_path):
    trees = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["all", "--config", "paper_s7_example", "--out", str(out)]) == 0
        trees.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same = trees[0] == trees[1]
    verdict(capsys, 10, same and len(trees[0]) > 0,
            f"{len(trees[0])} files, byte-identical={same}")
