"""Scenario stages: each one computes its reports and writes them to the output directory."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from . import export, plotting
from .degiorgi import energy_sides, make_cutoff
from .errors import DomainError, MissingReport
from .geometry import NodeSet, ball, ball_row
from .harnack import ExpansionReport, HarnackReport, RegimeReport, expansion_check, harnack_probe, regime_harnack
from .holder import holder_fit, interface_example_check
from .scenario import Scenario
from .solver import (ScalarField, convergence_report, default_eps, l2_norm, h1_norm, solve_degenerate_limit,
                     solve_elliptic_parabolic, solve_forward_backward, solve_parabolic)
from .weights import check_hypotheses, verify_consequences, waiting_time_identities

T = TypeVar("T")
R = TypeVar("R")

HARNACK_COLUMNS = ["index", "x0", "t0", "r", "j", "regime", "case", "h_sub", "h_sup", "center",
                   "sup_past", "inf_future", "inf_paraboloid", "lhs", "rhs", "ratio_c", "ratio_hat",
                   "ratio_paraboloid", "eta", "x1", "t1", "rho_bar", "slice_rounding_error", "flags"]
HOLDER_COLUMNS = ["kind", "x0", "t0", "side", "radius", "osc", "alpha", "residual", "flags"]
SWEEP_COLUMNS = ["eps", "l2_next", "h1_next", "l2_to_limit"]
ENERGY_COLUMNS = ["cutoff", "k", "sign", "term", "value"]
PLOTS = ("oscillation.svg", "ratios.svg", "eps_sweep.svg")


def pmap(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> list[R]:
    """Ordered map, threaded when ``workers > 1``."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


@dataclass
class Run:
    scenario: Scenario
    out: Path
    workers: int = 1
    _u: ScalarField | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.out = Path(self.out)
        self.out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out / name

    # ------------------------------------------------------------- solve
    @property
    def u(self) -> ScalarField:
        if self._u is None:
            self._u = self._solve()
        return self._u

    def _solve(self) -> ScalarField:
        sc = self.scenario
        co, w, bd = sc.coefficients, sc.weight, sc.boundary
        if sc.regime == "homogeneous":
            return solve_parabolic(co, w, bd, sc.form)
        if sc.regime == "elliptic_parabolic":
            return solve_degenerate_limit(co, w, bd, sc.form)
        return solve_forward_backward(co, w, float(sc.raw.get("eps_strip", 0.0)), bd)

    def solve(self) -> ScalarField:
        u = self.u
        export.write_solution_csv(self.path("solution.csv"), u)
        export.write_solution_bin(self.path("solution.bin"), u)
        return u

    # ------------------------------------------------------------- eps sweep
    def _targets(self) -> dict[str, NodeSet]:
        g = self.scenario.grid
        targets = {"domain": NodeSet(g, np.ones(g.shape, dtype=bool), spacetime=True)}
        for k, p in enumerate(self.scenario.probes):
            try:
                targets[f"probe{k}"] = ball(g, p.x0, p.r, g.slice_index(p.t0))
            except DomainError:
                continue
        return targets

    def sweep(self) -> dict:
        sc = self.scenario
        rows: list[dict] = []
        summary: dict = {"regime": sc.regime}
        if sc.regime == "elliptic_parabolic":
            k_max = int(sc.raw.get("eps_sweep", {}).get("k_max", 10))
            family = solve_elliptic_parabolic(sc.coefficients, sc.weight, float(sc.raw.get("rho0", 1.0)),
                                              sc.boundary, default_eps(k_max), sc.form)
            rep = convergence_report(family, self._targets())
            direct = self.u
            for k, f in enumerate(family):
                nxt = family[k + 1] if k + 1 < len(family) else None
                rows.append({"eps": rep.eps[k],
                             "l2_next": rep.l2_successive[k] if nxt is not None else math.nan,
                             "h1_next": rep.h1_successive[k] if nxt is not None else math.nan,
                             "l2_to_limit": l2_norm(sc.grid, f.values - direct.values)})
            summary.update({
                "eps": rep.eps, "decreasing": rep.decreasing,
                "extrapolated_vs_direct_max": float(np.abs(rep.limit.values - direct.values).max()),
                "targets_ok": rep.targets_ok, "targets": rep.targets})
        elif sc.regime == "forward_backward" and sc.raw.get("eps_strip_sweep"):
            eps = sorted(set(float(e) for e in sc.raw["eps_strip_sweep"]), reverse=True)
            sols = [solve_forward_backward(sc.coefficients, sc.weight, e, sc.boundary) for e in eps]
            base = self.u
            for k, (e, s) in enumerate(zip(eps, sols)):
                nxt = sols[k + 1] if k + 1 < len(sols) else None
                rows.append({"eps": e,
                             "l2_next": l2_norm(sc.grid, nxt.values - s.values) if nxt else math.nan,
                             "h1_next": h1_norm(sc.grid, nxt.values - s.values) if nxt else math.nan,
                             "l2_to_limit": l2_norm(sc.grid, s.values - base.values)})
            diffs = [r["l2_next"] for r in rows[:-1]]
            summary.update({"eps": eps, "decreasing": all(b <= 1.1 * a for a, b in zip(diffs, diffs[1:]))})
        export.write_csv(self.path("sweep.csv"), rows, SWEEP_COLUMNS)
        export.write_json(self.path("sweep.json"), summary)
        return summary

    # ------------------------------------------------------------- weights
    def weights(self) -> dict:
        sc = self.scenario
        plan = sc.probe_plan
        if plan is None:
            out = {"skipped": "no weights probe plan"}
            export.write_json(self.path("weights.json"), out)
            export.write_csv(self.path("weights.csv"), [], ["x0", "t0", "j", "r"])
            return out
        f = sc.hypothesis_weight
        kappa, delta = float(sc.raw.get("kappa", 0.25)), float(sc.raw.get("delta", 0.1))
        rep = check_hypotheses(f, kappa, delta, sc.R_bar, plan)
        cons = verify_consequences(f, rep, plan)
        ids = []
        for x0, t0 in plan.points:
            for r in plan.radii:
                try:
                    idr = waiting_time_identities(f, x0, t0, r, kappa)
                except DomainError:
                    continue
                ids.append({"x0": x0, "t0": t0, "r": r, "ok": idr.ok,
                            "shift_residual": idr.shift_residual, "scaling_holds": idr.scaling_holds})
        out = {"report": rep.to_dict(), "consequences": cons, "identities": ids}
        export.write_json(self.path("weights.json"), out)
        cols = ["x0", "t0", "j", "r", "H2_i", "H2_ii", "H3_i", "H3_ii"]
        export.write_csv(self.path("weights.csv"), rep.probes, cols)
        return out

    # ------------------------------------------------------------- De Giorgi energies
    def degiorgi(self) -> list[dict]:
        sc = self.scenario
        spec = sc.raw.get("degiorgi", {"cutoffs": []})
        g, u = sc.grid, self.u
        levels = spec.get("levels", [0.0])
        signs = spec.get("signs", ["plus"])
        include_k2 = bool(spec.get("include_k2", True))
        reports, rows = [], []
        for ci, c in enumerate(spec["cutoffs"]):
            inner = _box_set(g, c["x0"], c["r_inner"], c["t_inner"], c["t2"])
            outer = _box_set(g, c["x0"], c["r_outer"], c["t_outer"], c["t2"])
            zeta = make_cutoff(g, inner, outer)
            for k in levels:
                for s in signs:
                    e = energy_sides(u, sc.weight.magnitude(), zeta, float(k), c["t_outer"], c["t2"], s, include_k2)
                    d = e.to_dict()
                    d.update({"cutoff": ci, "grad_sup": zeta.grad_sup, "zt_sup": zeta.zt_sup})
                    reports.append(d)
                    rows.extend({"cutoff": ci, "k": e.k, "sign": s, "term": name, "value": val}
                                for name, val in e.terms())
        export.write_json(self.path("energy.json"), reports)
        export.write_csv(self.path("energy.csv"), rows, ENERGY_COLUMNS)
        return reports

    # ------------------------------------------------------------- Harnack
    def harnack(self) -> dict:
        sc = self.scenario
        u, w = self.u, sc.weight
        probes = sc.probes
        if sc.regime == "homogeneous":
            reps = pmap(lambda p: harnack_probe(u, w, p, sc.R_bar), probes, self.workers)
        else:
            excl = sc.discontinuity_slices
            reps = pmap(lambda p: regime_harnack(u, w, [p], sc.regime, sc.R_bar, excl)[0], probes, self.workers)
        rows = [_harnack_row(i, r) for i, r in enumerate(reps)]
        out: dict = {"probes": rows}
        if "expansion" in sc.raw:
            e = sc.raw["expansion"]
            exp = expansion_check(u, w, e["x0"], e["t0"], e["r"], e["h_level"], e["thetas"],
                                  e.get("j"), e.get("eta", 0.5), sc.regime)
            out["expansion"] = _expansion_dict(exp)
        export.write_csv(self.path("harnack.csv"), rows, HARNACK_COLUMNS)
        export.write_json(self.path("harnack.json"), out)
        return out

    # ------------------------------------------------------------- Hoelder
    def holder(self) -> dict:
        sc = self.scenario
        u = self.u
        spec = sc.raw.get("holder", {})
        w = sc.weight.magnitude() if sc.regime == "forward_backward" else sc.weight
        radii = spec.get("radii", [0.2, 0.126, 0.08, 0.05, 0.032, 0.02])
        pts = [tuple(p) for p in spec.get("probes", [])]
        traces = pmap(lambda p: holder_fit(u, w, p[0], p[1], radii), pts, self.workers)
        rows, fits = [], []
        for (x0, t0), tr in zip(pts, traces):
            fits.append({"kind": "probe", "x0": x0, "t0": t0, "side": tr.side, "alpha": tr.alpha,
                         "residual": tr.residual, "monotone": tr.monotone, "flags": tr.flags})
            rows.extend(_trace_rows("probe", x0, t0, tr))
        out: dict = {"fits": fits}
        if spec.get("interface_example"):
            ex = interface_example_check(u, sc.weight, radii)
            rows.extend(_trace_rows("discontinuity", 0.5, 1.0, ex.discontinuity))
            for kind, group in (("interface", ex.interface), ("interior", ex.interior)):
                for (x0, t0), tr in group.items():
                    rows.extend(_trace_rows(kind, x0, t0, tr))
            out["interface_example"] = {"passed": ex.passed, "jump": ex.jump,
                                        "discontinuity_ok": ex.discontinuity_ok,
                                        "interface_ok": ex.interface_ok, "interior_ok": ex.interior_ok,
                                        "rows": ex.rows()}
        export.write_csv(self.path("holder.csv"), rows, HOLDER_COLUMNS)
        export.write_json(self.path("holder.json"), out)
        return out

    # ------------------------------------------------------------- plots
    def plots(self) -> list[Path]:
        return emit_plots(self.out)


def _box_set(g, x0: float, r: float, ta: float, tb: float) -> NodeSet:
    ja, jb = g.slice_index(ta), g.slice_index(tb)
    mask = np.zeros(g.shape, dtype=bool)
    mask[ja:jb + 1] = ball_row(g, x0, r)
    return NodeSet(g, mask, spacetime=True)


def _harnack_row(i: int, rep: HarnackReport | RegimeReport) -> dict:
    if isinstance(rep, HarnackReport):
        row = rep.row()
        row.update({"index": i, "case": "interior", "lhs": rep.center_value, "rhs": rep.inf_future,
                    "eta": rep.ratio_c})
        return row
    p = rep.probe
    row = rep.row()
    row.update({"index": i, "j": p.region, "center": rep.components.get("center", math.nan)})
    return {k: row.get(k) for k in HARNACK_COLUMNS}


def _expansion_dict(e: ExpansionReport) -> dict:
    return {"lambda_measured": e.lambda_measured, "theta_measured": e.theta_measured,
            "per_theta": [{"theta": t, "lambda": lam} for t, lam in e.per_theta],
            "h_future": e.h_future, "flags": e.flags,
            "sublevel_fractions": [{"t": t, "fraction": f} for t, f in e.fractions]}


def _trace_rows(kind: str, x0: float, t0: float, tr) -> Iterable[dict]:
    for r, o in tr.rows():
        yield {"kind": kind, "x0": x0, "t0": t0, "side": tr.side, "radius": r, "osc": o,
               "alpha": tr.alpha, "residual": tr.residual, "flags": ";".join(tr.flags)}


def _num(v: str) -> float:
    return float(v) if v not in ("", None) else math.nan


def emit_plots(out: Path) -> list[Path]:
    """Render the three SVGs from the report files in ``out``."""
    out = Path(out)
    need = {"holder.csv": "oscillation", "harnack.csv": "ratios", "sweep.csv": "eps sweep"}
    for name, what in need.items():
        if not (out / name).is_file():
            raise MissingReport(f"{what} plot needs {out / name}")
    traces: dict[str, tuple[list[float], list[float]]] = {}
    for row in export.read_csv(out / "holder.csv"):
        key = f"{row['kind']} ({row['x0']}, {row['t0']})"
        rs, os_ = traces.setdefault(key, ([], []))
        rs.append(_num(row["radius"]))
        os_.append(_num(row["osc"]))
    hrows = export.read_csv(out / "harnack.csv")
    series = {"eta": [_num(r["eta"]) for r in hrows]}
    if any(r["ratio_hat"] for r in hrows):
        series["sup/inf"] = [_num(r["ratio_hat"]) for r in hrows]
    srows = export.read_csv(out / "sweep.csv")
    return [plotting.oscillation_plot(out / PLOTS[0], traces),
            plotting.ratio_plot(out / PLOTS[1], series),
            plotting.sweep_plot(out / PLOTS[2], [_num(r["eps"]) for r in srows],
                                [_num(r["l2_next"]) for r in srows])]


def run_all(scenario: Scenario, out: Path, workers: int = 1) -> Run:
    """Validate, then run every enabled stage and the plots."""
    scenario.validate()
    run = Run(scenario, out, workers)
    stages = scenario.stages
    run.solve()
    run.sweep()
    for name in ("weights", "degiorgi", "harnack", "holder"):
        if name in stages:
            getattr(run, name)()
    for name, cols in (("harnack.csv", HARNACK_COLUMNS), ("holder.csv", HOLDER_COLUMNS)):
        if not run.path(name).exists():
            export.write_csv(run.path(name), [], cols)
    run.plots()
    return run

