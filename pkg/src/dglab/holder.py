"""Oscillation decay over intrinsic cylinders and Hoelder-exponent fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CylinderExceedsDomain, EmptySet, ScenarioMissing
from .geometry import INTERFACE, REGION_1, REGION_2, NodeSet, _check_ball, ball_row
from .solver import ScalarField
from .weights import WeightField, waiting_times

# calibration threshold for "positive exponent" checks; not derived from theory
ALPHA_MIN = 0.2
ZERO_OSC = 1e-10


def oscillation(u: ScalarField, set_: NodeSet) -> float:
    if set_.is_empty:
        raise EmptySet("oscillation over an empty set")
    v = u.over(set_)
    return float(v.max() - v.min())


@dataclass
class OscillationTrace:
    radii: np.ndarray
    osc: np.ndarray
    alpha: float
    residual: float
    side: int | None = None
    monotone: bool = True
    flags: list[str] = field(default_factory=list)

    def rows(self) -> list[tuple[float, float]]:
        return [(float(r), float(o)) for r, o in zip(self.radii, self.osc)]


def intrinsic_cylinder(u: ScalarField, weight: WeightField, x0: float, t0: float, R: float,
                       j: int) -> NodeSet:
    """``B_R`` over ``[t0 - R^2 h_*^j, t0 + R^2 h^*_j]`` on region ``j`` and the interface."""
    grid = u.grid
    _check_ball(grid, x0, R)
    h = waiting_times(weight, x0, t0, R)
    j0 = grid.slice_index(t0)
    lo = j0 - int(math.floor(R * R * h.h_star_sub[j] / grid.dt + 0.5))
    hi = j0 + int(math.floor(R * R * h.h_star_sup[j] / grid.dt + 0.5))
    if lo < 0 or hi > grid.nt - 1:
        raise CylinderExceedsDomain(f"intrinsic cylinder of radius {R:g} leaves [0, {grid.t_hi:g}]")
    mask = np.zeros(grid.shape, dtype=bool)
    mask[lo:hi + 1] = ball_row(grid, x0, R)
    lab = weight.partition.label
    mask &= (lab == j) | (lab == INTERFACE)
    return NodeSet(grid, mask, spacetime=True)


def box(u: ScalarField, x0: float, t0: float, R: float) -> NodeSet:
    """Plain box ``B_R(x0)`` over ``max(1, round(R^2/dt))`` slices on each side of ``t0``."""
    grid = u.grid
    _check_ball(grid, x0, R)
    j0 = grid.slice_index(t0)
    n = max(1, int(math.floor(R * R / grid.dt + 0.5)))
    if j0 - n < 0 or j0 + n > grid.nt - 1:
        raise CylinderExceedsDomain(f"box of radius {R:g} leaves [0, {grid.t_hi:g}]")
    mask = np.zeros(grid.shape, dtype=bool)
    mask[j0 - n:j0 + n + 1] = ball_row(grid, x0, R)
    return NodeSet(grid, mask, spacetime=True)


def fit_trace(radii: Sequence[float], osc: Sequence[float], tol: float = 0.0,
              scale: float | None = None) -> OscillationTrace:
    """Least-squares slope of ``log osc`` against ``log r``.

    Any oscillation at or below ``ZERO_OSC * scale`` (default: the largest
    oscillation) gives the ``alpha = inf`` sentinel for a locally constant field.
    """
    r = np.asarray(radii, dtype=float)
    o = np.asarray(osc, dtype=float)
    order = np.argsort(-r)
    r, o = r[order], o[order]
    mono = bool(np.all(np.diff(o) <= tol))
    flags = [] if mono else ["non_monotone"]
    top = float(o.max()) if o.size else 0.0
    scale = top if scale is None else max(scale, top)
    if top == 0 or np.any(o <= ZERO_OSC * scale):
        return OscillationTrace(r, o, math.inf, 0.0, monotone=mono, flags=flags + ["zero_oscillation"])
    if r.size < 2:
        raise ValueError("need at least two radii")
    coef, res, *_ = np.polyfit(np.log(r), np.log(o), 1, full=True)
    resid = float(math.sqrt(res[0] / r.size)) if res.size else 0.0
    return OscillationTrace(r, o, float(coef[0]), resid, monotone=mono, flags=flags)


def holder_fit(u: ScalarField, weight: WeightField, x0: float, t0: float, radii: Sequence[float],
               j: int | None = None) -> OscillationTrace:
    """Fitted exponent of oscillation decay over intrinsic cylinders.

    At an interface node both sides are fitted and the smaller exponent is
    returned.  ``weight`` should be non-negative (pass ``|rho|`` when it
    changes sign).
    """
    grid = u.grid
    if j is None:
        lab = weight.partition.label_at(x0, t0)
        sides = (REGION_1, REGION_2) if lab == INTERFACE else (lab,)
    else:
        sides = (j,)
    tol = grid.dx + grid.dt
    best: OscillationTrace | None = None
    for side in sides:
        sets = [intrinsic_cylinder(u, weight, x0, t0, R, side) for R in radii]
        osc = [oscillation(u, s) for s in sets]
        scale = max(float(np.abs(u.over(s)).max()) for s in sets)
        tr = fit_trace(radii, osc, tol, scale)
        tr.side = side
        if best is None or tr.alpha < best.alpha:
            best = tr
    return best


@dataclass
class InterfaceExampleReport:
    jump: float
    discontinuity: OscillationTrace
    discontinuity_ok: bool
    interface: dict[tuple[float, float], OscillationTrace]
    interface_ok: bool
    interior: dict[tuple[float, float], OscillationTrace]
    interior_ok: bool

    @property
    def passed(self) -> bool:
        return self.discontinuity_ok and self.interface_ok and self.interior_ok

    def rows(self) -> list[dict]:
        out = [{"kind": "discontinuity", "x0": 0.5, "t0": 1.0, "alpha": self.discontinuity.alpha,
                "min_osc": float(self.discontinuity.osc.min()), "jump": self.jump,
                "ok": self.discontinuity_ok}]
        for kind, group in (("interface", self.interface), ("interior", self.interior)):
            for (x, t), tr in group.items():
                out.append({"kind": kind, "x0": x, "t0": t, "alpha": tr.alpha,
                            "min_osc": float(tr.osc.min()), "jump": math.nan,
                            "ok": tr.alpha > ALPHA_MIN})
        return out


def interface_example_check(u: ScalarField | None, weight: WeightField | None,
                            radii: Sequence[float] = (0.2, 0.126, 0.08, 0.05, 0.032, 0.02),
                            point: tuple[float, float] = (0.5, 1.0),
                            interface_probes: Sequence[tuple[float, float]] = ((0.0, 0.5), (0.0, 1.5)),
                            interior_probes: Sequence[tuple[float, float]] = ((-0.5, 0.5), (-0.5, 1.5))
                            ) -> InterfaceExampleReport:
    """Discontinuity inside the elliptic region and continuity at the interface.

    ``u`` is the degenerate-limit solution of the switching-boundary example
    (weight 1 left of ``x = 0``, 0 right of it, data jumping from 1 to 2 at
    ``t = 1``).
    """
    if u is None or weight is None:
        raise ScenarioMissing("the interface example needs its solved field and weight")
    grid = u.grid
    xp, tp = point
    i = grid.node_index(xp)
    j = grid.slice_index(tp)
    jump = abs(float(u.values[j + 1, i] - u.values[j, i]))
    osc = [oscillation(u, box(u, xp, tp, R)) for R in radii]
    disc = fit_trace(radii, osc, grid.dx + grid.dt, float(np.abs(u.values).max()))
    disc_ok = bool(min(osc) >= 0.9 * jump and jump > 0)
    inter = {p: holder_fit(u, weight, p[0], p[1], radii) for p in interface_probes}
    inner = {p: holder_fit(u, weight, p[0], p[1], radii, REGION_1) for p in interior_probes}
    return InterfaceExampleReport(jump, disc, disc_ok,
                                  inter, all(tr.alpha > ALPHA_MIN for tr in inter.values()),
                                  inner, all(tr.alpha > ALPHA_MIN for tr in inner.values()))
