"""Empirical Harnack quantities: probes, regime inequalities, expansion of positivity."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import (BallExceedsDomain, CylinderExceedsDomain, DomainError, EmptyTargetSet,
                     NegativeSolution, PreconditionUnmet, ProbeInadmissible, SliceExcluded)
from .geometry import (INTERFACE, REGION_1, REGION_2, SNAP, Grid, NodeSet, _check_ball, ball_row,
                       cylinder, enlarge, paraboloid)
from .solver import ScalarField
from .weights import WaitingTimes, WeightField, only_future, waiting_times

Regime = Literal["homogeneous", "elliptic_parabolic", "forward_backward"]
REGIMES = ("homogeneous", "elliptic_parabolic", "forward_backward")
_TAGS = {"plus": REGION_1, "zero": REGION_2, "minus": REGION_2}


def region_index(j: int | str) -> int:
    if isinstance(j, str):
        try:
            return _TAGS[j]
        except KeyError:
            raise ValueError(f"unknown region tag {j!r}") from None
    if j not in (REGION_1, REGION_2):
        raise ValueError(f"region index must be 1 or 2, got {j}")
    return int(j)


def timing_field(weight: WeightField, regime: str) -> WeightField:
    """Weight used for waiting times: ``|rho|`` when the sign changes."""
    return weight.magnitude() if regime == "forward_backward" else weight


def ratio(num: float, den: float) -> float:
    """``num/den`` with ``inf`` for a zero denominator (``0`` when both vanish)."""
    if den > 0:
        return num / den
    return 0.0 if num == 0 else math.inf


@dataclass(frozen=True)
class HarnackProbe:
    x0: float
    t0: float
    r: float
    j: int | str = REGION_1
    regime: Regime = "homogeneous"
    strict: bool = True

    def __post_init__(self) -> None:
        if not self.r > 0:
            raise ValueError("probe radius must be positive")
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        region_index(self.j)

    @property
    def region(self) -> int:
        return region_index(self.j)


def check_admissible(probe: HarnackProbe, weight: WeightField, R_bar: float,
                     delta: float | None = None) -> WaitingTimes:
    """Validate the probe geometry; returns the waiting times at radius ``r``.

    ``5r <= R_bar`` and the probe's own sets are always checked.  The wide
    cylinder of radius ``5r`` (and the ``delta`` bound, when given) only for
    strict probes.
    """
    grid = weight.grid
    f = timing_field(weight, probe.regime)
    x0, t0, r = probe.x0, probe.t0, probe.r
    if 5 * r > R_bar * (1 + 1e-12):
        raise ProbeInadmissible("5r <= R_bar", f"5r = {5 * r:g} > R_bar = {R_bar:g}")
    if t0 < 0 or t0 > grid.t_hi:
        raise ProbeInadmissible("t0 inside (0, T)", f"t0 = {t0:g}")
    try:
        _check_ball(grid, x0, r)
    except BallExceedsDomain as exc:
        raise ProbeInadmissible("B_r(x0) inside Omega", str(exc)) from None
    if probe.strict:
        hyp = "B_5r(x0) x (t0 - (5r)^2 h_*, t0 + (5r)^2 h^*) inside Omega x (0,T)"
        try:
            wide = waiting_times(f, x0, t0, 5 * r)
        except DomainError as exc:
            raise ProbeInadmissible(hyp, str(exc)) from None
        if t0 - 25 * r * r * wide.h_sub < -SNAP * grid.dt or t0 + 25 * r * r * wide.h_sup > grid.t_hi + SNAP * grid.dt:
            raise ProbeInadmissible(hyp, "time extent leaves (0, T)")
        if delta is not None and 16 * r * r * wide.h_star_sup[probe.region] >= delta:
            raise ProbeInadmissible("(4r)^2 h^*(5r) < delta", f"delta = {delta:g}")
    try:
        h = waiting_times(f, x0, t0, r)
    except DomainError as exc:
        raise ProbeInadmissible("waiting-time windows of radius r inside (0, T)", str(exc)) from None
    hs = h.h_star_sup[probe.region]
    if t0 + 2 * r * r * hs > grid.t_hi + SNAP * grid.dt:
        raise ProbeInadmissible("B_r(x0) x (t0, t0 + 2 r^2 h^*) inside Omega x (0,T)",
                                f"t0 + 2 r^2 h^* = {t0 + 2 * r * r * hs:g}")
    return h


# ----------------------------------------------------------------- target slices

def target_rows(grid: Grid, t: float) -> tuple[list[int], float]:
    """Slices bracketing time ``t`` and the distance from ``t`` to the nearest one."""
    if t < -SNAP * grid.dt or t > grid.t_hi + SNAP * grid.dt:
        raise CylinderExceedsDomain(f"target time {t:g} outside [0, {grid.t_hi:g}]")
    s = t / grid.dt
    lo, hi = int(math.floor(s + SNAP)), int(math.ceil(s - SNAP))
    lo, hi = max(lo, 0), min(hi, grid.nt - 1)
    rows = [lo] if lo >= hi else [lo, hi]
    err = min(abs(t - k * grid.dt) for k in rows)
    return rows, err


def _row_values(u: ScalarField, weight: WeightField, x0: float, r: float, k: int,
                j: int | None) -> np.ndarray:
    _check_ball(u.grid, x0, r)
    mask = ball_row(u.grid, x0, r)
    if j is not None:
        mask = mask & (weight.partition.label[k] == j)
    return u.values[k][mask]


def _check_sign(vals: np.ndarray, scale: float) -> None:
    if vals.size and vals.min() < -1e-12 * max(scale, 1.0):
        raise NegativeSolution(f"solution reaches {vals.min():g} on a probed set")


def _extreme(u: ScalarField, weight: WeightField, x0: float, r: float, t: float,
             j: int | None, kind: str) -> tuple[float, float]:
    """sup or inf of ``u`` over ``B_r^j(x0; t)``, worst case over bracketing slices."""
    rows, err = target_rows(u.grid, t)
    vals = []
    scale = float(np.abs(u.values).max())
    for k in rows:
        v = _row_values(u, weight, x0, r, k, j)
        if v.size == 0:
            raise EmptyTargetSet(f"B_r^{j}({x0:g}; {k * u.grid.dt:g}) has no nodes")
        _check_sign(v, scale)
        vals.append(v.max() if kind == "sup" else v.min())
    return (float(max(vals)) if kind == "sup" else float(min(vals))), err


# ----------------------------------------------------------------- single probe

@dataclass
class HarnackReport:
    probe: HarnackProbe
    h_times: WaitingTimes
    center_value: float
    sup_past: float
    inf_future: float
    inf_paraboloid: float
    t_past: float
    t_future: float
    ratio_c: float
    ratio_hat: float
    ratio_paraboloid: float
    slice_rounding_error: float
    flags: list[str] = field(default_factory=list)

    def row(self) -> dict:
        p, h, j = self.probe, self.h_times, self.probe.region
        return {"x0": p.x0, "t0": p.t0, "r": p.r, "j": j, "regime": p.regime,
                "h_sub": h.h_star_sub[j], "h_sup": h.h_star_sup[j],
                "sup_past": self.sup_past, "center": self.center_value, "inf_future": self.inf_future,
                "inf_paraboloid": self.inf_paraboloid, "ratio_c": self.ratio_c,
                "ratio_hat": self.ratio_hat, "ratio_paraboloid": self.ratio_paraboloid,
                "slice_rounding_error": self.slice_rounding_error, "flags": ";".join(self.flags)}


def harnack_probe(u: ScalarField, weight: WeightField, probe: HarnackProbe,
                  R_bar: float = math.inf) -> HarnackReport:
    """Sup over the past slice, the centre value and the inf over the future target.

    The past slice sits at ``t0 - r^2 h_*^j`` (full ball), the future one at
    ``t0 + r^2 h^*_j`` (ball restricted to region ``j``).  A target between two
    slices is evaluated on both, keeping the worse value.
    """
    h = check_admissible(probe, weight, R_bar)
    grid = u.grid
    j = probe.region
    x0, t0, r = probe.x0, probe.t0, probe.r
    tp = t0 - r * r * h.h_star_sub[j]
    tf = t0 + r * r * h.h_star_sup[j]
    sup_past, e1 = _extreme(u, weight, x0, r, tp, None, "sup")
    inf_future, e2 = _extreme(u, weight, x0, r, tf, j, "inf")
    center = float(u.values[grid.slice_index(t0), grid.node_index(x0)])
    _check_sign(np.array([center]), float(np.abs(u.values).max()))
    flags = []
    par = paraboloid(grid, weight.partition, x0, t0, r, h.h_star_sup[j], j, "future")
    if par.is_empty:
        inf_par = math.nan
        flags.append("empty_paraboloid")
    else:
        inf_par = float(u.over(par).min())
    return HarnackReport(probe, h, center, sup_past, inf_future, inf_par, tp, tf,
                         ratio(center, inf_future), ratio(sup_past, inf_future),
                         ratio(center, inf_par) if not math.isnan(inf_par) else math.nan,
                         max(e1, e2), flags)


# ----------------------------------------------------------------- regime theorems

@dataclass
class RegimeReport:
    probe: HarnackProbe
    case: str
    lhs: float
    rhs: float
    eta: float
    components: dict[str, float]
    x1: float = math.nan
    t1: float = math.nan
    rho_bar: float = math.nan
    flags: list[str] = field(default_factory=list)

    def row(self) -> dict:
        p = self.probe
        out = {"x0": p.x0, "t0": p.t0, "r": p.r, "regime": p.regime, "case": self.case,
               "lhs": self.lhs, "rhs": self.rhs, "eta": self.eta,
               "x1": self.x1, "t1": self.t1, "rho_bar": self.rho_bar, "flags": ";".join(self.flags)}
        out.update({f"c_{k}": v for k, v in sorted(self.components.items())})
        return out


def _interface_hit(weight: WeightField, x0: float, t0: float, r: float, h: float,
                   direction: str, other: int) -> tuple[float, float, float] | None:
    """First radius at which the paraboloid from ``(x0, t0)`` meets the interface.

    Scans radii ``dx, 2dx, ..., r``; the slice at radius ``rho`` is the one
    nearest ``t0 +- rho^2 h``.  Returns ``(x1, t1, rho_bar)``.
    """
    grid = weight.grid
    part = weight.partition
    sign = 1.0 if direction == "future" else -1.0
    k = 1
    while True:
        rho = min(k * grid.dx, r)
        t = t0 + sign * rho * rho * h
        if t < -SNAP * grid.dt or t > grid.t_hi + SNAP * grid.dt:
            return None
        kk = grid.slice_index(t)
        row = ball_row(grid, x0, rho)
        lab = part.label[kk]
        hit = row & ((lab == INTERFACE) | (lab == other))
        if hit.any():
            s = part.interface_x[kk]
            if np.isfinite(s):
                x1 = float(s)
            else:
                cand = grid.x[hit]
                x1 = float(cand[np.argmin(np.abs(cand - x0))])
            return x1, kk * grid.dt, abs(x1 - x0)
        if rho >= r:
            return None
        k += 1


def _slice_hit(weight: WeightField, x0: float, t0: float, r: float) -> tuple[float, float] | None:
    grid = weight.grid
    kk = grid.slice_index(t0)
    s = weight.partition.interface_x[kk]
    if np.isfinite(s) and abs(s - x0) < r - SNAP * grid.dx:
        return float(s), abs(float(s) - x0)
    return None


def _safe(fn, flags: list[str], name: str) -> float | None:
    try:
        return fn()
    except (EmptyTargetSet, DomainError) as exc:
        flags.append(f"{name}_skipped:{type(exc).__name__}")
        return None


def _eta(pairs: Iterable[tuple[float, float]]) -> float:
    return max((ratio(a, b) for a, b in pairs), default=math.nan)


def _fold(vals: Sequence[float | None], op) -> float:
    kept = [v for v in vals if v is not None]
    return op(kept) if kept else math.nan


def _regime_ep(u: ScalarField, weight: WeightField, probe: HarnackProbe, excluded: set[int],
               c: float) -> RegimeReport:
    grid = u.grid
    x0, t0, r = probe.x0, probe.t0, probe.r
    j0 = grid.slice_index(t0)
    h = waiting_times(weight, x0, t0, r)
    hs, hS = h.h_star_sub[REGION_1], h.h_star_sup[REGION_1]
    lab = weight.partition.label_at(x0, t0)
    u0 = float(u.values[j0, grid.node_index(x0)])
    flags: list[str] = []
    comp: dict[str, float | None] = {"center": u0}
    ext = lambda xc, rr, t, j, kind: _extreme(u, weight, xc, rr, t, j, kind)[0]  # noqa: E731
    if lab == INTERFACE or (lab == REGION_2 and _slice_hit(weight, x0, t0, r) is not None):
        if j0 in excluded:
            raise SliceExcluded(f"t0 = {t0:g} is a listed discontinuity slice")
    if lab == INTERFACE:
        comp["sup_plus_past"] = _safe(lambda: ext(x0, r, t0 - c * r * r * hs, REGION_1, "sup"), flags, "sup_plus_past")
        comp["sup_zero"] = _safe(lambda: ext(x0, r, t0, REGION_2, "sup"), flags, "sup_zero")
        comp["inf_plus_future"] = _safe(lambda: ext(x0, r, t0 + c * r * r * hS, REGION_1, "inf"), flags, "inf_plus_future")
        comp["inf_zero"] = _safe(lambda: ext(x0, r, t0, REGION_2, "inf"), flags, "inf_zero")
        lhs = _fold([comp["sup_plus_past"], comp["sup_zero"]], max)
        rhs = _fold([comp["inf_plus_future"], comp["inf_zero"]], min)
        if comp["sup_zero"] is not None and comp["inf_zero"] is not None:
            comp["zero_slice_ratio"] = ratio(comp["sup_zero"], comp["inf_zero"])
        rep = RegimeReport(probe, "i", lhs, rhs, _eta([(lhs, rhs)]), {}, flags=flags)
    elif lab == REGION_1:
        comp["inf_plus_future"] = ext(x0, r, t0 + r * r * hS, REGION_1, "inf")
        hit = _interface_hit(weight, x0, t0, r, hS, "future", REGION_2)
        if hit is None:
            rhs = comp["inf_plus_future"]
            rep = RegimeReport(probe, "interior", u0, rhs, _eta([(u0, rhs)]), {}, flags=flags)
        else:
            x1, t1, rb = hit
            comp["inf_zero_at_x1"] = _safe(lambda: ext(x1, r - rb, t1, REGION_2, "inf"), flags, "inf_zero_at_x1")
            rhs = _fold([comp["inf_plus_future"], comp["inf_zero_at_x1"]], min)
            rep = RegimeReport(probe, "ii", u0, rhs, _eta([(u0, rhs)]), {}, x1, t1, rb, flags)
    else:
        hit = _slice_hit(weight, x0, t0, r)
        comp["inf_zero"] = ext(x0, r, t0, REGION_2, "inf")
        comp["sup_zero"] = ext(x0, r, t0, REGION_2, "sup")
        comp["zero_slice_ratio"] = ratio(comp["sup_zero"], comp["inf_zero"])
        if hit is None:
            if j0 in excluded:
                raise SliceExcluded(f"t0 = {t0:g} is a listed discontinuity slice")
            rep = RegimeReport(probe, "elliptic", comp["sup_zero"], comp["inf_zero"],
                               comp["zero_slice_ratio"], {}, flags=flags)
        else:
            x1, rb = hit
            rr = r - rb

            def plus_target() -> float:
                h1 = waiting_times(weight, x1, t0, r).h_star_sup[REGION_1]
                return ext(x1, rr, t0 + rr * rr * h1, REGION_1, "inf")

            comp["inf_plus_at_x1"] = _safe(plus_target, flags, "inf_plus_at_x1")
            rhs = _fold([comp["inf_plus_at_x1"], comp["inf_zero"]], min)
            rep = RegimeReport(probe, "iii", u0, rhs, _eta([(u0, rhs)]), {}, x1, t0, rb, flags)
    rep.components = {k: v for k, v in comp.items() if v is not None}
    return rep


def _regime_fb(u: ScalarField, weight: WeightField, probe: HarnackProbe, excluded: set[int]) -> RegimeReport:
    grid = u.grid
    f = weight.magnitude()
    x0, t0, r = probe.x0, probe.t0, probe.r
    j0 = grid.slice_index(t0)
    if j0 in excluded:
        raise SliceExcluded(f"t0 = {t0:g} is a listed discontinuity slice")
    h = waiting_times(f, x0, t0, r)
    lab = weight.partition.label_at(x0, t0)
    u0 = float(u.values[j0, grid.node_index(x0)])
    flags: list[str] = []
    comp: dict[str, float | None] = {"center": u0}
    ext = lambda xc, rr, t, j, kind: _extreme(u, f, xc, rr, t, j, kind)[0]  # noqa: E731
    P, M = REGION_1, REGION_2
    if lab == INTERFACE:
        comp["sup_plus_past"] = _safe(lambda: ext(x0, r, t0 - r * r * h.h_star_sub[P], P, "sup"), flags, "sup_plus_past")
        comp["sup_minus_future"] = _safe(lambda: ext(x0, r, t0 + r * r * h.h_star_sup[M], M, "sup"), flags, "sup_minus_future")
        comp["inf_plus_future"] = _safe(lambda: ext(x0, r, t0 + r * r * h.h_star_sup[P], P, "inf"), flags, "inf_plus_future")
        comp["inf_minus_past"] = _safe(lambda: ext(x0, r, t0 - r * r * h.h_star_sub[M], M, "inf"), flags, "inf_minus_past")
        sup_side = _fold([comp["sup_plus_past"], comp["sup_minus_future"]], max)
        inf_side = _fold([comp["inf_plus_future"], comp["inf_minus_past"]], min)
        comp["eta_upper"] = ratio(sup_side, u0)
        comp["eta_lower"] = ratio(u0, inf_side)
        eta = max(comp["eta_upper"], comp["eta_lower"])
        rep = RegimeReport(probe, "i", sup_side, inf_side, eta, {}, flags=flags)
    else:
        own, other = (P, M) if lab == P else (M, P)
        direction = "future" if lab == P else "past"
        hh = h.h_star_sup[own] if lab == P else h.h_star_sub[own]
        tt = t0 + r * r * hh if lab == P else t0 - r * r * hh
        comp["inf_own_target"] = ext(x0, r, tt, own, "inf")
        hit = _interface_hit(f, x0, t0, r, hh, direction, other)
        if hit is None:
            rhs = comp["inf_own_target"]
            rep = RegimeReport(probe, "interior", u0, rhs, _eta([(u0, rhs)]), {}, flags=flags)
        else:
            x1, t1, rb = hit
            rr = r - rb

            def other_target() -> float:
                h1 = waiting_times(f, x1, t1, r)
                if other == M:
                    return ext(x1, rr, t1 - rr * rr * h1.h_star_sub[M], M, "inf")
                return ext(x1, rr, t1 + rr * rr * h1.h_star_sup[P], P, "inf")

            comp["inf_other_at_x1"] = _safe(other_target, flags, "inf_other_at_x1")
            rhs = _fold([comp["inf_own_target"], comp["inf_other_at_x1"]], min)
            rep = RegimeReport(probe, "ii" if lab == P else "iii", u0, rhs, _eta([(u0, rhs)]), {},
                               x1, t1, rb, flags)
    rep.components = {k: v for k, v in comp.items() if v is not None}
    return rep


def regime_harnack(u: ScalarField, weight: WeightField, probes: Sequence[HarnackProbe],
                   regime: Regime, R_bar: float = math.inf,
                   discontinuity_slices: Iterable[int] = (), c: float = 1.0) -> list[RegimeReport]:
    """Evaluate the regime's Harnack inequalities at every probe.

    Probes on listed discontinuity slices are reported with the
    ``slice_excluded`` flag and no values.
    """
    _check_regime(weight, regime)
    excluded = set(int(k) for k in discontinuity_slices)
    out = []
    for p in probes:
        if p.regime != regime:
            raise ValueError(f"probe regime {p.regime!r} differs from {regime!r}")
        check_admissible(p, weight, R_bar)
        try:
            if regime == "homogeneous":
                hr = harnack_probe(u, weight, p, R_bar)
                rep = RegimeReport(p, "interior", hr.center_value, hr.inf_future, hr.ratio_c,
                                   {"center": hr.center_value, "sup_past": hr.sup_past,
                                    "inf_future": hr.inf_future, "ratio_c": hr.ratio_c,
                                    "ratio_hat": hr.ratio_hat}, flags=list(hr.flags))
            elif regime == "elliptic_parabolic":
                rep = _regime_ep(u, weight, p, excluded, c)
            else:
                rep = _regime_fb(u, weight, p, excluded)
        except SliceExcluded:
            rep = RegimeReport(p, "excluded", math.nan, math.nan, math.nan, {}, flags=["slice_excluded"])
        out.append(rep)
    return out


def _check_regime(weight: WeightField, regime: str) -> None:
    v, lab = weight.values, weight.partition.label
    if regime == "homogeneous":
        ok = np.all(v > 0)
    elif regime == "elliptic_parabolic":
        ok = np.all(v[lab == REGION_1] > 0) and np.all(v[lab == REGION_2] == 0)
    else:
        ok = np.all(v[lab == REGION_1] > 0) and np.all(v[lab == REGION_2] < 0)
    if regime != "homogeneous" and not np.any(lab == REGION_2):
        ok = False
    if not ok:
        raise ValueError(f"weight sign pattern does not match regime {regime!r}")


# ----------------------------------------------------------------- expansion of positivity

@dataclass
class ExpansionReport:
    lambda_measured: float
    theta_measured: float
    per_theta: list[tuple[float, float]]
    h_future: float
    fractions: list[tuple[float, float]]
    flags: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter((self.lambda_measured, self.theta_measured))


def _closed_rows(grid: Grid, a: float, b: float) -> range:
    lo = int(math.ceil(a / grid.dt - SNAP))
    hi = int(math.floor(b / grid.dt + SNAP))
    if hi < lo:
        lo = hi = grid.slice_index(0.5 * (a + b))
    if lo < 0 or hi > grid.nt - 1:
        raise CylinderExceedsDomain(f"window [{a:g}, {b:g}] leaves [0, {grid.t_hi:g}]")
    return range(lo, hi + 1)


def expansion_check(u: ScalarField, weight: WeightField, x0: float, t0: float, r: float,
                    h_level: float, theta_grid: Sequence[float], j: int | str | None = None,
                    eta: float = 0.5, regime: Regime = "homogeneous") -> ExpansionReport:
    """Measured positivity factor on the later window ``[t0 + theta/8 (4r)^2 h, t0 + theta (4r)^2 h]``.

    For each ``theta`` the factor is ``min u / h_level`` over ``B_2r`` restricted
    to region ``j``; ``lambda_measured`` is the smallest over the grid and
    ``theta_measured`` the largest ``theta`` with a positive factor.  The
    sublevel fractions ``rho_j({u < eta h} cap B_4r) / rho_j(B_4r)`` are listed per
    slice of the longest window when ``B_4r`` fits the domain.
    """
    grid = u.grid
    if not h_level > 0:
        raise ValueError("h_level must be positive")
    f = timing_field(weight, regime)
    j0 = grid.slice_index(t0)
    jj = region_index(j) if j is not None else next(
        iter(weight.partition.regions_at(x0, t0)))
    _check_ball(grid, x0, r)
    start = ball_row(grid, x0, r) & (weight.partition.label[j0] == jj)
    if not start.any():
        raise PreconditionUnmet("B_r^j(x0; t0) has no nodes")
    if u.values[j0][start].min() < h_level * (1 - 1e-12):
        raise PreconditionUnmet(
            f"u(., t0) drops to {u.values[j0][start].min():g} < h = {h_level:g} on B_r^j(x0; t0)")
    hfut = only_future(f, x0, t0, 5 * r)[jj]
    if hfut <= 0:
        raise PreconditionUnmet("region j absent from the forward window of radius 5r")
    _check_ball(grid, x0, 2 * r)
    row2 = ball_row(grid, x0, 2 * r)
    per = []
    for th in theta_grid:
        if not th > 0:
            raise ValueError("theta values must be positive")
        rows = _closed_rows(grid, t0 + th / 8 * 16 * r * r * hfut, t0 + th * 16 * r * r * hfut)
        sel = row2[None, :] & (weight.partition.label[rows.start:rows.stop] == jj)
        vals = u.values[rows.start:rows.stop][sel]
        lam = max(0.0, float(vals.min()) / h_level) if vals.size else math.nan
        per.append((float(th), lam))
    lams = [lam for _, lam in per if not math.isnan(lam)]
    lam_m = min(lams) if lams else math.nan
    pos = [th for th, lam in per if lam > 0]
    flags = []
    if lams and lam_m == 0:
        flags.append("no_expansion")
    fracs: list[tuple[float, float]] = []
    try:
        _check_ball(grid, x0, 4 * r)
        row4 = ball_row(grid, x0, 4 * r)
        rows = _closed_rows(grid, t0, t0 + max(theta_grid) * 16 * r * r * hfut)
        for k in rows:
            inreg = row4 & (weight.partition.label[k] == jj)
            w = np.abs(f.values[k])
            den = float(w[inreg].sum())
            low = inreg & (u.values[k] < eta * h_level)
            fracs.append((k * grid.dt, float(w[low].sum()) / den if den > 0 else math.nan))
    except DomainError:
        flags.append("B_4r_outside_domain")
    return ExpansionReport(lam_m, max(pos) if pos else math.nan, per, hfut, fracs, flags)


# ----------------------------------------------------------------- sublevel shrinking

@dataclass(frozen=True)
class ShrinkProbe:
    x0: float
    t0: float
    j: int | str
    s: float
    s_tilde: float
    theta: float
    theta_tilde: float
    R: float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.s < self.s_tilde:
            raise ValueError("need 0 < s < s_tilde")
        if not 0 < self.theta <= self.theta_tilde:
            raise ValueError("need 0 < theta <= theta_tilde")


@dataclass
class ShrinkReport:
    mu: float
    omega: float
    sigma: float
    a: float
    level: float
    frac_lebesgue: float
    frac_rho: float
    conclusion: bool
    precondition_ok: bool
    sup_inner: float
    nu_flip: float
    nu_flip_normalised: float

    def to_dict(self) -> dict:
        return asdict(self)


def shrink_sets(u: ScalarField, weight: WeightField, probe: ShrinkProbe,
                regime: Regime = "homogeneous") -> tuple[NodeSet, NodeSet]:
    """Inner cylinder ``Q_{s,theta}^j`` and the enlarged outer cylinder."""
    grid = u.grid
    f = timing_field(weight, regime)
    j = region_index(probe.j)
    R = probe.R if probe.R is not None else probe.s_tilde
    h = waiting_times(f, probe.x0, probe.t0, R).h_star_sub[j]
    part = weight.partition
    inner = cylinder(grid, part, probe.x0, probe.t0, probe.s, probe.theta, h, "past", j)
    base = cylinder(grid, part, probe.x0, probe.t0, probe.s_tilde, probe.theta_tilde, h, "past", j)
    sig2 = (probe.theta_tilde * probe.s_tilde ** 2 - probe.theta * probe.s ** 2) * h
    outer = enlarge(base, probe.s_tilde - probe.s, sig2, part, j, probe.x0, probe.s_tilde, "past")
    return inner, outer


def sublevel_shrink_check(u: ScalarField, weight: WeightField, probe: ShrinkProbe,
                          mu: float | None, omega: float | None, sigma: float, a: float,
                          regime: Regime = "homogeneous") -> ShrinkReport:
    """Measure fractions of ``{u > mu - sigma omega}`` on the enlarged cylinder.

    ``mu`` and ``omega`` default to the sup and the oscillation there; given
    values are checked against them.  When the conclusion fails, any valid
    ``nu`` must lie below the observed fraction sum (``nu_flip``).
    """
    if not (0 < sigma < 1 and 0 < a < 1):
        raise ValueError("sigma and a must lie in (0, 1)")
    inner, outer = shrink_sets(u, weight, probe, regime)
    vals = u.over(outer)
    sup_e, osc_e = float(vals.max()), float(vals.max() - vals.min())
    tol = 1e-12 * max(1.0, abs(sup_e))
    mu = sup_e if mu is None else float(mu)
    omega = osc_e if omega is None else float(omega)
    pre = mu >= sup_e - tol and omega >= osc_e - tol
    level = mu - sigma * omega
    above = u.values > level
    S = outer.mask & above
    w = np.abs(weight.values)
    frac_l = float(S.sum()) / float(outer.count)
    den = float(w[outer.mask].sum())
    frac_r = float(w[S].sum()) / den if den > 0 else math.nan
    sup_in = float(u.over(inner).max())
    concl = sup_in <= mu - a * sigma * omega + tol
    total = frac_l + frac_r
    return ShrinkReport(mu, omega, sigma, a, level, frac_l, frac_r, bool(concl), bool(pre), sup_in,
                        math.inf if concl else total, math.inf if concl else 0.5 * total)
