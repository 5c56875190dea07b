"""Weighted measures, weight-class fits and the structural hypothesis checks.

All integrals use the midpoint rule on grid cells; spatial derivatives use
central differences inside the domain and one-sided ones at its ends.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator, Literal, Sequence

import numpy as np

from .errors import BallExceedsDomain, CylinderExceedsDomain, DegenerateMeasure, SupportViolation
from .geometry import (
    INTERFACE,
    REGION_1,
    REGION_2,
    SNAP,
    Grid,
    NodeSet,
    RegionPartition,
    _check_ball,
    ball_row,
)

Restriction = Literal["rho", "rho_j", "chi_j", "lebesgue"]
REL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class WeightField:
    partition: RegionPartition
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.partition.grid.shape:
            raise ValueError("weight values do not match the grid shape")
        if not np.all(np.isfinite(vals)):
            raise ValueError("weight values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def grid(self) -> Grid:
        return self.partition.grid

    @classmethod
    def from_function(cls, partition: RegionPartition,
                      f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "WeightField":
        g = partition.grid
        X, T = np.meshgrid(g.x, g.t)
        return cls(partition, np.broadcast_to(f(X, T), g.shape))

    @classmethod
    def constant(cls, partition: RegionPartition, value: float) -> "WeightField":
        return cls(partition, np.full(partition.grid.shape, float(value)))

    @classmethod
    def piecewise(cls, partition: RegionPartition, value1: float, value2: float) -> "WeightField":
        """``value1`` on region 1, ``value2`` on region 2, their mean on interface nodes."""
        lab = partition.label
        vals = np.where(lab == REGION_1, value1,
                        np.where(lab == REGION_2, value2, 0.5 * (value1 + value2)))
        return cls(partition, vals)

    def region_values(self, j: int) -> np.ndarray:
        """``rho_j``: the weight masked to region ``j``."""
        return np.where(self.partition.label == j, self.values, 0.0)

    def chi(self, j: int) -> np.ndarray:
        return (self.partition.label == j).astype(float)

    def magnitude(self) -> "WeightField":
        return WeightField(self.partition, np.abs(self.values))

    def with_values(self, values: np.ndarray) -> "WeightField":
        return WeightField(self.partition, values)


def measure(field_: WeightField, set_: NodeSet, restriction: Restriction = "rho",
            j: int | None = None) -> float:
    """Midpoint-rule measure of ``set_`` under the chosen weight."""
    if set_.is_empty:
        return 0.0
    cell = set_.grid.dx * set_.grid.dt if set_.spacetime else set_.grid.dx
    if restriction == "lebesgue":
        return set_.measure
    if restriction in ("rho_j", "chi_j") and j is None:
        raise ValueError(f"restriction {restriction!r} needs a region index")
    if restriction == "rho":
        vals = field_.values
    elif restriction == "rho_j":
        vals = field_.region_values(j)
    elif restriction == "chi_j":
        vals = field_.chi(j)
    else:
        raise ValueError(f"unknown restriction {restriction!r}")
    return float(vals[set_.mask].sum()) * cell


# ----------------------------------------------------------------- waiting times

@dataclass(frozen=True)
class WaitingTimes:
    """Region means of the weight over the backward (``sub``) and forward (``sup``) windows."""

    h_star_sub: dict[int, float]
    h_star_sup: dict[int, float]
    x0: float
    t_index: int
    r: float
    n_slices: int

    @property
    def h_sub(self) -> float:
        return max(self.h_star_sub.values())

    @property
    def h_sup(self) -> float:
        return max(self.h_star_sup.values())


def window_slices(grid: Grid, r: float) -> int:
    """Number of slices in a window of duration ``r^2`` (at least one)."""
    return max(1, int(math.floor(r * r / grid.dt + 0.5)))


def _window_mean(field_: WeightField, x0: float, r: float, lo: int, hi: int, j: int) -> float:
    """Mean of the weight over ``B_r(x0)`` x slices ``[lo, hi)`` restricted to region ``j``."""
    row = ball_row(field_.grid, x0, r)
    vals = field_.values[lo:hi][:, row]
    sel = field_.partition.label[lo:hi][:, row] == j
    cnt = int(sel.sum())
    if cnt == 0:
        return 0.0
    return float(vals[sel].sum()) / cnt


def _waiting_at(field_: WeightField, x0: float, j0: int, r: float) -> WaitingTimes:
    grid = field_.grid
    _check_ball(grid, x0, r)
    n = window_slices(grid, r)
    if j0 - n < 0 or j0 + n > grid.nt - 1:
        raise CylinderExceedsDomain(
            f"window of half-length {r * r:g} around t={j0 * grid.dt:g} leaves [0, {grid.t_hi:g}]")
    sub = {j: _window_mean(field_, x0, r, j0 - n, j0, j) for j in (REGION_1, REGION_2)}
    sup = {j: _window_mean(field_, x0, r, j0, j0 + n, j) for j in (REGION_1, REGION_2)}
    return WaitingTimes(sub, sup, x0, j0, r, n)


def waiting_times(field_: WeightField, x0: float, t0: float, r: float) -> WaitingTimes:
    """Waiting times at ``(x0, t0)`` and radius ``r``.

    The backward window holds the slices of ``[t0 - r^2, t0)`` and the forward
    one those of ``[t0, t0 + r^2)``; each slice stands for the time cell that
    starts at it, so shifting ``t0`` by ``r^2`` maps one window onto the other.
    A region that misses the window gets the value 0.
    """
    return _waiting_at(field_, x0, field_.grid.slice_index(t0), r)


def only_future(field_: WeightField, x0: float, t0: float, r: float) -> dict[int, float]:
    """Forward waiting times alone (no backward window needed)."""
    grid = field_.grid
    _check_ball(grid, x0, r)
    j0 = grid.slice_index(t0)
    n = window_slices(grid, r)
    if j0 + n > grid.nt - 1:
        raise CylinderExceedsDomain(f"forward window from t={t0:g} leaves [0, {grid.t_hi:g}]")
    return {j: _window_mean(field_, x0, r, j0, j0 + n, j) for j in (REGION_1, REGION_2)}


@dataclass(frozen=True)
class IdentityReport:
    shift_lhs: dict[int, float]
    shift_rhs: dict[int, float]
    shift_residual: dict[int, float]
    scaling_lhs: dict[int, float]
    scaling_rhs: dict[int, float]
    scaling_holds: dict[int, bool]
    r: float
    r_tilde: float
    kappa: float

    @property
    def ok(self) -> bool:
        return all(v == 0.0 for v in self.shift_residual.values()) and all(self.scaling_holds.values())


def waiting_time_identities(field_: WeightField, x0: float, t0: float, r: float,
                            kappa: float = 0.25, r_tilde: float | None = None) -> IdentityReport:
    """Shift identity and scaling bound for the waiting times.

    The forward time at ``t0 - r^2`` must reproduce the backward time at
    ``t0``; the backward time at radius ``r`` is bounded by
    ``(1/2kappa) (r_tilde/r)^3`` times the one at ``r_tilde``.
    """
    grid = field_.grid
    r_tilde = 2.0 * r if r_tilde is None else r_tilde
    if not r_tilde > r:
        raise ValueError("r_tilde must exceed r")
    j0 = grid.slice_index(t0)
    here = _waiting_at(field_, x0, j0, r)
    shifted = _waiting_at(field_, x0, j0 - here.n_slices, r)
    wide = _waiting_at(field_, x0, j0, r_tilde)
    factor = (1.0 / (2.0 * kappa)) * (r_tilde / r) ** 3
    lhs = {j: shifted.h_star_sup[j] for j in (1, 2)}
    rhs = {j: here.h_star_sub[j] for j in (1, 2)}
    s_lhs = {j: here.h_star_sub[j] for j in (1, 2)}
    s_rhs = {j: factor * wide.h_star_sub[j] for j in (1, 2)}
    return IdentityReport(
        shift_lhs=lhs, shift_rhs=rhs,
        shift_residual={j: lhs[j] - rhs[j] for j in (1, 2)},
        scaling_lhs=s_lhs, scaling_rhs=s_rhs,
        scaling_holds={j: s_lhs[j] <= s_rhs[j] * (1 + REL_TOL) for j in (1, 2)},
        r=r, r_tilde=r_tilde, kappa=kappa)


# ----------------------------------------------------------------- doubling / A_inf / B_2q

def _ball_sum(values_row: np.ndarray, grid: Grid, x0: float, r: float) -> tuple[float, int]:
    _check_ball(grid, x0, r)
    row = ball_row(grid, x0, r)
    return float(values_row[row].sum()), int(row.sum())


def doubling_constant(field_: WeightField, t_index: int, centers: Sequence[float],
                      radii: Sequence[float]) -> float:
    """Largest ``w(B_2r)/w(B_r)`` over the given centres and radii at one slice."""
    row = field_.values[t_index]
    worst = 0.0
    for c in centers:
        for r in radii:
            big, _ = _ball_sum(row, field_.grid, c, 2 * r)
            small, _ = _ball_sum(row, field_.grid, c, r)
            if small <= 0:
                raise DegenerateMeasure(f"zero weight on B_{r:g}({c:g}) at slice {t_index}")
            worst = max(worst, big / small)
    return worst


@dataclass(frozen=True)
class SamplePair:
    """A ball and a sub-interval of it, both as spatial node masks."""

    ball: np.ndarray
    sub: np.ndarray
    family: tuple[float, float, str]
    fraction: float


def ainfty_plan(grid: Grid, centers: Sequence[float], radii: Sequence[float],
                fractions: Sequence[float] = (0.5, 0.25, 0.125, 0.0625),
                positions: Sequence[str] = ("center", "left", "right")) -> list[SamplePair]:
    """Dyadic sample plan of (ball, subset) pairs; balls leaving the domain are skipped."""
    plan: list[SamplePair] = []
    for c in centers:
        for r in radii:
            try:
                _check_ball(grid, c, r)
            except BallExceedsDomain:
                continue
            row = ball_row(grid, c, r)
            idx = np.flatnonzero(row)
            n = idx.size
            for pos in positions:
                for f in fractions:
                    m = max(1, int(round(f * n)))
                    if pos == "left":
                        take = idx[:m]
                    elif pos == "right":
                        take = idx[n - m:]
                    else:
                        start = (n - m) // 2
                        take = idx[start:start + m]
                    sub = np.zeros(grid.nx, dtype=bool)
                    sub[take] = True
                    plan.append(SamplePair(row, sub, (float(c), float(r), pos), m / n))
    return plan


@dataclass(frozen=True)
class AinftyFit:
    K2: float
    varsigma: float
    b: float
    in_class: bool
    n_pairs: int
    violations: int

    def __iter__(self) -> Iterator[float]:
        return iter((self.K2, self.varsigma, self.b))


def _fit_from_ratios(a: np.ndarray, w: np.ndarray, families: list) -> AinftyFit:
    n = a.size
    if n == 0:
        raise ValueError("empty sample plan")
    if np.any((w <= 0) & (a > 0)):
        return AinftyFit(math.inf, math.nan, math.inf, False, n, int(np.sum((w <= 0) & (a > 0))))
    slopes: list[float] = []
    by_family: dict = {}
    for k, fam in enumerate(families):
        by_family.setdefault(fam, []).append(k)
    for members in by_family.values():
        pts = sorted({(a[k], w[k]) for k in members if a[k] < 1.0})
        if len(pts) < 2:
            continue
        (a0, w0), (a1, w1) = pts[0], pts[1]
        slopes.append(math.log(w0 / w1) / math.log(a0 / a1))
    varsigma = min([1.0] + slopes)
    varsigma = max(varsigma, 1e-6)
    K2 = float(np.max(w / a ** varsigma))
    b = 1.0
    for ak, wk in zip(a, w):
        kw = K2 * wk
        if ak < 1.0 and kw < 1.0:
            b = max(b, math.log(kw) / math.log(ak))
    viol = int(np.sum(w > K2 * a ** varsigma * (1 + REL_TOL)) + np.sum(a ** b > K2 * w * (1 + REL_TOL)))
    return AinftyFit(K2, varsigma, b, True, n, viol)


def _ratios(values_row: np.ndarray, plan: Sequence[SamplePair]) -> tuple[np.ndarray, np.ndarray]:
    a = np.empty(len(plan))
    w = np.empty(len(plan))
    for k, p in enumerate(plan):
        wb = float(values_row[p.ball].sum())
        if wb <= 0:
            raise DegenerateMeasure("zero weight on a sampled ball")
        a[k] = p.sub.sum() / p.ball.sum()
        w[k] = float(values_row[p.sub].sum()) / wb
    return a, w


def fit_Ainfty(field_: WeightField, t_index: int | Sequence[int],
               sample_plan: Sequence[SamplePair]) -> AinftyFit:
    """Fit ``w(S)/w(B) <= K2 (|S|/|B|)^s`` and the reverse bound exponent ``b``.

    ``s`` is the smallest decay exponent seen between the two smallest subset
    fractions of each family (capped at 1); ``K2`` is then the smallest
    constant valid on every sampled pair and ``b >= 1`` the smallest exponent
    with ``(|S|/|B|)^b <= K2 w(S)/w(B)``.  Several slices may be pooled.
    """
    slices = [t_index] if isinstance(t_index, (int, np.integer)) else list(t_index)
    a_all, w_all, fam = [], [], []
    for j in slices:
        a, w = _ratios(field_.values[j], sample_plan)
        a_all.append(a)
        w_all.append(w)
        fam.extend((j,) + p.family for p in sample_plan)
    return _fit_from_ratios(np.concatenate(a_all), np.concatenate(w_all), fam)


def concentric_plan(centers: Sequence[float], radii: Sequence[float]) -> list[tuple[float, float, float]]:
    """All ``(center, r, rho)`` with ``r < rho`` drawn from ``radii``."""
    rs = sorted(set(float(r) for r in radii))
    return [(float(c), r, rho) for c in centers for i, r in enumerate(rs) for rho in rs[i + 1:]]


def fit_B2q(field_: WeightField, t_index: int | Sequence[int], q: float,
            concentric: Sequence[tuple[float, float, float]]) -> float:
    """Largest ``(r/rho) (w(B_r)/w(B_rho))^(1/q) (|B_r|/|B_rho|)^(-1/2)`` over the plan."""
    if not q > 2:
        raise ValueError("q must exceed 2")
    slices = [t_index] if isinstance(t_index, (int, np.integer)) else list(t_index)
    grid = field_.grid
    worst = 0.0
    for j in slices:
        row = field_.values[j]
        for c, r, rho in concentric:
            try:
                w_big, n_big = _ball_sum(row, grid, c, rho)
            except BallExceedsDomain:
                continue
            w_small, n_small = _ball_sum(row, grid, c, r)
            if w_big <= 0 or n_small == 0:
                raise DegenerateMeasure(f"zero measure on a ball centred at {c:g}")
            val = (r / rho) * (w_small / w_big) ** (1.0 / q) * (n_small / n_big) ** -0.5
            worst = max(worst, val)
    return worst


# ----------------------------------------------------------------- hypotheses

@dataclass(frozen=True)
class ProbePlan:
    points: tuple[tuple[float, float], ...]
    radii: tuple[float, ...]
    q: float = 3.0
    fit_slices: tuple[int, ...] | None = None


@dataclass
class WeightClassReport:
    c_rho: float
    K1: float
    q: float
    K2: float
    varsigma: float
    b: float
    kappa: float
    delta: float
    R_bar: float
    L_continuity: float
    L_ratio: float
    kappa_max: float
    delta_max: float
    in_Ainfty: bool
    passed: dict[str, bool]
    probes: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class _Profile:
    """Slice-by-slice measures of one ball for one region."""

    j0: int
    rho: np.ndarray
    rho_j: np.ndarray
    chi_j: np.ndarray
    lebesgue: float


def _profile(field_: WeightField, x0: float, r: float, j: int, j0: int) -> _Profile:
    grid = field_.grid
    _check_ball(grid, x0, r)
    row = ball_row(grid, x0, r)
    vals = field_.values[:, row]
    inside = field_.partition.label[:, row] == j
    dx = grid.dx
    return _Profile(j0, vals.sum(axis=1) * dx, np.where(inside, vals, 0.0).sum(axis=1) * dx,
                    inside.sum(axis=1) * dx, row.sum() * dx)


def _window(grid: Grid, j0: int, delta: float, open_: bool = False) -> slice:
    m = int(math.floor(delta / grid.dt + SNAP))
    if open_ and m > 0 and abs(m * grid.dt - delta) <= SNAP * grid.dt:
        m -= 1
    return slice(max(0, j0 - m), min(grid.nt - 1, j0 + m) + 1)


def _tent(grid: Grid, c: float, half: float) -> np.ndarray:
    return np.clip(1.0 - np.abs(grid.x - c) / half, 0.0, None)


def _h1_norm(grid: Grid, v: np.ndarray) -> float:
    dv = np.gradient(v, grid.dx)
    return math.sqrt(float(np.sum(v * v + dv * dv)) * grid.dx)


def lipschitz_estimate(field_: WeightField, centers: Sequence[float], halves: Sequence[float]) -> float:
    """Bound for ``|d/dt int v w rho|`` relative to ``|v|_H1 |w|_H1`` over tent pairs."""
    grid = field_.grid
    tents = [_tent(grid, c, h) for c in centers for h in halves if h > 0]
    tents += [_tent(grid, c + 0.5 * h, h) for c in centers for h in halves if h > 0]
    norms = [_h1_norm(grid, v) for v in tents]
    best = 0.0
    for a in range(len(tents)):
        for b in range(a, len(tents)):
            if norms[a] == 0 or norms[b] == 0:
                continue
            prod = tents[a] * tents[b]
            if not prod.any():
                continue
            F = field_.values @ prod * grid.dx
            rate = float(np.max(np.abs(np.diff(F)))) / grid.dt
            best = max(best, rate / (norms[a] * norms[b]))
    return best


def _probe_items(field_: WeightField, plan: ProbePlan, R_bar: float):
    grid = field_.grid
    for x0, t0 in plan.points:
        j0 = grid.slice_index(t0)
        for j in field_.partition.regions_at(x0, t0):
            for r in plan.radii:
                if r > R_bar * (1 + SNAP):
                    raise ValueError(f"probe radius {r:g} exceeds R_bar={R_bar:g}")
                yield x0, t0, j, r, _profile(field_, x0, r, j, j0)


def _fit_slices(field_: WeightField, plan: ProbePlan) -> list[int]:
    if plan.fit_slices is not None:
        return list(plan.fit_slices)
    return list(range(field_.grid.nt))


def check_hypotheses(field_: WeightField, kappa: float, delta: float, R_bar: float,
                     probe_plan: ProbePlan) -> WeightClassReport:
    """Check the structural hypotheses at every probe and fit the class constants."""
    if not 0 < kappa < 0.5:
        raise ValueError("kappa must lie in (0, 1/2)")
    if not delta > 0 or not R_bar > 0:
        raise ValueError("delta and R_bar must be positive")
    grid = field_.grid
    probes: list[dict] = []
    kappa_max = math.inf
    delta_max = math.inf
    L_ratio = 1.0
    for x0, t0, j, r, pr in _probe_items(field_, probe_plan, R_bar):
        j0 = pr.j0
        if pr.rho[j0] <= 0:
            raise DegenerateMeasure(f"zero weight on B_{r:g}({x0:g}) at t={t0:g}")
        w = _window(grid, j0, delta)
        frac_rho = pr.rho_j[j0] / pr.rho[j0]
        frac_chi = pr.chi_j[j0] / pr.lebesgue
        spread_rho = float(np.ptp(pr.rho_j[w])) / pr.rho[j0]
        spread_chi = float(np.ptp(pr.chi_j[w])) / pr.lebesgue
        kappa_max = min(kappa_max, 0.5 * min(frac_rho, frac_chi))
        # widest window on which both spreads stay within kappa
        m_ok = 0
        for m in range(1, grid.nt):
            ww = slice(max(0, j0 - m), min(grid.nt - 1, j0 + m) + 1)
            if (np.ptp(pr.rho_j[ww]) > kappa * pr.rho[j0] * (1 + REL_TOL)
                    or np.ptp(pr.chi_j[ww]) > kappa * pr.lebesgue * (1 + REL_TOL)):
                break
            m_ok = m
            if ww.start == 0 and ww.stop == grid.nt:
                m_ok = grid.nt - 1
                break
        delta_max = min(delta_max, m_ok * grid.dt)
        rho_w = pr.rho[w]
        L_ratio = max(L_ratio, float(pr.rho.max() / rho_w.min()), float(rho_w.max() / pr.rho.min()))
        probes.append({
            "x0": x0, "t0": t0, "j": j, "r": r,
            "H2_i": frac_rho - 2 * kappa, "H2_ii": frac_chi - 2 * kappa,
            "H3_i": kappa - spread_rho, "H3_ii": kappa - spread_chi,
        })
    if not probes:
        raise ValueError("probe plan is empty")
    slices = _fit_slices(field_, probe_plan)
    centers = sorted({p[0] for p in probe_plan.points})
    dbl_radii = [r for r in probe_plan.radii]
    c_rho = 1.0
    for j in slices:
        for c in centers:
            for r in dbl_radii:
                try:
                    c_rho = max(c_rho, doubling_constant(field_, j, [c], [r]))
                except BallExceedsDomain:
                    continue
    plan = ainfty_plan(grid, centers, probe_plan.radii)
    fit = fit_Ainfty(field_, slices, plan) if plan else AinftyFit(math.inf, math.nan, math.inf, False, 0, 0)
    K1 = fit_B2q(field_, slices, probe_plan.q, concentric_plan(centers, probe_plan.radii))
    L = lipschitz_estimate(field_, centers, probe_plan.radii)
    tol = -REL_TOL
    passed = {
        "H1": math.isfinite(L),
        "H2_i": all(p["H2_i"] >= tol for p in probes),
        "H2_ii": all(p["H2_ii"] >= tol for p in probes),
        "H3_i": all(p["H3_i"] >= tol for p in probes),
        "H3_ii": all(p["H3_ii"] >= tol for p in probes),
        "H4": fit.in_class and math.isfinite(K1) and math.isfinite(c_rho),
    }
    return WeightClassReport(
        c_rho=c_rho, K1=K1, q=probe_plan.q, K2=fit.K2, varsigma=fit.varsigma, b=fit.b,
        kappa=kappa, delta=delta, R_bar=R_bar, L_continuity=L, L_ratio=L_ratio,
        kappa_max=kappa_max, delta_max=delta_max, in_Ainfty=fit.in_class,
        passed=passed, probes=probes)


@dataclass
class ConsequenceCheck:
    passed: bool
    worst_margin: float
    checked: int

    def add(self, margin: float) -> None:
        self.checked += 1
        self.worst_margin = min(self.worst_margin, margin)
        self.passed = self.worst_margin >= -1e-10


def _rel(lhs: float, rhs: float) -> float:
    """Relative margin of ``lhs <= rhs`` (positive when it holds)."""
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return (rhs - lhs) / scale


def verify_consequences(field_: WeightField, report: WeightClassReport,
                        probe_plan: ProbePlan) -> dict[str, ConsequenceCheck]:
    """Evaluate the consequences of the hypotheses with the fitted constants.

    Each entry records whether the inequality held at every probe and the
    worst relative margin.  Nothing is raised on failure.
    """
    grid = field_.grid
    kappa, delta, L = report.kappa, report.delta, report.L_ratio
    names = ["C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9", "C10"]
    out = {n: ConsequenceCheck(True, math.inf, 0) for n in names}
    c_rho_j = report.c_rho / (2 * kappa)
    for x0, t0, j, r, pr in _probe_items(field_, probe_plan, report.R_bar):
        j0 = pr.j0
        w = _window(grid, j0, delta)
        wo = _window(grid, j0, delta, open_=True)
        rel_jump = np.abs(np.diff(pr.rho)) / pr.rho[:-1]
        out["C1"].add(_rel(float(rel_jump.max(initial=0.0)), kappa))
        for k in range(w.start, w.stop):
            out["C3"].add(_rel(kappa * pr.rho[j0], pr.rho_j[k]))
            out["C4"].add(_rel(kappa * pr.lebesgue, pr.chi_j[k]))
            out["C8"].add(_rel(kappa / L * pr.rho[k], pr.rho_j[k]))
        f = (1 + kappa) / kappa
        for arr in (pr.rho_j[wo], pr.chi_j[wo]):
            lo, hi = float(arr.min()), float(arr.max())
            out["C5"].add(_rel(hi, f * lo))
            if lo > 0:
                out["C5"].add(_rel(1 / lo, f / hi))
        rw = pr.rho[wo]
        out["C6"].add(_rel(float(pr.rho.max()), L * float(rw.min())))
        out["C6"].add(_rel(1 / float(pr.rho.min()), L / float(rw.max())))
        try:
            big = _profile(field_, x0, 2 * r, j, j0)
        except BallExceedsDomain:
            big = None
        if big is not None:
            for k in range(w.start, w.stop):
                out["C2"].add(_rel(big.rho[k], report.c_rho * pr.rho[k]))
            if 2 * r <= report.R_bar * (1 + SNAP):
                out["C7"].add(_rel(big.rho_j[j0], c_rho_j * pr.rho_j[j0]))
                out["C7"].add(_rel(big.chi_j[j0], pr.chi_j[j0] / kappa))
            theta = min(1.0, delta / (4 * r * r))
            n_small = max(1, int(math.floor(theta * r * r / grid.dt + 0.5)))
            n_big = max(1, int(math.floor(theta * 4 * r * r / grid.dt + 0.5)))
            if j0 + n_big <= grid.nt - 1:
                theta_s = n_small * grid.dt / (r * r)
                theta_b = n_big * grid.dt / (4 * r * r)
                C = f * c_rho_j * (theta_b / theta_s) * 4.0
                lhs = float(big.rho_j[j0:j0 + n_big].sum()) * grid.dt
                rhs = float(pr.rho_j[j0:j0 + n_small].sum()) * grid.dt
                out["C9"].add(_rel(lhs, C * rhs))
                lhs = float(big.chi_j[j0:j0 + n_big].sum()) * grid.dt
                rhs = float(pr.chi_j[j0:j0 + n_small].sum()) * grid.dt
                out["C9"].add(_rel(lhs, (theta_b / theta_s) * 8.0 / kappa * rhs))
        if report.in_Ainfty:
            row = ball_row(grid, x0, r)
            idx = np.flatnonzero(row)
            n = idx.size
            s_cnt = 0
            s_rho = 0.0
            b_rho = 0.0
            for step, k in enumerate(range(w.start, w.stop)):
                take = idx[: max(1, n // 2)] if step % 2 == 0 else idx[n - max(1, n // 4):]
                s_cnt += take.size
                s_rho += float(field_.values[k, take].sum())
                b_rho += float(field_.values[k, row].sum())
            a = s_cnt / (n * (w.stop - w.start))
            wr = s_rho / b_rho
            out["C10"].add(_rel(a ** report.b, L * report.K2 * wr))
            out["C10"].add(_rel(wr, L * report.K2 * a ** report.varsigma))
        else:
            out["C10"].add(-math.inf)
    for chk in out.values():
        if chk.checked == 0:
            chk.worst_margin = math.nan
    return out


# ----------------------------------------------------------------- Sobolev-type inequalities

def _slice_ball(grid: Grid, omega: np.ndarray, x0: float, r: float) -> np.ndarray:
    _check_ball(grid, x0, r)
    row = ball_row(grid, x0, r)
    if np.any(np.asarray(omega)[row] <= 0):
        raise ValueError("weight must be positive on the ball")
    return row


def weighted_sobolev_check(grid: Grid, omega: np.ndarray, u: np.ndarray, r: float, q: float,
                           x0: float = 0.0) -> tuple[float, float, float]:
    """Both sides of the weighted Sobolev inequality on ``B_r(x0)``.

    Returns ``(lhs, rhs, beta_required)`` where ``lhs`` is the weighted
    ``L^q`` mean of ``u``, ``rhs = r * (mean |Du|^2)^(1/2)`` and
    ``beta_required = lhs / rhs`` is the smallest admissible constant.
    ``u`` must vanish off the ball or have zero weighted mean on it.
    """
    omega = np.asarray(omega, dtype=float)
    u = np.asarray(u, dtype=float)
    row = _slice_ball(grid, omega, x0, r)
    scale = max(1.0, float(np.max(np.abs(u))))
    outside_ok = float(np.max(np.abs(u[~row]), initial=0.0)) <= 1e-12 * scale
    mean_ok = abs(float(np.sum(u[row] * omega[row]))) <= 1e-12 * float(np.sum(np.abs(u[row]) * omega[row]) + 1e-300)
    if not (outside_ok or mean_ok):
        raise SupportViolation("u neither vanishes off the ball nor has zero weighted mean on it")
    du = np.gradient(u, grid.dx)
    lhs = (float(np.sum(np.abs(u[row]) ** q * omega[row])) / float(np.sum(omega[row]))) ** (1.0 / q)
    rhs = r * math.sqrt(float(np.mean(du[row] ** 2)))
    if rhs == 0:
        return lhs, rhs, (0.0 if lhs == 0 else math.inf)
    return lhs, rhs, lhs / rhs


def sobolev_beta(grid: Grid, omega: np.ndarray, r: float, q: float = 4.0, x0: float = 0.0) -> float:
    """Largest required Sobolev constant over centred tents of width ``r``, ``r/2``, ``r/4``."""
    best = 0.0
    for half in (r, r / 2, r / 4):
        u = _tent(grid, x0, half)
        best = max(best, weighted_sobolev_check(grid, omega, u, r, q, x0)[2])
    return best


def level_separation_check(grid: Grid, omega: np.ndarray, v: np.ndarray, k: float, l: float,
                           r: float, p: float = 2.0, x0: float = 0.0,
                           beta: float | None = None) -> tuple[float, float]:
    """Both sides of the level-separation inequality between levels ``k < l``.

    ``beta`` defaults to :func:`sobolev_beta` on the same ball.
    """
    if not k < l:
        raise ValueError("need k < l")
    if not 1 < p <= 2:
        raise ValueError("p must lie in (1, 2]")
    omega = np.asarray(omega, dtype=float)
    v = np.asarray(v, dtype=float)
    row = _slice_ball(grid, omega, x0, r)
    if beta is None:
        beta = sobolev_beta(grid, omega, r, 4.0, x0)
    dx = grid.dx
    eta = lambda m: float(np.sum(omega[m])) * dx  # noqa: E731
    lhs = (l - k) * eta(row & (v < k)) * eta(row & (v > l))
    dv = np.abs(np.gradient(v, dx))
    band = row & (v > k) & (v < l)
    size = row.sum() * dx
    rhs = 2 * beta * r * eta(row) ** 2 * (float(np.sum(dv[band] ** p)) * dx / size) ** (1.0 / p)
    return lhs, rhs


__all__ = [
    "WeightField", "measure", "WaitingTimes", "waiting_times", "only_future", "IdentityReport",
    "waiting_time_identities", "doubling_constant", "SamplePair", "ainfty_plan", "AinftyFit",
    "fit_Ainfty", "concentric_plan", "fit_B2q", "ProbePlan", "WeightClassReport",
    "check_hypotheses", "ConsequenceCheck", "verify_consequences", "weighted_sobolev_check",
    "sobolev_beta", "level_separation_check", "lipschitz_estimate", "INTERFACE",
]
