"""Energy (Caccioppoli-type) inequality diagnostics and the geometric-convergence lemma."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from .errors import DegenerateGap
from .geometry import Grid, NodeSet
from .solver import ScalarField
from .weights import WeightField

Sign = Literal["plus", "minus"]


@dataclass(frozen=True, eq=False)
class Cutoff:
    """Piecewise-linear cutoff ``zeta`` with its measured bounds.

    ``grad_sup`` and ``zt_sup`` come from forward differences of the nodal
    values; ``gap_x`` and ``gap_t`` are the ramp widths they should obey.
    """

    grid: Grid
    values: np.ndarray
    grad_sup: float
    zt_sup: float
    zt_min: float
    gap_x: float
    gap_t: float

    @property
    def support(self) -> NodeSet:
        return NodeSet(self.grid, self.values > 0, spacetime=True)

    def check_invariants(self) -> bool:
        v = self.values
        return bool(np.all(v >= 0) and np.all(v <= 1) and self.zt_min >= 0
                    and np.all(v[:, 0] == 0) and np.all(v[:, -1] == 0))


def _box(set_: NodeSet) -> tuple[float, float, int, int]:
    g = set_.grid
    if set_.is_empty:
        raise DegenerateGap("empty set")
    cols = np.flatnonzero(set_.mask.any(axis=0))
    rows = set_.slices
    return float(g.x[cols[0]]), float(g.x[cols[-1]]), int(rows[0]), int(rows[-1])


def make_cutoff(grid: Grid, inner_set: NodeSet, outer_set: NodeSet) -> Cutoff:
    """Cutoff equal to 1 on the inner box and 0 on and beyond the outer box's edge.

    In space ``zeta`` ramps linearly from the outer box's extreme nodes to the
    inner box's extreme nodes.  In time it ramps from the first outer slice
    to the first inner slice and then stays constant, so ``zeta_t >= 0``.
    Before the outer box starts it vanishes.
    """
    if not inner_set <= outer_set:
        raise ValueError("inner set must lie inside the outer set")
    xi0, xi1, ti0, _ = _box(inner_set)
    xo0, xo1, to0, _ = _box(outer_set)
    gl, gr = xi0 - xo0, xo1 - xi1
    tol = 1e-9 * grid.dx
    if gl <= tol or gr <= tol:
        raise DegenerateGap("inner box touches the outer box in space")
    x = grid.x
    zx = np.clip(np.minimum((x - xo0) / gl, (xo1 - x) / gr), 0.0, 1.0)
    n = np.arange(grid.nt)
    if ti0 > to0:
        zt = np.clip((n - to0) / (ti0 - to0), 0.0, 1.0)
    else:
        zt = (n >= to0).astype(float)
    values = np.minimum(zx[None, :], zt[:, None])
    grad = np.abs(np.diff(values, axis=1)) / grid.dx
    dzt = np.diff(values, axis=0) / grid.dt
    ramp = dzt[to0:] if ti0 > to0 else dzt[to0:to0]
    return Cutoff(grid, values, float(grad.max()), float(ramp.max(initial=0.0)),
                  float(dzt.min()), min(gl, gr), (ti0 - to0) * grid.dt)


@dataclass
class EnergyReport:
    k: float
    sign: str
    t1: float
    t2: float
    lhs_energy: float
    lhs_gradient: float
    rhs_t1: float
    rhs_grad_zeta: float
    rhs_zeta_t: float
    rhs_zeta2: float
    rhs_k2: float
    include_k2: bool
    gamma_required: float
    gamma_required_max: float

    @property
    def bracket(self) -> float:
        return self.rhs_grad_zeta + self.rhs_zeta_t + self.rhs_zeta2 + (self.rhs_k2 if self.include_k2 else 0.0)

    def terms(self) -> list[tuple[str, float]]:
        return [("lhs_energy", self.lhs_energy), ("lhs_gradient", self.lhs_gradient),
                ("rhs_t1", self.rhs_t1), ("rhs_grad_zeta", self.rhs_grad_zeta),
                ("rhs_zeta_t", self.rhs_zeta_t), ("rhs_zeta2", self.rhs_zeta2),
                ("rhs_k2", self.rhs_k2), ("gamma_required", self.gamma_required),
                ("gamma_required_max", self.gamma_required_max)]

    def to_dict(self) -> dict:
        return asdict(self)


def _required(excess: float, bracket: float) -> float:
    if excess <= 0:
        return 0.0
    if bracket <= 0:
        return math.inf
    return 2.0 * excess / bracket


def energy_sides(u: ScalarField, weight: WeightField, zeta: Cutoff, k: float, t1: float, t2: float,
                 sign: Sign = "plus", include_k2: bool = True) -> EnergyReport:
    """Itemise both sides of the energy inequality on ``[t1, t2]``.

    Space-time integrals take the slices ``t1 + dt, ..., t2`` (matching the
    implicit scheme); the ``zeta zeta_t rho`` term sits on half steps with
    the forward difference of ``zeta``.  Gradients live on cell faces.
    """
    grid = u.grid
    j1, j2 = grid.slice_index(t1), grid.slice_index(t2)
    if not j1 < j2:
        raise ValueError("need t1 < t2")
    dx, dt = grid.dx, grid.dt
    if sign == "plus":
        w = np.maximum(u.values - k, 0.0)
        level = u.values > k
    else:
        w = np.maximum(k - u.values, 0.0)
        level = u.values < k
    z = zeta.values
    rho = weight.values
    z2 = z * z
    w2 = w * w
    energy = np.sum(w2 * z2 * rho, axis=1) * dx
    face = lambda a: 0.5 * (a[:, 1:] + a[:, :-1])  # noqa: E731
    dw = np.diff(w, axis=1) / dx
    dz = np.diff(z, axis=1) / dx
    grad_u = np.sum(dw * dw * face(z2), axis=1) * dx
    grad_z = np.sum(face(w2) * dz * dz, axis=1) * dx
    mass = np.sum(w2 * z2, axis=1) * dx
    dzn = np.gradient(z, dx, axis=1)
    k2 = k * k * np.sum(np.where(level, z2 + dzn * dzn, 0.0), axis=1) * dx
    zt = np.diff(z, axis=0) / dt
    half = 0.5 * (w2 * z * rho)[:-1] + 0.5 * (w2 * z * rho)[1:]
    zeta_t = np.sum(zt * half, axis=1) * dx
    steps = slice(j1 + 1, j2 + 1)
    lhs_e = float(energy[j2])
    lhs_g = float(grad_u[steps].sum()) * dt
    t1_term = float(energy[j1])
    T1 = float(grad_z[steps].sum()) * dt
    T2 = float(zeta_t[j1:j2].sum()) * dt
    T3 = float(mass[steps].sum()) * dt
    T4 = float(k2[steps].sum()) * dt
    bracket = T1 + T2 + T3 + (T4 if include_k2 else 0.0)
    gamma = _required(lhs_e + lhs_g - t1_term, bracket)
    gamma_max = _required(float(energy[j1:j2 + 1].max()) - t1_term, bracket)
    return EnergyReport(k, sign, j1 * dt, j2 * dt, lhs_e, lhs_g, t1_term, T1, T2, T3, T4,
                        include_k2, gamma, gamma_max)


@dataclass(frozen=True)
class GiustiResult:
    sequence: list[float]
    converged: bool
    threshold: float
    overflow: bool

    def __iter__(self):
        return iter((self.sequence, self.converged, self.threshold))


def giusti_threshold(c: float, b: float, alpha: float) -> float:
    return c ** (-1.0 / alpha) * b ** (-1.0 / alpha ** 2)


def giusti_iterate(y0: float, c: float, b: float, alpha: float, max_h: int = 40) -> GiustiResult:
    """Iterate ``y_{h+1} = c b^h y_h^(1+alpha)``; overflow counts as divergence."""
    if not (c > 0 and alpha > 0 and b > 1 and y0 >= 0):
        raise ValueError("need c, alpha > 0, b > 1 and y0 >= 0")
    seq = [float(y0)]
    overflow = False
    y = float(y0)
    for h in range(max_h):
        try:
            y = c * b ** h * y ** (1.0 + alpha)
        except OverflowError:
            y = math.inf
        if not math.isfinite(y):
            overflow = True
            seq.append(math.inf)
            break
        seq.append(y)
    converged = (not overflow) and len(seq) == max_h + 1 and seq[-1] < 1e-12
    return GiustiResult(seq, converged, giusti_threshold(c, b, alpha), overflow)
