"""Finite-difference solvers for ``rho u_t - (a u_x)_x + b u_x + c u = 0``.

Time is discretised by backward Euler, space by central differences with
the diffusion coefficient harmonically averaged onto cell faces.  Three
regimes are covered: positive ``rho`` (time marching), ``rho >= 0`` through a
sweep of positive regularisations, and sign-changing ``rho`` through one
global space-time system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.linalg import lapack, solve_banded

from .errors import NonPartitioned, SingularGlobalSystem, SingularStep, StripTooWide
from .geometry import REGION_1, REGION_2, Grid, NodeSet
from .weights import WeightField

Form = Literal["nonconservative", "conservative"]


@dataclass(frozen=True, eq=False)
class EquationCoefficients:
    """Linear coefficients sampled on the grid (each an ``(nt, nx)`` array)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @classmethod
    def constant(cls, grid: Grid, a: float = 1.0, b: float = 0.0, c: float = 0.0) -> "EquationCoefficients":
        return cls(np.full(grid.shape, float(a)), np.full(grid.shape, float(b)),
                   np.full(grid.shape, float(c)))

    def __post_init__(self) -> None:
        if np.any(self.a <= 0):
            raise ValueError("diffusion coefficient must be positive")

    @property
    def bounds(self) -> dict[str, float]:
        return {"lambda": float(self.a.min()), "Lambda": float(self.a.max()),
                "M": float(np.abs(self.b).max()), "N": float(np.abs(self.c).max())}


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data: a single function ``phi(x, t)`` sampled on the relevant boundary nodes."""

    phi: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def left(self, grid: Grid) -> np.ndarray:
        return self._eval(np.full(grid.nt, grid.x_lo), grid.t)

    def right(self, grid: Grid) -> np.ndarray:
        return self._eval(np.full(grid.nt, grid.x_hi), grid.t)

    def initial(self, grid: Grid) -> np.ndarray:
        return self._eval(grid.x, np.zeros(grid.nx))

    def final(self, grid: Grid) -> np.ndarray:
        return self._eval(grid.x, np.full(grid.nx, grid.t_hi))

    def _eval(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        out = np.broadcast_to(np.asarray(self.phi(x, t), dtype=float), x.shape).copy()
        if not np.all(np.isfinite(out)):
            raise ValueError("boundary data must be finite")
        return out


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError("field shape does not match grid")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def at(self, x: float, t: float) -> float:
        return float(self.values[self.grid.slice_index(t), self.grid.node_index(x)])

    def over(self, set_: NodeSet) -> np.ndarray:
        return self.values[set_.mask]

    def restrict_to(self, coarse: Grid) -> "ScalarField":
        """Sample on a coarser grid whose nodes are a subset of this one's."""
        fx = (self.grid.nx - 1) // (coarse.nx - 1)
        ft = (self.grid.nt - 1) // (coarse.nt - 1)
        if (coarse.nx - 1) * fx != self.grid.nx - 1 or (coarse.nt - 1) * ft != self.grid.nt - 1:
            raise ValueError("grids are not nested")
        return ScalarField(coarse, self.values[::ft, ::fx])


def harmonic_faces(a: np.ndarray) -> np.ndarray:
    """Harmonic mean of neighbouring nodal values (one entry per interior face)."""
    return 2.0 * a[..., 1:] * a[..., :-1] / (a[..., 1:] + a[..., :-1])


def _spatial_rows(grid: Grid, a: np.ndarray, b: np.ndarray, c: np.ndarray
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sub-, main- and super-diagonal of the discrete operator at one slice (interior nodes)."""
    dx2 = grid.dx * grid.dx
    af = harmonic_faces(a)
    west, east = af[:-1], af[1:]
    bi = b[1:-1] / (2.0 * grid.dx)
    lower = -west / dx2 - bi
    diag = (west + east) / dx2 + c[1:-1]
    upper = -east / dx2 + bi
    return lower, diag, upper


def _check_positive(weight: WeightField) -> None:
    if np.any(weight.values <= 0):
        raise ValueError("time marching needs a strictly positive weight; use the regularised solvers")


def _march(grid: Grid, rho: np.ndarray, coeffs: EquationCoefficients, bdata: BoundaryData,
           form: Form = "nonconservative") -> np.ndarray:
    """Backward-Euler time marching with one tridiagonal solve per step.

    ``rho`` may vanish on some nodes: those rows become purely elliptic.
    """
    nx, nt, dt = grid.nx, grid.nt, grid.dt
    u = np.empty(grid.shape)
    left, right = bdata.left(grid), bdata.right(grid)
    u[0] = bdata.initial(grid)
    u[0, 0], u[0, -1] = left[0], right[0]
    ab = np.zeros((3, nx))
    for n in range(1, nt):
        lower, diag, upper = _spatial_rows(grid, coeffs.a[n], coeffs.b[n], coeffs.c[n])
        rho_new = rho[n, 1:-1]
        rho_old = rho[n - 1, 1:-1] if form == "conservative" else rho_new
        ab[:] = 0.0
        ab[1, 0] = ab[1, -1] = 1.0
        ab[1, 1:-1] = diag + rho_new / dt
        ab[0, 2:] = upper
        ab[2, :-2] = lower
        rhs = np.empty(nx)
        rhs[0], rhs[-1] = left[n], right[n]
        rhs[1:-1] = rho_old * u[n - 1, 1:-1] / dt
        if np.any(ab[1] == 0):
            raise SingularStep(n, f"zero diagonal entry at time step {n}")
        try:
            u[n] = solve_banded((1, 1), ab, rhs, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularStep(n) from exc
        if not np.all(np.isfinite(u[n])):
            raise SingularStep(n, f"non-finite values at time step {n}")
    return u


def solve_parabolic(coeffs: EquationCoefficients, weight: WeightField, bdata: BoundaryData,
                    form: Form = "nonconservative") -> ScalarField:
    """Time-marching solve for a strictly positive weight."""
    _check_positive(weight)
    grid = weight.grid
    return ScalarField(grid, _march(grid, weight.values, coeffs, bdata, form), {"regime": "parabolic"})


def default_eps(k_max: int = 10) -> list[float]:
    return [2.0 ** -k for k in range(k_max + 1)]


def regularised_weight(weight: WeightField, eps: float, rho0: np.ndarray | float = 1.0) -> np.ndarray:
    """``rho`` on region 1, ``eps * rho0`` on region 2, unchanged on interface nodes."""
    lab = weight.partition.label
    floor = np.broadcast_to(np.asarray(rho0, dtype=float), weight.grid.shape)
    return np.where(lab == REGION_2, eps * floor, weight.values)


def _check_elliptic_parabolic(weight: WeightField, rho0: np.ndarray | float) -> None:
    lab = weight.partition.label
    v = weight.values
    if np.any(v[lab == REGION_1] <= 0):
        raise NonPartitioned("weight must be positive on region 1")
    if np.any(v[lab == REGION_2] != 0):
        raise NonPartitioned("weight must vanish on region 2")
    floor = np.broadcast_to(np.asarray(rho0, dtype=float), weight.grid.shape)
    if np.any(floor[lab == REGION_2] <= 0):
        raise ValueError("floor field must be positive on region 2")


def solve_elliptic_parabolic(coeffs: EquationCoefficients, weight: WeightField,
                             rho0: np.ndarray | float, bdata: BoundaryData,
                             eps_list: Sequence[float] | None = None,
                             form: Form = "nonconservative") -> list[ScalarField]:
    """Solve the regularised problems for every ``eps`` (ordered as given)."""
    eps_list = default_eps() if eps_list is None else list(eps_list)
    if any(not 0 < e <= 1 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing inside (0, 1]")
    _check_elliptic_parabolic(weight, rho0)
    grid = weight.grid
    family = []
    for e in eps_list:
        rho_e = regularised_weight(weight, e, rho0)
        family.append(ScalarField(grid, _march(grid, rho_e, coeffs, bdata, form),
                                  {"regime": "elliptic_parabolic", "eps": e}))
    return family


def solve_degenerate_limit(coeffs: EquationCoefficients, weight: WeightField, bdata: BoundaryData,
                           form: Form = "nonconservative") -> ScalarField:
    """Direct solve with ``rho = 0`` on region 2 (elliptic rows there)."""
    _check_elliptic_parabolic(weight, 1.0)
    grid = weight.grid
    return ScalarField(grid, _march(grid, weight.values, coeffs, bdata, form),
                       {"regime": "elliptic_parabolic", "eps": 0.0})


# ----------------------------------------------------------------- forward-backward

@dataclass
class BandedSystem:
    """Global system in LAPACK general-band storage (``kl`` extra rows reserved for pivoting)."""

    n: int
    kl: int
    ku: int
    ab: np.ndarray
    rhs: np.ndarray

    @classmethod
    def zeros(cls, n: int, kl: int, ku: int) -> "BandedSystem":
        return cls(n, kl, ku, np.zeros((2 * kl + ku + 1, n), order="F"), np.zeros(n))

    @property
    def bandwidth(self) -> int:
        return self.kl + self.ku + 1

    def add(self, row: int, col: int, value: float) -> None:
        self.ab[self.kl + self.ku + row - col, col] += value

    def diagonal(self) -> np.ndarray:
        return self.ab[self.kl + self.ku]

    def solve(self) -> np.ndarray:
        if np.any(self.diagonal() == 0):
            bad = int(np.flatnonzero(self.diagonal() == 0)[0])
            raise SingularGlobalSystem(bad)
        _, _, x, info = lapack.dgbsv(self.kl, self.ku, self.ab, self.rhs,
                                     overwrite_ab=True, overwrite_b=False)
        if info > 0:
            raise SingularGlobalSystem(info - 1)
        if info < 0:
            raise ValueError(f"illegal argument {-info} passed to the band solver")
        return x


def strip_weight(weight: WeightField, eps_strip: float) -> np.ndarray:
    """Zero the weight on nodes within ``eps_strip`` of the interface (per slice, in x)."""
    grid = weight.grid
    s = weight.partition.interface_x
    if weight.partition.is_trivial and eps_strip == 0:
        # single positive region: the global system is plain implicit marching
        return weight.values.copy()
    if np.any(np.isnan(s)):
        raise ValueError("forward-backward solve needs an interface on every slice")
    dist = np.abs(grid.x[None, :] - s[:, None])
    rho = np.where(dist < eps_strip, 0.0, weight.values)
    for j in range(grid.nt):
        if not (np.any(rho[j] > 0) and np.any(rho[j] < 0)):
            raise StripTooWide(f"strip of width {eps_strip:g} swallows a region at slice {j}")
    return rho


def solve_forward_backward(coeffs: EquationCoefficients, weight: WeightField, eps_strip: float,
                           bdata: BoundaryData) -> ScalarField:
    """One global solve over all space-time nodes.

    Rows use the implicit forward stencil where the weight is positive, the
    implicit backward stencil where it is negative and a pure spatial row
    where it vanishes.  Dirichlet rows: lateral boundary, ``t = 0`` where the
    weight is positive, ``t = T`` where it is negative.  Vanishing-weight
    nodes on the first and last slices get no temporal data.
    """
    if eps_strip < 0:
        raise ValueError("eps_strip must be non-negative")
    lab = weight.partition.label
    if np.any(weight.values[lab == REGION_1] <= 0) or np.any(weight.values[lab == REGION_2] >= 0):
        raise NonPartitioned("weight must be positive on region 1 and negative on region 2")
    grid = weight.grid
    rho = strip_weight(weight, eps_strip)
    nx, nt, dt = grid.nx, grid.nt, grid.dt
    N = nx * nt
    sys = BandedSystem.zeros(N, nx, nx)
    left, right = bdata.left(grid), bdata.right(grid)
    init, final = bdata.initial(grid), bdata.final(grid)

    def k(i: int, j: int) -> int:
        return j * nx + i

    for j in range(nt):
        lower, diag, upper = _spatial_rows(grid, coeffs.a[j], coeffs.b[j], coeffs.c[j])
        for i in (0, nx - 1):
            sys.add(k(i, j), k(i, j), 1.0)
            sys.rhs[k(i, j)] = left[j] if i == 0 else right[j]
        for i in range(1, nx - 1):
            row = k(i, j)
            r = rho[j, i]
            if (r > 0 and j == 0) or (r < 0 and j == nt - 1):
                sys.add(row, row, 1.0)
                sys.rhs[row] = init[i] if j == 0 else final[i]
                continue
            sys.add(row, k(i - 1, j), lower[i - 1])
            sys.add(row, row, diag[i - 1])
            sys.add(row, k(i + 1, j), upper[i - 1])
            if r > 0:
                sys.add(row, row, r / dt)
                sys.add(row, k(i, j - 1), -r / dt)
            elif r < 0:
                sys.add(row, row, -r / dt)
                sys.add(row, k(i, j + 1), r / dt)
    try:
        x = sys.solve()
    except SingularGlobalSystem as exc:
        raise SingularGlobalSystem(exc.row, (exc.row % nx, exc.row // nx)) from None
    u = x.reshape(nt, nx)
    if not np.all(np.isfinite(u)):
        raise SingularGlobalSystem(-1)
    strip_nodes = int(np.sum((rho == 0)))
    return ScalarField(grid, u, {"regime": "forward_backward", "eps_strip": eps_strip,
                                 "strip_nodes": strip_nodes,
                                 "strip_boundary_rows": "elliptic (no temporal data)"})


# ----------------------------------------------------------------- convergence diagnostics

def l2_norm(grid: Grid, v: np.ndarray) -> float:
    return math.sqrt(float(np.sum(v * v)) * grid.dx * grid.dt)


def h1_norm(grid: Grid, v: np.ndarray) -> float:
    dv = np.diff(v, axis=1) / grid.dx
    return math.sqrt(l2_norm(grid, v) ** 2 + float(np.sum(dv * dv)) * grid.dx * grid.dt)


def richardson(values: Sequence, ratio: float = 2.0):
    """Extrapolate the last three members of a sequence with ``eps`` shrinking by ``ratio``.

    Assumes an expansion ``v(eps) = v + A eps + B eps^2``; works on scalars and arrays.
    """
    if len(values) < 3:
        raise ValueError("need at least three members")
    v1, v2, v3 = values[-3], values[-2], values[-1]
    q = ratio
    # first-order elimination on each pair, then second-order on the results
    r12 = (q * v2 - v1) / (q - 1)
    r23 = (q * v3 - v2) / (q - 1)
    return (q * q * r23 - r12) / (q * q - 1)


@dataclass
class TargetCheck:
    name: str
    infs: list[float]
    sups: list[float]
    inf_limit: float
    sup_limit: float
    limsup_inf: float
    liminf_sup: float
    inf_ok: bool
    sup_ok: bool


@dataclass
class ConvergenceReport:
    eps: list[float]
    l2_successive: list[float]
    h1_successive: list[float]
    decreasing: bool
    limit: ScalarField
    targets: list[TargetCheck]

    @property
    def targets_ok(self) -> bool:
        return all(t.inf_ok and t.sup_ok for t in self.targets)


def convergence_report(family: Sequence[ScalarField], target_sets: Sequence[NodeSet] | dict,
                       tol: float = 1e-6, slack: float = 1.1) -> ConvergenceReport:
    """Successive distances, extrapolated limit and limit inequalities on target sets.

    The limit superior of ``inf_A u_eps`` is estimated by extrapolating the
    sequence of infima the same way as the field; it must not exceed the
    infimum of the extrapolated field by more than ``tol`` (mirror check for
    suprema).
    """
    if len(family) < 3:
        raise ValueError("need at least three family members")
    grid = family[0].grid
    eps = [float(f.meta.get("eps", math.nan)) for f in family]
    l2 = [l2_norm(grid, b.values - a.values) for a, b in zip(family, family[1:])]
    h1 = [h1_norm(grid, b.values - a.values) for a, b in zip(family, family[1:])]
    decreasing = all(l2[i + 1] <= slack * l2[i] for i in range(len(l2) - 1))
    ratio = eps[-2] / eps[-1] if all(math.isfinite(e) and e > 0 for e in eps[-2:]) else 2.0
    limit_vals = richardson([f.values for f in family], ratio)
    limit = ScalarField(grid, limit_vals, {"eps": 0.0, "extrapolated": True})
    items = target_sets.items() if isinstance(target_sets, dict) else (
        (f"set{k}", s) for k, s in enumerate(target_sets))
    checks = []
    for name, s in items:
        infs = [float(f.values[s.mask].min()) for f in family]
        sups = [float(f.values[s.mask].max()) for f in family]
        inf_lim = float(limit_vals[s.mask].min())
        sup_lim = float(limit_vals[s.mask].max())
        ls_inf = float(richardson(infs, ratio))
        li_sup = float(richardson(sups, ratio))
        checks.append(TargetCheck(name, infs, sups, inf_lim, sup_lim, ls_inf, li_sup,
                                  ls_inf <= inf_lim + tol, li_sup >= sup_lim - tol))
    return ConvergenceReport(eps, l2, h1, decreasing, limit, checks)
