"""Discrete space-time sets on a uniform 1-D grid.

Nodes are cell centres: node ``(i, j)`` sits at ``(x_lo + i*dx, j*dt)`` and
owns a cell of width ``dx`` (and duration ``dt`` for space-time sets).  Every
measure is a cell count times the cell volume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Sequence

import numpy as np

from .errors import (
    BallExceedsDomain,
    CylinderExceedsDomain,
    EnlargementExceedsDomain,
    InvalidPartition,
)

REGION_1 = 1
REGION_2 = 2
INTERFACE = 0

Direction = Literal["past", "future"]
RegionSpec = int | Literal["full"]

# relative tolerance (in units of dx or dt) for snapping real coordinates to nodes
SNAP = 1e-9


@dataclass(frozen=True)
class Grid:
    x_lo: float
    x_hi: float
    t_hi: float
    nx: int
    nt: int

    def __post_init__(self) -> None:
        if self.nx < 2 or self.nt < 2:
            raise ValueError("grid needs at least two nodes in each direction")
        if not self.x_hi > self.x_lo or not self.t_hi > 0:
            raise ValueError("grid extents must be positive")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / (self.nx - 1)

    @property
    def dt(self) -> float:
        return self.t_hi / (self.nt - 1)

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_lo + np.arange(self.nx) * self.dx

    @cached_property
    def t(self) -> np.ndarray:
        return np.arange(self.nt) * self.dt

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nt, self.nx)

    def slice_index(self, t: float) -> int:
        """Nearest time slice to ``t``; raises if ``t`` lies outside [0, T]."""
        j = int(np.floor(t / self.dt + 0.5))
        if t < -SNAP * self.dt or t > self.t_hi + SNAP * self.dt:
            raise CylinderExceedsDomain(f"time {t:g} outside [0, {self.t_hi:g}]")
        return min(max(j, 0), self.nt - 1)

    def node_index(self, x: float) -> int:
        i = int(np.floor((x - self.x_lo) / self.dx + 0.5))
        return min(max(i, 0), self.nx - 1)

    def refined(self, factor: int = 2) -> "Grid":
        """Grid with spacings divided by ``factor`` sharing every node of this one."""
        return Grid(self.x_lo, self.x_hi, self.t_hi,
                    factor * (self.nx - 1) + 1, factor * (self.nt - 1) + 1)


class NodeSet:
    """Boolean membership mask over grid nodes.

    ``spacetime`` selects the cell volume used for the measure: ``dx*dt`` for
    space-time sets, ``dx`` for single-slice sets.
    """

    __slots__ = ("grid", "mask", "spacetime", "count", "measure")

    def __init__(self, grid: Grid, mask: np.ndarray, spacetime: bool = False) -> None:
        mask = np.array(mask, dtype=bool)
        if mask.shape != grid.shape:
            raise ValueError(f"mask shape {mask.shape} does not match grid {grid.shape}")
        mask.setflags(write=False)
        self.grid = grid
        self.mask = mask
        self.spacetime = spacetime
        self.count = int(mask.sum())
        cell = grid.dx * grid.dt if spacetime else grid.dx
        self.measure = self.count * cell

    @classmethod
    def empty(cls, grid: Grid, spacetime: bool = False) -> "NodeSet":
        return cls(grid, np.zeros(grid.shape, dtype=bool), spacetime)

    @property
    def is_empty(self) -> bool:
        return self.count == 0

    @property
    def slices(self) -> np.ndarray:
        """Time indices that contain at least one member."""
        return np.flatnonzero(self.mask.any(axis=1))

    def row(self, j: int) -> np.ndarray:
        return self.mask[j]

    def _combine(self, other: "NodeSet", mask: np.ndarray) -> "NodeSet":
        return NodeSet(self.grid, mask, self.spacetime or other.spacetime)

    def __or__(self, other: "NodeSet") -> "NodeSet":
        return self._combine(other, self.mask | other.mask)

    def __and__(self, other: "NodeSet") -> "NodeSet":
        return self._combine(other, self.mask & other.mask)

    def __sub__(self, other: "NodeSet") -> "NodeSet":
        return self._combine(other, self.mask & ~other.mask)

    def __le__(self, other: "NodeSet") -> bool:
        return bool(np.all(other.mask[self.mask]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NodeSet):
            return NotImplemented
        return self.grid == other.grid and bool(np.array_equal(self.mask, other.mask))

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        kind = "spacetime" if self.spacetime else "slice"
        return f"NodeSet({kind}, count={self.count}, measure={self.measure:.6g})"


@dataclass(frozen=True, eq=False)
class RegionPartition:
    """Per-node region labels with a single interface location per slice.

    ``interface_x[j]`` is the interface position at slice ``j`` (NaN for the
    trivial partition, where everything is region 1).  Region 1 lies to the
    left of the interface.  A node within ``SNAP*dx`` of the interface is an
    INTERFACE node; otherwise the interface falls between two nodes.
    """

    grid: Grid
    label: np.ndarray
    interface_x: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.label.setflags(write=False)
        self.interface_x.setflags(write=False)

    @classmethod
    def from_positions(cls, grid: Grid, positions: Sequence[float] | np.ndarray,
                       validate: bool = True) -> "RegionPartition":
        s = np.asarray(positions, dtype=float).reshape(grid.nt)
        d = grid.x[None, :] - s[:, None]
        tol = SNAP * grid.dx
        label = np.where(d < -tol, REGION_1, np.where(d > tol, REGION_2, INTERFACE)).astype(np.int8)
        part = cls(grid, label, s.copy())
        if validate:
            part.validate()
        return part

    @classmethod
    def from_line(cls, grid: Grid, slope: float, intercept: float,
                  validate: bool = True) -> "RegionPartition":
        """Interface along the line ``x = slope*t + intercept``."""
        return cls.from_positions(grid, slope * grid.t + intercept, validate)

    @classmethod
    def trivial(cls, grid: Grid) -> "RegionPartition":
        """Everything in region 1; used for homogeneous problems."""
        label = np.full(grid.shape, REGION_1, dtype=np.int8)
        return cls(grid, label, np.full(grid.nt, np.nan))

    @classmethod
    def from_sign(cls, grid: Grid, rho: np.ndarray, zero: Literal["interface", "region2"] = "interface"
                  ) -> "RegionPartition":
        """Derive the partition from the sign pattern of ``rho``.

        Region 1 is where ``rho > 0``.  With ``zero="region2"`` (elliptic-parabolic
        layout) a vanishing value belongs to region 2; with ``zero="interface"``
        (forward-backward layout) a vanishing node between the two signs is the
        interface node.  The interface position is that node, or the face between
        the last region-1 node and the first region-2 node.
        """
        rho = np.asarray(rho, dtype=float)
        label = np.empty(grid.shape, dtype=np.int8)
        pos = np.empty(grid.nt)
        for j in range(grid.nt):
            row = rho[j]
            lab = np.where(row > 0, REGION_1, REGION_2).astype(np.int8)
            if zero == "interface":
                lab[row == 0] = INTERFACE
            one = np.flatnonzero(lab == REGION_1)
            if one.size == 0 or one[-1] != one.size - 1:
                raise InvalidPartition(f"slice {j}: region 1 is not a leading block")
            last = one[-1]
            rest = lab[last + 1:]
            if rest.size and rest[0] == INTERFACE:
                if np.any(rest[1:] == INTERFACE) or np.any(rest[1:] == REGION_1):
                    raise InvalidPartition(f"slice {j}: more than one interface")
                pos[j] = grid.x[last + 1]
            else:
                if np.any(rest != REGION_2):
                    raise InvalidPartition(f"slice {j}: more than one interface")
                pos[j] = grid.x[last] + 0.5 * grid.dx
            label[j] = lab
        part = cls(grid, label, pos)
        part.validate()
        return part

    def validate(self) -> None:
        for j in range(self.grid.nt):
            row = self.label[j]
            if not (np.any(row == REGION_1) and np.any(row == REGION_2)):
                raise InvalidPartition(f"slice {j} lacks a node of one of the two regions")

    @property
    def is_trivial(self) -> bool:
        return bool(np.all(np.isnan(self.interface_x)))

    def region_mask(self, j: int) -> np.ndarray:
        return self.label == j

    @property
    def interface_mask(self) -> np.ndarray:
        return self.label == INTERFACE

    def label_at(self, x: float, t: float) -> int:
        return int(self.label[self.grid.slice_index(t), self.grid.node_index(x)])

    def regions_at(self, x: float, t: float) -> tuple[int, ...]:
        """Regions whose closure contains the node nearest to ``(x, t)``."""
        lab = self.label_at(x, t)
        return (REGION_1, REGION_2) if lab == INTERFACE else (lab,)


def _check_ball(grid: Grid, x0: float, r: float) -> None:
    if r <= 0:
        raise ValueError("radius must be positive")
    tol = SNAP * grid.dx
    if x0 - r < grid.x_lo - tol or x0 + r > grid.x_hi + tol:
        raise BallExceedsDomain(
            f"[{x0 - r:g}, {x0 + r:g}] not inside [{grid.x_lo:g}, {grid.x_hi:g}]")


def ball_row(grid: Grid, x0: float, r: float) -> np.ndarray:
    """Spatial mask of the open ball |x - x0| < r (no domain check)."""
    return np.abs(grid.x - x0) < r - SNAP * grid.dx


def ball(grid: Grid, x0: float, r: float, t_index: int) -> NodeSet:
    """Open ball ``B_r(x0)`` at slice ``t_index``."""
    _check_ball(grid, x0, r)
    mask = np.zeros(grid.shape, dtype=bool)
    mask[t_index] = ball_row(grid, x0, r)
    return NodeSet(grid, mask)


def region_slice(ball_set: NodeSet, partition: RegionPartition, j: int) -> NodeSet:
    """Intersection of a set with region ``j``."""
    return NodeSet(ball_set.grid, ball_set.mask & partition.region_mask(j), ball_set.spacetime)


def _restrict(mask: np.ndarray, partition: RegionPartition, j: RegionSpec) -> np.ndarray:
    return mask if j == "full" else mask & partition.region_mask(int(j))


def slice_range(grid: Grid, t0: float, span: float, direction: Direction) -> range:
    """Closed range of slice indices covering ``[t0 - span, t0]`` (or the future mirror)."""
    if span < 0:
        raise ValueError("time span must be non-negative")
    j0 = grid.slice_index(t0)
    m = int(np.floor(span / grid.dt + 0.5))
    lo, hi = (j0 - m, j0) if direction == "past" else (j0, j0 + m)
    end = t0 - span if direction == "past" else t0 + span
    if lo < 0 or hi > grid.nt - 1 or end < -SNAP * grid.dt or end > grid.t_hi + SNAP * grid.dt:
        raise CylinderExceedsDomain(
            f"time interval from {t0:g} spanning {span:g} ({direction}) leaves [0, {grid.t_hi:g}]")
    return range(lo, hi + 1)


def cylinder(grid: Grid, partition: RegionPartition, x0: float, t0: float, r: float,
             theta: float, h: float, direction: Direction = "past",
             j: RegionSpec = "full") -> NodeSet:
    """Union over ``t`` in ``[t0 - theta r^2 h, t0]`` of ``B_r^j(x0; t)`` (closed slice range)."""
    _check_ball(grid, x0, r)
    rows = slice_range(grid, t0, theta * r * r * h, direction)
    mask = np.zeros(grid.shape, dtype=bool)
    mask[rows.start:rows.stop] = ball_row(grid, x0, r)
    return NodeSet(grid, _restrict(mask, partition, j), spacetime=True)


def _dilated_row(grid: Grid, partition: RegionPartition, x0: float, r: float,
                 sigma1: float, j: RegionSpec, t_index: int) -> np.ndarray:
    if j == "full":
        return ball_row(grid, x0, r + sigma1) if sigma1 > 0 else ball_row(grid, x0, r)
    base = ball_row(grid, x0, r)
    own = base & (partition.label[t_index] == int(j))
    if sigma1 <= 0:
        return own
    near = np.abs(grid.x - x0) < sigma1 - SNAP * grid.dx
    return own | (base & ~own & near)


def enlarge(set_: NodeSet, sigma1: float, sigma2: float, partition: RegionPartition,
            j: RegionSpec, x0: float, r: float, direction: Direction = "past") -> NodeSet:
    """Enlargement of a region-restricted ball or cylinder centred at ``x0`` with radius ``r``.

    In space every member slice gains the nodes of ``B_r(x0)`` outside region
    ``j`` that lie within ``sigma1`` of ``x0``; for ``j="full"`` the ball grows
    to radius ``r + sigma1``.  In time ``round(sigma2/dt)`` slices are appended
    at the far end (earlier for past sets, later for future ones), each holding
    the enlarged region ball at that time.
    """
    if sigma1 < 0 or sigma2 < 0:
        raise ValueError("enlargement parameters must be non-negative")
    grid = set_.grid
    if set_.is_empty:
        return set_
    if j == "full" and sigma1 > 0:
        try:
            _check_ball(grid, x0, r + sigma1)
        except BallExceedsDomain as exc:
            raise EnlargementExceedsDomain(str(exc)) from None
    rows = set_.slices
    extra = int(np.floor(sigma2 / grid.dt + 0.5))
    if direction == "past":
        new_rows = range(rows[0] - extra, rows[0])
    else:
        new_rows = range(rows[-1] + 1, rows[-1] + 1 + extra)
    if extra and (new_rows.start < 0 or new_rows.stop > grid.nt):
        raise EnlargementExceedsDomain(f"temporal extension by {sigma2:g} leaves [0, {grid.t_hi:g}]")
    mask = set_.mask.copy()
    if sigma1 > 0:
        for k in rows:
            mask[k] |= _dilated_row(grid, partition, x0, r, sigma1, j, k)
    for k in new_rows:
        mask[k] = _dilated_row(grid, partition, x0, r, sigma1, j, k)
    spacetime = set_.spacetime or extra > 0
    return NodeSet(grid, mask, spacetime)


def paraboloid_radii(grid: Grid, r: float) -> np.ndarray:
    """Radii ``dx, 2dx, ..., r`` used by the discrete paraboloid (``r`` always last)."""
    k = int(np.floor(r / grid.dx + SNAP))
    radii = grid.dx * np.arange(1, k + 1)
    if k == 0 or r - radii[-1] > SNAP * grid.dx:
        radii = np.append(radii, r)
    return radii


def paraboloid(grid: Grid, partition: RegionPartition, x0: float, t0: float, r: float,
               h: float, j: RegionSpec = "full", direction: Direction = "future") -> NodeSet:
    """Union over radii ``rho`` of ``B_rho^j(x0; t0 +- rho^2 h)``, nearest-slice rounding."""
    _check_ball(grid, x0, r)
    sign = 1.0 if direction == "future" else -1.0
    end = t0 + sign * r * r * h
    if end > grid.t_hi + SNAP * grid.dt or end < -SNAP * grid.dt:
        raise CylinderExceedsDomain(f"paraboloid reaches t={end:g} outside [0, {grid.t_hi:g}]")
    mask = np.zeros(grid.shape, dtype=bool)
    for rho in paraboloid_radii(grid, r):
        k = grid.slice_index(t0 + sign * rho * rho * h)
        mask[k] |= ball_row(grid, x0, rho)
    return NodeSet(grid, _restrict(mask, partition, j), spacetime=True)
