from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dglab.errors import BallExceedsDomain, CylinderExceedsDomain, InvalidPartition
from dglab.geometry import (INTERFACE, REGION_1, REGION_2, Grid, NodeSet, RegionPartition, ball,
                            cylinder, enlarge, paraboloid, region_slice)


def test_grid_spacings_and_nodes(grid201):
    g = grid201
    assert g.dx == pytest.approx(0.01)
    assert g.dt == pytest.approx(0.005)
    assert g.x[0] == -1.0 and g.x[-1] == pytest.approx(1.0)
    assert g.t[-1] == pytest.approx(1.0)
    assert g.shape == (201, 201)


def test_ball_counts_and_measure(grid201):
    b = ball(grid201, 0.0, 0.5, 10)
    assert 99 <= b.count <= 101
    assert abs(b.measure - 1.0) <= grid201.dx * (1 + 1e-9)
    assert list(b.slices) == [10]


def test_ball_half_spacing_is_the_nearest_node(grid201):
    b = ball(grid201, 0.123, grid201.dx / 2, 0)
    assert b.count == 1
    assert grid201.x[np.flatnonzero(b.mask[0])[0]] == pytest.approx(0.12)


def test_ball_outside_domain(grid201):
    with pytest.raises(BallExceedsDomain):
        ball(grid201, 0.9, 0.5, 0)


def test_region_slice_half_split(grid201):
    part = RegionPartition.from_line(grid201, 0.0, 0.0)
    left = region_slice(ball(grid201, 0.0, 0.5, 40), part, REGION_1)
    assert abs(left.measure - 0.5) <= grid201.dx * (1 + 1e-9)
    inside = region_slice(ball(grid201, -0.5, 0.3, 40), part, REGION_2)
    assert inside.is_empty and inside.measure == 0.0


def test_region_slice_moving_interface_enumeration(grid201):
    g = grid201
    part = RegionPartition.from_line(g, 1.0, -0.5)
    j = g.slice_index(0.5)
    got = region_slice(ball(g, 0.0, 0.3, j), part, REGION_1)
    want = np.zeros(g.shape, dtype=bool)
    want[j] = (np.abs(g.x) < 0.3 - 1e-12) & (g.x < -1e-12)
    assert np.array_equal(got.mask, want)


def test_partition_requires_both_regions():
    g = Grid(-1.0, 1.0, 1.0, 21, 11)
    with pytest.raises(InvalidPartition):
        RegionPartition.from_positions(g, np.full(g.nt, -1.0))


def test_cylinder_plain_box(grid201):
    g, r = grid201, 0.2
    c = cylinder(g, RegionPartition.trivial(g), 0.0, 0.5, r, 1.0, 1.0)
    cell_layer = 2 * r * g.dt + r * r * g.dx
    assert abs(c.measure - 2 * r * r * r) <= cell_layer
    assert c.count == c.mask.sum()


def test_cylinder_zero_waiting_time_is_one_slice(grid201):
    c = cylinder(grid201, RegionPartition.trivial(grid201), 0.0, 0.5, 0.2, 1.0, 0.0)
    assert len(c.slices) == 1


def test_cylinder_half_box(grid201):
    g, r, h = grid201, 0.2, 2.0
    part = RegionPartition.from_line(g, 0.0, 0.0)
    c = cylinder(g, part, 0.0, 0.5, r, 1.0, h, "past", REGION_1)
    assert abs(c.measure - r * r * r * h) <= r * g.dt + r * r * h * g.dx
    assert np.all(g.x[np.nonzero(c.mask)[1]] < 0)


def test_cylinder_outside_time_range(grid201):
    with pytest.raises(CylinderExceedsDomain):
        cylinder(grid201, RegionPartition.trivial(grid201), 0.0, 0.01, 0.2, 1.0, 1.0)


def test_enlarge_identity_and_grid_quantum(grid201):
    g = grid201
    part = RegionPartition.trivial(g)
    c = cylinder(g, part, 0.0, 0.5, 0.2, 1.0, 1.0)
    assert enlarge(c, 0.0, 0.0, part, "full", 0.0, 0.2) == c
    e = enlarge(c, g.dx, g.dt, part, "full", 0.0, 0.2)
    assert len(e.slices) == len(c.slices) + 1
    assert e.mask[c.slices[0]].sum() == c.mask[c.slices[0]].sum() + 2


def test_enlarge_across_interface_recovers_full_ball(grid201):
    g = grid201
    part = RegionPartition.from_line(g, 0.0, 0.0)
    j = 50
    half = region_slice(ball(g, 0.0, 0.3, j), part, REGION_1)
    full = enlarge(half, 0.3, 0.0, part, REGION_1, 0.0, 0.3)
    assert full == ball(g, 0.0, 0.3, j)


def test_paraboloid_degenerate_and_single_step(grid201):
    g = grid201
    part = RegionPartition.from_line(g, 0.0, 0.0)
    p = paraboloid(g, part, -0.3, 0.5, 0.2, 0.0, REGION_1)
    b = region_slice(ball(g, -0.3, 0.2, g.slice_index(0.5)), part, REGION_1)
    assert np.array_equal(p.mask, b.mask)
    one = paraboloid(g, part, 0.0, 0.5, g.dx, 1.0)
    assert len(one.slices) == 1


def test_paraboloid_matches_nested_loop():
    g = Grid(-1.0, 1.0, 1.0, 101, 201)
    x0, t0, r, h = 0.1, 0.3, 0.4, 1.0
    got = paraboloid(g, RegionPartition.trivial(g), x0, t0, r, h)
    want = np.zeros(g.shape, dtype=bool)
    rhos = [k * g.dx for k in range(1, int(round(r / g.dx)) + 1)]
    for rho in rhos:
        k = int(np.floor((t0 + rho * rho * h) / g.dt + 0.5))
        for i, x in enumerate(g.x):
            if abs(x - x0) < rho - 1e-9 * g.dx:
                want[k, i] = True
    assert np.array_equal(got.mask, want)


radius = st.floats(0.02, 0.45)


@settings(max_examples=60, deadline=None)
@given(radius, radius, st.floats(-0.5, 0.5))
def test_ball_monotone_in_radius(r1, r2, x0):
    g = Grid(-1.0, 1.0, 1.0, 101, 11)
    a, b = sorted((r1, r2))
    assert ball(g, x0, a, 3) <= ball(g, x0, b, 3)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.05, 0.3))
def test_cylinder_monotone_in_theta(th1, th2, r):
    g = Grid(-1.0, 1.0, 1.0, 101, 101)
    part = RegionPartition.from_line(g, 0.0, 0.0)
    a, b = sorted((th1, th2))
    assert cylinder(g, part, 0.0, 0.5, r, a, 2.0, "past", 1) <= cylinder(g, part, 0.0, 0.5, r, b, 2.0, "past", 1)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.2), st.floats(0, 0.2), st.floats(0, 0.05), st.floats(0, 0.05))
def test_enlarge_extensive_and_monotone(s1, s1b, s2, s2b):
    g = Grid(-1.0, 1.0, 1.0, 101, 101)
    part = RegionPartition.from_line(g, 0.5, -0.2)
    base = cylinder(g, part, 0.0, 0.5, 0.3, 1.0, 1.0, "past", 1)
    lo = enlarge(base, min(s1, s1b), min(s2, s2b), part, 1, 0.0, 0.3)
    hi = enlarge(base, max(s1, s1b), max(s2, s2b), part, 1, 0.0, 0.3)
    assert base <= lo <= hi


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.4, 0.4), st.floats(0.05, 0.5), st.integers(0, 100))
def test_region_split_is_a_disjoint_cover(x0, r, j):
    g = Grid(-1.0, 1.0, 1.0, 101, 101)
    part = RegionPartition.from_line(g, 0.8, -0.4)
    r = min(r, 1 - abs(x0))
    s = ball(g, x0, r, j)
    s1, s2 = region_slice(s, part, REGION_1), region_slice(s, part, REGION_2)
    gam = NodeSet(g, s.mask & (part.label == INTERFACE))
    assert (s1 | s2 | gam) == s
    assert s1.count + s2.count + gam.count == s.count
    assert s.measure == s.count * g.dx
