from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dglab.degiorgi import energy_sides, giusti_iterate, giusti_threshold, make_cutoff
from dglab.errors import DegenerateGap
from dglab.geometry import Grid, RegionPartition, cylinder, enlarge
from dglab.solver import ScalarField
from dglab.weights import WeightField

from conftest import heat_solution


def heat_cutoff(grid: Grid, xc=0.5, ri=0.1, ro=0.3, ti=0.05, to=0.02, t2=0.1):
    part = RegionPartition.trivial(grid)
    inner = cylinder(grid, part, xc, t2, ri, 1.0, (t2 - ti) / ri ** 2)
    outer = cylinder(grid, part, xc, t2, ro, 1.0, (t2 - to) / ro ** 2)
    return make_cutoff(grid, inner, outer)


# ------------------------------------------------------------ cutoffs

def test_cutoff_indicator_is_degenerate():
    g = Grid(0.0, 1.0, 0.1, 101, 101)
    box = cylinder(g, RegionPartition.trivial(g), 0.5, 0.1, 0.2, 1.0, 1.0)
    with pytest.raises(DegenerateGap):
        make_cutoff(g, box, box)


def test_cutoff_tent_slope():
    g = Grid(0.0, 1.0, 0.1, 201, 101)
    r = 0.1
    z = heat_cutoff(g, 0.5, r, 2 * r, 0.05, 0.05)
    assert z.grad_sup == pytest.approx(1 / r, abs=g.dx / r ** 2)
    assert z.check_invariants()


def test_cutoff_time_ramp_with_enlargement():
    g = Grid(-1.0, 1.0, 1.0, 201, 201)
    part = RegionPartition.trivial(g)
    r, rt, th, tht, h = 0.1, 0.2, 1.0, 2.0, 1.0
    inner = cylinder(g, part, 0.0, 0.9, r, th, h)
    outer = enlarge(cylinder(g, part, 0.0, 0.9, rt, tht, h), 0.0, 0.02, part, "full", 0.0, rt)
    z = make_cutoff(g, inner, outer)
    gap_t = tht * rt * rt * h + 0.02 - th * r * r * h
    assert z.zt_sup <= 1 / gap_t * (1 + g.dt / gap_t) + 1e-12
    assert z.zt_min >= 0 and z.check_invariants()


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 0.7), st.floats(0.03, 0.1), st.floats(0.02, 0.15), st.floats(0.0, 0.04))
def test_cutoff_invariants_hold(xc, ri, gap, tgap):
    g = Grid(0.0, 1.0, 0.1, 101, 101)
    ro = min(ri + gap, min(xc, 1 - xc) - 0.01)
    if ro - ri < 2 * g.dx:
        return
    z = heat_cutoff(g, xc, ri, ro, 0.05, 0.05 - tgap)
    assert z.check_invariants()
    assert z.grad_sup <= 1 / z.gap_x + 1e-9


# ------------------------------------------------------------ energy sides

def test_constant_field_below_level():
    g = Grid(0.0, 1.0, 0.1, 51, 51)
    u = ScalarField(g, np.full(g.shape, 0.7))
    w = WeightField.constant(RegionPartition.trivial(g), 1.0)
    for k in (0.7, 1.0):
        rep = energy_sides(u, w, heat_cutoff(g), k, 0.02, 0.1, "plus")
        assert rep.lhs_energy == rep.lhs_gradient == rep.rhs_t1 == 0.0
        assert rep.rhs_grad_zeta == rep.rhs_zeta_t == rep.rhs_zeta2 == 0.0
        assert rep.gamma_required == 0.0


def test_level_above_supremum_is_trivial(heat201):
    u, w = heat201
    rep = energy_sides(u, w, heat_cutoff(u.grid), 1.5, 0.02, 0.1, "plus")
    assert rep.rhs_k2 == 0.0 and rep.gamma_required == 0.0


def test_heat_gamma_is_grid_stable():
    gammas = []
    for n in (101, 201):
        u, w = heat_solution(n, n)
        rep = energy_sides(u, w, heat_cutoff(u.grid), 0.0, 0.02, 0.1, "plus")
        assert math.isfinite(rep.gamma_required) and rep.gamma_required > 0
        gammas.append(rep.gamma_required)
    assert abs(gammas[0] - gammas[1]) / gammas[1] < 0.1


def test_max_form_dominates(heat201):
    u, w = heat201
    rep = energy_sides(u, w, heat_cutoff(u.grid), 0.2, 0.02, 0.1, "minus")
    assert rep.gamma_required_max >= 0 and math.isfinite(rep.gamma_required_max)
    assert all(v >= 0 for _, v in rep.terms())


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.2, 0.9), st.floats(0.0, 0.3))
def test_plus_terms_decrease_in_level(k, dk):
    u, w = heat_solution(51, 51)
    z = heat_cutoff(u.grid)
    lo = energy_sides(u, w, z, k, 0.02, 0.1, "plus")
    hi = energy_sides(u, w, z, k + dk, 0.02, 0.1, "plus")
    for name in ("lhs_energy", "lhs_gradient", "rhs_t1", "rhs_grad_zeta", "rhs_zeta_t", "rhs_zeta2"):
        assert getattr(hi, name) <= getattr(lo, name) * (1 + 1e-12) + 1e-300


@settings(max_examples=20, deadline=None)
@given(st.floats(-3.0, 3.0), st.floats(-0.2, 0.5))
def test_gamma_translation_invariant_without_k2(m, k):
    u, w = heat_solution(51, 51)
    z = heat_cutoff(u.grid)
    a = energy_sides(u, w, z, k, 0.02, 0.1, "plus", include_k2=False)
    b = energy_sides(ScalarField(u.grid, u.values + m), w, z, k + m, 0.02, 0.1, "plus", include_k2=False)
    assert b.gamma_required == pytest.approx(a.gamma_required, rel=1e-8, abs=1e-12)


# ------------------------------------------------------------ iteration lemma

def test_giusti_zero_start():
    res = giusti_iterate(0.0, 1.0, 2.0, 1.0)
    assert res.converged and all(v == 0.0 for v in res.sequence)


def test_giusti_known_sequence():
    seq, converged, threshold = giusti_iterate(0.4, 1.0, 2.0, 1.0)
    assert threshold == 0.5
    assert seq[:4] == pytest.approx([0.4, 0.16, 0.0512, 0.01048576], rel=1e-12)
    assert converged


def test_giusti_divergence():
    res = giusti_iterate(1.5, 1.0, 2.0, 1.0)
    assert not res.converged
    finite = [v for v in res.sequence if math.isfinite(v)]
    assert res.overflow or finite[-1] > 1e100


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("b", [1.5, 2.0, 4.0])
def test_giusti_lattice_below_threshold(c, alpha, b):
    th = giusti_threshold(c, b, alpha)
    for frac in (0.5, 0.9, 0.99):
        assert giusti_iterate(frac * th, c, b, alpha).converged
    # at the threshold itself the orbit is th * b^(-h/alpha), an unstable one
    edge = giusti_iterate(th, c, b, alpha, max_h=6).sequence
    assert edge == pytest.approx([th * b ** (-h / alpha) for h in range(7)], rel=1e-9)


def test_giusti_rejects_bad_parameters():
    with pytest.raises(ValueError):
        giusti_iterate(0.1, 1.0, 1.0, 1.0)
