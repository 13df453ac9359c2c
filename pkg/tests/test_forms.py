"""Tests for one-form sampling, wedge traces and quadrature.

Oracles: closed-form integrals for the grids, FD differentiation of the
Jacobian for the Maurer-Cartan samples, and full permutation sums for both
wedge-trace shortcuts.
"""

import itertools
import math

import numpy as np
import pytest

from virbott.diffeo import (
    BumpProfile,
    CircleIsotopy,
    DiscDiffeo,
    RadialTwist,
    Rotation,
    alexander_extend,
    cutoff_make,
    disc_compose,
)
from virbott.errors import DimensionError, DomainError, NumericError, SupportError
from virbott.forms import (
    BallGrid,
    DiscGrid,
    MCFormSample,
    eta_closedness_residual,
    integrate_ball,
    integrate_disc,
    mc_components,
    mc_form,
    wedge_trace_2form,
    wedge_trace_cube,
)
from virbott.trigpoly import TrigPoly


# ----------------------------------------------------------------------
# grids and integration
# ----------------------------------------------------------------------

def test_grid_validation():
    with pytest.raises(DomainError):
        DiscGrid(3, 64)
    with pytest.raises(DomainError):
        DiscGrid(16, 4)
    with pytest.raises(DomainError):
        BallGrid(2, 16)
    with pytest.raises(DomainError):
        BallGrid(8, 16, L=0.5)


def test_disc_quadrature_reference_values():
    grid = DiscGrid(32, 64)
    assert abs(integrate_disc(lambda r, th: np.ones_like(r), grid)
               - math.pi) < 1e-12
    assert abs(integrate_disc(lambda r, th: r ** 2, grid)
               - math.pi / 2.0) < 1e-12
    assert abs(integrate_disc(lambda r, th: np.sin(th), grid)) < 1e-12


def test_disc_quadrature_order_independent():
    grid = DiscGrid(16, 32)
    rng = np.random.default_rng(0)
    vals = rng.standard_normal(grid.npts)
    ref = integrate_disc(vals, grid)
    perm = rng.permutation(grid.npts)
    shuffled = math.fsum((vals * grid.weights)[perm].tolist())
    assert shuffled == ref                     # fsum is exactly rounded


def test_ball_quadrature_box_volume():
    grid = BallGrid(6, 12, L=1.0)
    vol = integrate_ball(np.ones(grid.npts), grid)
    assert abs(vol - 4.0) < 1e-12              # 1 * (2L)^2 with L = 1


def test_ball_quadrature_separable_gaussian():
    grid = BallGrid(12, 48, L=1.25)
    s2 = 0.02

    def density(rho, x, y):
        return rho * (1 - rho) * np.exp(-(x ** 2 + y ** 2) / s2)

    got = integrate_ball(density, grid)
    want = (1.0 / 6.0) * (math.pi * s2)        # full-line Gaussian, tiny tails
    assert abs(got - want) < 1e-10


def test_ball_support_error():
    grid = BallGrid(6, 16, L=1.25)
    with pytest.raises(SupportError):
        integrate_ball(lambda rho, x, y: np.exp(-(x ** 2 + y ** 2)), grid)


def test_numeric_error_on_nan():
    grid = DiscGrid(8, 16)
    bad = np.ones(grid.npts)
    bad[3] = np.nan
    with pytest.raises(NumericError):
        integrate_disc(bad, grid)


# ----------------------------------------------------------------------
# Maurer-Cartan samples
# ----------------------------------------------------------------------

def sample_map():
    iso = CircleIsotopy(0, TrigPoly(0.1, [0.3], [0.2]))
    alex = alexander_extend(iso, cutoff_make(0.2, 0.1), t=0.8)
    twist = DiscDiffeo.from_link(RadialTwist(BumpProfile(0.3, 0.7, 0.6)))
    return disc_compose(alex, twist)


def test_mc_form_vanishes_for_isometries():
    for g in (DiscDiffeo.identity(), DiscDiffeo.from_link(Rotation(0.7))):
        s = mc_form(g, (0.4, 0.2))
        assert all(np.max(np.abs(c)) < 1e-14 for c in s.components)


def test_mc_form_matches_fd_of_jacobian():
    g = sample_map()
    pts = np.stack([np.array([0.45, 0.6, 0.3]), np.array([0.2, -0.3, 0.55])])
    jet = g.jet(pts)
    comps = mc_components(jet)
    h = 1e-5
    for b in range(2):
        shift = np.zeros((2, 1))
        shift[b, 0] = h
        Jp = g.jet(pts + shift).j
        Jm = g.jet(pts - shift).j
        Jp2 = g.jet(pts + 2 * shift).j
        Jm2 = g.jet(pts - 2 * shift).j
        dJ = (Jm2 - 8 * Jm + 8 * Jp - Jp2) / (12 * h)
        inv = np.linalg.inv(jet.j.transpose(2, 0, 1)).transpose(1, 2, 0)
        want = np.einsum("jln,lkn->jkn", inv, dJ)
        assert np.max(np.abs(comps[b] - want)) < 1e-9


def test_mc_form_composition_law():
    # theta(g o h) = J(h)^{-1} (theta(g) o h) J(h) + theta(h), pointwise
    g = sample_map()
    h = DiscDiffeo.from_link(RadialTwist(BumpProfile(0.35, 0.8, -0.5)))
    gh = disc_compose(g, h)
    pts = np.stack([np.array([0.5, 0.42, 0.61]), np.array([0.1, -0.35, 0.2])])
    jet_h = h.jet(pts)
    th_h = mc_components(jet_h)
    th_gh = mc_components(gh.jet(pts))
    th_g_at = mc_components(g.jet(h.apply(pts)))
    Jh = jet_h.j
    Jh_inv = np.linalg.inv(Jh.transpose(2, 0, 1)).transpose(1, 2, 0)
    for b in range(2):
        # d-direction b pulls back through J(h): theta_b(gh) =
        #   J(h)^{-1} [ sum_c theta_c(g)|_h (J h)_{cb} ] J(h) + theta_b(h)
        pulled = np.einsum("cjkn,cn->jkn", th_g_at, Jh[:, b])
        want = (np.einsum("jln,lkn,kmn->jmn", Jh_inv, pulled, Jh)
                + th_h[b])
        assert np.max(np.abs(th_gh[b] - want)) < 1e-10


def test_mc_sample_container_validation():
    with pytest.raises(DimensionError):
        MCFormSample((np.zeros((2, 2)), np.zeros((3, 3))))


# ----------------------------------------------------------------------
# wedge traces
# ----------------------------------------------------------------------

def random_sample_2(rng):
    return MCFormSample(tuple(rng.standard_normal((2, 2)) for _ in range(2)))


def random_sample_3(rng):
    return MCFormSample(tuple(rng.standard_normal((3, 3)) for _ in range(3)))


def test_wedge2_antisymmetry():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a = random_sample_2(rng)
        b = random_sample_2(rng)
        assert abs(wedge_trace_2form(a, b) + wedge_trace_2form(b, a)) < 1e-12


def test_wedge_cube_vs_permutation_oracle():
    rng = np.random.default_rng(9)
    for _ in range(20):
        a = random_sample_3(rng)
        comps = a.components
        total = 0.0
        for perm in itertools.permutations(range(3)):
            sign = 1 if perm in ((0, 1, 2), (1, 2, 0), (2, 0, 1)) else -1
            total += sign * np.trace(
                comps[perm[0]] @ comps[perm[1]] @ comps[perm[2]])
        assert abs(wedge_trace_cube(a) - total) < 1e-12


def test_wedge_dimension_errors():
    rng = np.random.default_rng(2)
    with pytest.raises(DimensionError):
        wedge_trace_cube(random_sample_2(rng))
    with pytest.raises(DimensionError):
        wedge_trace_2form(np.zeros((2, 2, 2, 4)), np.zeros((2, 2, 2, 5)))


# ----------------------------------------------------------------------
# closedness of the quartic trace
# ----------------------------------------------------------------------

def test_eta_closedness_tiny():
    assert eta_closedness_residual(2, samples=100, seed=0) < 1e-12
    assert eta_closedness_residual(3, samples=100, seed=1) < 1e-12


def test_eta_closedness_dimension_guard():
    with pytest.raises(DimensionError):
        eta_closedness_residual(4)
