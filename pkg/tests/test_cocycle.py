"""Tests for the group 2-cocycle, the Wess-Zumino term and its coboundary.

Oracles: the gamma pin comes from a disc-grid refinement ladder (n_r, n_theta
doubled twice; the two finest values agree to 6e-13); omega0 pins come from a
ball-grid ladder (56x144 reference).  Exact-zero cases (identity factors,
rotations, equal arguments) must come out exactly zero because the integrands
vanish pointwise.  Everything else asserts the algebraic identities the
extension construction lives on, at default grids with refinement decay.
"""

import concurrent.futures
import json
import math

import numpy as np
import pytest

from virbott.cocycle import (
    CheckResult,
    CocycleConfig,
    ExtElement,
    delta_g_residual,
    ext_mul,
    gamma,
    gamma_m,
    iota,
    omega0,
    phi_correction_integral,
    w_coboundary_residual,
    wz_term,
)
from virbott.diffeo import (
    AlexanderRadial,
    BallDiffeo,
    BumpProfile,
    CircleIsotopy,
    DiscDiffeo,
    Jet,
    PoweredCutoffProfile,
    RadialTwist,
    Rotation,
    ball_extend,
    cutoff_make,
    disc_compose,
    disc_invert,
)
from virbott.errors import (
    DomainError,
    NotBoundaryTrivialError,
    SupportError,
)
from virbott.forms import BallGrid, DiscGrid
from virbott.trigpoly import TrigPoly

# refined-ladder pin for gamma(ALEX, TW_SHARP) at c0 = 1 (see module docstring)
GAMMA_PIN = 11.96882803405974
# ball-ladder pin for omega0(TW1) with XI grading
OMEGA0_TW1_PIN = 0.191908622860

XI = cutoff_make(0.05, 0.05)
XI_B = cutoff_make(0.10, 0.10)

# gentle wide-window twists: quadrature-converged at the default ball grid
TW1 = DiscDiffeo.from_link(RadialTwist(BumpProfile(0.10, 0.90, 0.12)))
TW2 = DiscDiffeo.from_link(RadialTwist(BumpProfile(0.12, 0.88, -0.10)))
TW3 = DiscDiffeo.from_link(RadialTwist(BumpProfile(0.15, 0.85, 0.08)))
TW_SHARP = DiscDiffeo.from_link(RadialTwist(BumpProfile(0.25, 0.85, 0.8)))

ISO = CircleIsotopy(0, TrigPoly(0.0, [0.35, 0.0], [0.0, -0.15]))
ALEX = DiscDiffeo.from_link(AlexanderRadial(ISO, cutoff_make(0.2, 0.15), 1.0))
ROT = DiscDiffeo.from_link(Rotation(0.7))

CFG = CocycleConfig()
CFG_SMALL = CocycleConfig(1.0, DiscGrid(32, 96), BallGrid(10, 24))
CFG_BALL_REFINED = CocycleConfig(1.0, DiscGrid(96, 256), BallGrid(48, 128))


# ----------------------------------------------------------------------
# configuration and result records
# ----------------------------------------------------------------------

def test_config_defaults_and_refined():
    cfg = CocycleConfig()
    assert (cfg.disc_grid.n_r, cfg.disc_grid.n_theta) == (96, 256)
    assert (cfg.ball_grid.n_rho, cfg.ball_grid.n_plane) == (24, 64)
    ref = cfg.refined()
    assert (ref.disc_grid.n_r, ref.ball_grid.n_plane) == (192, 128)
    assert ref.c0 == cfg.c0
    with pytest.raises(DomainError):
        CocycleConfig(float("nan"))


def test_check_result_boundary_and_serialization():
    ok = CheckResult("x", "lhs = rhs", 1e-9, 1e-9)
    assert ok.passed                      # equality counts as a pass
    bad = CheckResult("x", "lhs = rhs", 2e-9, 1e-9, {"seed": 3})
    assert not bad.passed and "FAIL" in repr(bad)
    blob = json.dumps(bad.as_dict())
    assert json.loads(blob)["pass"] is False


# ----------------------------------------------------------------------
# gamma: pins, exact zeros, algebraic identities
# ----------------------------------------------------------------------

def test_gamma_refined_ladder_pin():
    assert abs(gamma(ALEX, TW_SHARP, CFG) - GAMMA_PIN) < 5e-9


def test_gamma_identity_factors_are_exactly_zero():
    eye = DiscDiffeo.identity()
    assert gamma_m(eye, ALEX, CFG_SMALL) == 0.0
    assert gamma_m(ALEX, eye, CFG_SMALL) == 0.0


def test_gamma_rotation_pair_is_exactly_zero():
    r1 = DiscDiffeo.from_link(Rotation(0.3))
    r2 = DiscDiffeo.from_link(Rotation(1.1))
    assert gamma(r1, r2, CFG_SMALL) == 0.0


def test_gamma_normalization_and_antisymmetry():
    g = disc_compose(ALEX, ROT)
    assert abs(gamma(g, disc_invert(g), CFG)) <= 1e-8
    anti = gamma(g, TW_SHARP, CFG) + gamma(disc_invert(TW_SHARP),
                                           disc_invert(g), CFG)
    assert abs(anti) <= 1e-8


@pytest.mark.parametrize("triple", [
    ("alex,tw,alex2"),
    ("chain,tw2,alex2"),
])
def test_gamma_two_cocycle_identity(triple):
    iso2 = CircleIsotopy(0, TrigPoly(0.0, [-0.2], [0.25]))
    alex2 = DiscDiffeo.from_link(AlexanderRadial(iso2, cutoff_make(0.2, 0.15),
                                                 0.8))
    a, b, c = {
        "alex,tw,alex2": (ALEX, TW_SHARP, alex2),
        "chain,tw2,alex2": (disc_compose(ALEX, ROT), TW2, alex2),
    }[triple]
    res = (gamma(a, b, CFG) + gamma(disc_compose(a, b), c, CFG)
           - gamma(b, c, CFG) - gamma(a, disc_compose(b, c), CFG))
    assert abs(res) <= 1e-7


def test_gamma_scales_linearly_in_c0():
    base = gamma(ALEX, TW1, CFG_SMALL)
    scaled = gamma(ALEX, TW1, CocycleConfig(2.5, CFG_SMALL.disc_grid,
                                            CFG_SMALL.ball_grid))
    assert abs(scaled - 2.5 * base) <= 1e-15 * max(1.0, abs(base))


def test_gamma_cache_is_deterministic_and_thread_safe():
    first = gamma_m(ALEX, TW1, CFG_SMALL)
    assert gamma_m(ALEX, TW1, CFG_SMALL) == first
    with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
        vals = list(pool.map(
            lambda _: gamma_m(ALEX, TW1, CFG_SMALL), range(16)))
    assert set(vals) == {first}


# ----------------------------------------------------------------------
# extension multiplication and the section iota
# ----------------------------------------------------------------------

def test_ext_mul_central_coordinate_law():
    e1 = ExtElement(ALEX, 0.25)
    e2 = ExtElement(TW1, -1.5)
    prod = ext_mul(e1, e2, CFG_SMALL)
    assert prod.a == 0.25 - 1.5 + gamma(ALEX, TW1, CFG_SMALL)
    assert len(prod.g.links) == len(ALEX.links) + len(TW1.links)


def test_ext_mul_is_associative():
    e1, e2, e3 = ExtElement(ALEX, 0.1), ExtElement(TW1, 0.2), \
        ExtElement(ROT, -0.3)
    left = ext_mul(ext_mul(e1, e2, CFG), e3, CFG)
    right = ext_mul(e1, ext_mul(e2, e3, CFG), CFG)
    assert abs(left.a - right.a) <= 1e-7


def test_iota_of_identity_is_zero():
    e = iota(DiscDiffeo.identity(), CFG_SMALL, xi=XI)
    assert e.a == 0.0


def test_iota_central_coordinate_is_c0_times_wz():
    cfg = CocycleConfig(1.7, CFG_SMALL.disc_grid, CFG_SMALL.ball_grid)
    e = iota(TW1, cfg, xi=XI)
    assert e.a == 1.7 * wz_term(ball_extend(TW1, XI), cfg)


def test_iota_is_a_homomorphism_on_gentle_pairs():
    prod = ext_mul(iota(TW1, CFG, xi=XI), iota(TW2, CFG, xi=XI), CFG)
    direct = iota(disc_compose(TW1, TW2), CFG, xi=XI)
    assert abs(prod.a - direct.a) <= 1e-5


def test_iota_rejects_non_boundary_trivial_elements():
    with pytest.raises(NotBoundaryTrivialError):
        iota(ROT, CFG_SMALL)
    with pytest.raises(NotBoundaryTrivialError):
        omega0(ALEX, CFG_SMALL)


# ----------------------------------------------------------------------
# the Wess-Zumino term
# ----------------------------------------------------------------------

def test_wz_of_identity_is_exactly_zero():
    assert wz_term(BallDiffeo.identity(), CFG_SMALL) == 0.0


def test_wz_rejects_disc_maps():
    with pytest.raises(DomainError):
        wz_term(TW1, CFG_SMALL)


class _LeakyBall(BallDiffeo):
    """Jet double with non-commuting curvature all the way to the box edge.

    Radius-preserving links always kill the cube on the flat tails, so the
    support guard needs a synthetic jet to be exercised at all.
    """

    def __init__(self):
        super().__init__([])

    def jet(self, pts3, plan=None):
        out = Jet.identity(pts3)
        out.h[0, 1, 0, :] = 1.0      # a_rho = E01
        out.h[1, 2, 1, :] = 1.0      # a_x   = E12
        out.h[2, 0, 2, :] = 1.0      # a_y   = E20
        return out


def test_wz_raises_when_integrand_reaches_the_box_edge():
    with pytest.raises(SupportError):
        wz_term(_LeakyBall(), CFG_SMALL)


def test_omega0_matches_ball_ladder_pin():
    assert abs(omega0(TW1, CFG, xi=XI) - OMEGA0_TW1_PIN) <= 2e-6


def test_wz_vanishes_on_boundary_trivial_layerings():
    # grading returns to zero at rho = 1, so the boundary layer is the
    # identity and W must vanish with it
    ball = ball_extend(TW_SHARP, cutoff_make(0.2, 0.15),
                       profile=BumpProfile(0.2, 0.8, 0.9))
    assert abs(wz_term(ball, CFG)) <= 1e-9


def test_wz_depends_only_on_the_boundary_value():
    w_a = wz_term(ball_extend(TW1, XI), CFG)
    w_b = wz_term(ball_extend(TW1, XI_B), CFG)
    w_c = wz_term(ball_extend(TW1, XI, profile=PoweredCutoffProfile(XI, 2)),
                  CFG)
    assert abs(w_a - w_b) <= 1e-6
    assert abs(w_a - w_c) <= 1e-6


# ----------------------------------------------------------------------
# coboundary identities
# ----------------------------------------------------------------------

def test_omega0_coboundary_equals_gamma_with_decay():
    def residual(cfg):
        return abs(omega0(disc_compose(TW1, TW2), cfg, xi=XI)
                   - omega0(TW1, cfg, xi=XI) - omega0(TW2, cfg, xi=XI)
                   - gamma(TW1, TW2, cfg))
    at_default = residual(CFG)
    assert at_default <= 1e-5
    assert residual(CFG_BALL_REFINED) <= at_default / 4.0


def test_delta_g_identity_conjugator_is_exactly_zero():
    assert delta_g_residual(DiscDiffeo.identity(), TW1, CFG_SMALL) == 0.0


def test_delta_g_rotation_conjugator():
    assert delta_g_residual(ROT, TW1, CFG) <= 1e-5


def test_delta_g_alexander_conjugator_with_decay():
    at_default = delta_g_residual(ALEX, TW1, CFG, xi=XI)
    assert at_default <= 1e-4
    assert delta_g_residual(ALEX, TW1, CFG_BALL_REFINED, xi=XI) \
        <= at_default / 4.0


def test_delta_g_rejects_non_boundary_trivial_h():
    with pytest.raises(NotBoundaryTrivialError):
        delta_g_residual(ROT, ALEX, CFG_SMALL)


def test_w_coboundary_against_identity_is_exactly_zero():
    ball = ball_extend(TW1, XI)
    assert w_coboundary_residual(ball, BallDiffeo.identity(),
                                 CFG_SMALL) == 0.0


def test_w_coboundary_identity_boundary_layer_specialization():
    # g's grading returns to zero at rho = 1: theta(g|_{S^2}) = 0 and the
    # surface term drops out
    g_inner = ball_extend(TW1, XI, profile=BumpProfile(0.10, 0.90, 1.0))
    h = ball_extend(TW2, XI)
    assert w_coboundary_residual(g_inner, h, CFG) <= 1e-5


def test_w_coboundary_generic_pair_with_decay():
    ba = ball_extend(TW1, XI)
    bb = ball_extend(TW2, XI)
    at_default = w_coboundary_residual(ba, bb, CFG)
    assert at_default <= 1e-4
    assert w_coboundary_residual(ba, bb, CFG_BALL_REFINED) \
        <= at_default / 4.0


# ----------------------------------------------------------------------
# the phi correction term
# ----------------------------------------------------------------------

class PerturbedNormal:
    """Test double whose boundary normal derivative is 1 + amp*B(r)*p(theta).

    Supplies only the ``normal_derivative_jet`` hook the phi integral
    consumes; the gradient is assembled from the polar chain rule.
    """

    def __init__(self, a, b, amp, c1, s1):
        self.bump = BumpProfile(a, b, 1.0)
        self.amp, self.c1, self.s1 = amp, c1, s1

    def normal_derivative_jet(self, pts):
        x, y = pts
        r = np.hypot(x, y)
        th = np.arctan2(y, x)
        bump, dbump = self.bump.value(r), self.bump.d1(r)
        ang = self.c1 * np.cos(th) + self.s1 * np.sin(th)
        dang = -self.c1 * np.sin(th) + self.s1 * np.cos(th)
        eta_r = self.amp * dbump * ang
        eta_th = self.amp * bump * dang
        with np.errstate(invalid="ignore", divide="ignore"):
            inv_r = np.where(r > 0, 1.0 / np.maximum(r, 1e-300), 0.0)
        c, s = np.cos(th), np.sin(th)
        return (1.0 + self.amp * bump * ang,
                c * eta_r - s * inv_r * eta_th,
                s * eta_r + c * inv_r * eta_th)


def test_phi_correction_layered_maps_give_exact_zero():
    ba = ball_extend(TW1, XI)
    bb = ball_extend(TW2, XI)
    assert phi_correction_integral(ba, bb, CFG_SMALL) == 0.0


def test_phi_correction_equal_arguments_give_exact_zero():
    png = PerturbedNormal(0.10, 0.90, 0.10, 1.0, 0.4)
    assert phi_correction_integral(png, png, CFG_SMALL) == 0.0


def test_phi_correction_stokes_vanishing_on_refined_grid():
    png = PerturbedNormal(0.10, 0.90, 0.10, 1.0, 0.4)
    pnh = PerturbedNormal(0.12, 0.88, -0.12, 0.3, -1.0)
    assert abs(phi_correction_integral(png, pnh, CFG_BALL_REFINED)) <= 1e-8


def test_phi_correction_rejects_non_positive_normal_derivative():
    folded = PerturbedNormal(0.10, 0.90, 1.4, 1.0, 0.0)
    png = PerturbedNormal(0.10, 0.90, 0.10, 1.0, 0.4)
    with pytest.raises(DomainError):
        phi_correction_integral(folded, png, CFG_SMALL)
