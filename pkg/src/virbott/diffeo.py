"""Diffeomorphisms of the circle, disc, sphere and ball used by the cocycle
construction.

The building blocks are:

* smooth cutoff functions flat at both ends of their window (``CutoffFn``);
* orientation-preserving circle maps given by a winding offset plus a
  trigonometric-polynomial periodic part (``CircleDiffeoLift``), with the
  straight-line isotopy to the identity (``CircleIsotopy``);
* disc diffeomorphisms assembled as chains of elementary links — rigid
  rotations, radial Alexander extensions of circle maps, compactly
  supported radial twists, and flow maps of vector fields;
* sphere maps (disc maps that are the identity near the boundary circle,
  extended by the identity across the chart); and
* layered ball maps (rho, p) -> (rho, m_{c(rho)}(p)) built from parametric
  planar maps driven by a radial profile.

Every elementary link carries an analytic polar 2-jet; chains compose jets
through the generic engine in ``_jets``.  A finite-difference plan (FD4)
provides an independent derivative path for cross-validation.
"""

from __future__ import annotations

import math

import numpy as np

from ._jets import (
    Jet,
    compose,
    det_batched,
    fd4_jacobian,
    polar_chart_jet,
)
from .errors import (
    ConvergenceError,
    DegenerateError,
    DomainError,
    NotBoundaryTrivialError,
    UnsupportedError,
)
from .trigpoly import TrigPoly, tp_derivative

_TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# cutoff functions and radial profiles
# ---------------------------------------------------------------------------

def _bump(x):
    """exp(-1/x) extended by 0 for x <= 0 (smooth, flat at 0)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    m = x > 1e-8          # below this the value underflows to exactly 0
    xm = x[m]
    out[m] = np.exp(-1.0 / xm)
    return out


def _bump_d1(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    m = x > 1e-8
    xm = x[m]
    out[m] = np.exp(-1.0 / xm) / (xm * xm)
    return out


def _bump_d2(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    m = x > 1e-8
    xm = x[m]
    out[m] = np.exp(-1.0 / xm) * (1.0 / xm ** 4 - 2.0 / xm ** 3)
    return out


class CutoffFn:
    """Smooth monotone cutoff from 0 to 1 over the window [eps1, 1 - eps2].

    xi(r) = b(x) / (b(x) + b(1-x)) with b(x) = exp(-1/x) and
    x = (r - eps1) / (1 - eps2 - eps1); xi vanishes identically (all
    derivatives) for r <= eps1 and equals 1 identically for r >= 1 - eps2
    (the flat-1 tail extends past r = 1 so maps stay defined on the whole
    chart plane).
    """

    __slots__ = ("eps1", "eps2", "_len")

    def __init__(self, eps1: float, eps2: float):
        if not (0.0 < eps1 and 0.0 < eps2 and eps1 < 1.0 - eps2):
            raise DomainError(
                f"cutoff window invalid: eps1={eps1}, eps2={eps2} "
                "(need 0 < eps1 < 1 - eps2)")
        self.eps1 = float(eps1)
        self.eps2 = float(eps2)
        self._len = 1.0 - eps2 - eps1

    def _x(self, r):
        return (np.asarray(r, dtype=np.float64) - self.eps1) / self._len

    def value(self, r):
        x = np.clip(self._x(r), 0.0, 1.0)
        s = _bump(x)
        t = _bump(1.0 - x)
        return s / (s + t + (s + t == 0.0))   # 0/1 tails give s+t=0 -> 0

    def d1(self, r):
        x = self._x(r)
        inside = (x > 0.0) & (x < 1.0)
        out = np.zeros_like(np.asarray(r, dtype=np.float64))
        xm = x[inside]
        s, t = _bump(xm), _bump(1.0 - xm)
        s1, t1 = _bump_d1(xm), -_bump_d1(1.0 - xm)
        D = s + t
        out[inside] = (s1 / D - s * (s1 + t1) / D ** 2) / self._len
        return out

    def d2(self, r):
        x = self._x(r)
        inside = (x > 0.0) & (x < 1.0)
        out = np.zeros_like(np.asarray(r, dtype=np.float64))
        xm = x[inside]
        s, t = _bump(xm), _bump(1.0 - xm)
        s1, t1 = _bump_d1(xm), -_bump_d1(1.0 - xm)
        s2, t2 = _bump_d2(xm), _bump_d2(1.0 - xm)
        D = s + t
        D1 = s1 + t1
        D2 = s2 + t2
        val = (s2 / D - 2.0 * s1 * D1 / D ** 2 - s * D2 / D ** 2
               + 2.0 * s * D1 ** 2 / D ** 3)
        out[inside] = val / self._len ** 2
        return out

    __call__ = value

    def signature(self):
        return ("cutoff", self.eps1, self.eps2)


def cutoff_make(eps1: float, eps2: float) -> CutoffFn:
    """Validated constructor for :class:`CutoffFn` (raises DomainError)."""
    return CutoffFn(eps1, eps2)


class CutoffProfile:
    """Radial profile r -> xi(r); support [eps1, inf), boundary value 1."""

    __slots__ = ("cutoff",)

    def __init__(self, cutoff: CutoffFn):
        self.cutoff = cutoff

    @property
    def support(self):
        return (self.cutoff.eps1, np.inf)

    def value(self, r):
        return self.cutoff.value(r)

    def d1(self, r):
        return self.cutoff.d1(r)

    def d2(self, r):
        return self.cutoff.d2(r)

    def signature(self):
        return ("cutoff-profile",) + self.cutoff.signature()


class PoweredCutoffProfile:
    """xi(r)**k — an alternative extension profile with the same flat tails."""

    __slots__ = ("cutoff", "k")

    def __init__(self, cutoff: CutoffFn, k: int):
        if k < 1:
            raise DomainError("power must be >= 1")
        self.cutoff = cutoff
        self.k = int(k)

    @property
    def support(self):
        return (self.cutoff.eps1, np.inf)

    def value(self, r):
        return self.cutoff.value(r) ** self.k

    def d1(self, r):
        k = self.k
        v = self.cutoff.value(r)
        return k * v ** (k - 1) * self.cutoff.d1(r)

    def d2(self, r):
        k = self.k
        v = self.cutoff.value(r)
        d1 = self.cutoff.d1(r)
        d2 = self.cutoff.d2(r)
        if k == 1:
            return d2
        return k * (k - 1) * v ** (k - 2) * d1 ** 2 + k * v ** (k - 1) * d2


class SinePulseProfile:
    """amp * sin(pi * xi(r)) — rises from 0 and returns flat to ~0 at the
    boundary; drives isotopy loops whose endpoint is the identity."""

    __slots__ = ("cutoff", "amp")

    def __init__(self, cutoff: CutoffFn, amp: float):
        self.cutoff = cutoff
        self.amp = float(amp)

    @property
    def support(self):
        # sin(pi * xi) vanishes identically on both flat tails of xi.
        return (self.cutoff.eps1, 1.0 - self.cutoff.eps2)

    def value(self, r):
        return self.amp * np.sin(math.pi * self.cutoff.value(r))

    def d1(self, r):
        xi = self.cutoff.value(r)
        return self.amp * math.pi * np.cos(math.pi * xi) * self.cutoff.d1(r)

    def d2(self, r):
        xi = self.cutoff.value(r)
        x1 = self.cutoff.d1(r)
        x2 = self.cutoff.d2(r)
        return self.amp * math.pi * (
            -math.pi * np.sin(math.pi * xi) * x1 ** 2
            + np.cos(math.pi * xi) * x2)

    def signature(self):
        return ("sine-pulse", self.amp) + self.cutoff.signature()


class BumpProfile:
    """amp * exp(4/(b-a)^2 - 1/((r-a)(b-r))) on (a, b), 0 outside.

    Compactly supported in [a, b] and flat at both ends; peak value amp at
    the midpoint.
    """

    __slots__ = ("a", "b", "amp")

    def __init__(self, a: float, b: float, amp: float):
        if not (0.0 < a < b):
            raise DomainError(f"bump window invalid: [{a}, {b}]")
        self.a = float(a)
        self.b = float(b)
        self.amp = float(amp)

    @property
    def support(self):
        return (self.a, self.b)

    def _pieces(self, r):
        r = np.asarray(r, dtype=np.float64)
        q = (r - self.a) * (self.b - r)
        width = self.b - self.a
        inside = q > 1e-8 * width * width
        return r, q, inside

    def value(self, r):
        r, q, inside = self._pieces(r)
        out = np.zeros_like(r)
        out[inside] = self.amp * np.exp(
            4.0 / (self.b - self.a) ** 2 - 1.0 / q[inside])
        return out

    def d1(self, r):
        r, q, inside = self._pieces(r)
        out = np.zeros_like(r)
        qm = q[inside]
        q1 = self.a + self.b - 2.0 * r[inside]
        psi1 = q1 / qm ** 2
        out[inside] = self.value(r[inside]) * psi1
        return out

    def d2(self, r):
        r, q, inside = self._pieces(r)
        out = np.zeros_like(r)
        qm = q[inside]
        q1 = self.a + self.b - 2.0 * r[inside]
        # psi = -1/q:  psi' = q'/q^2,  psi'' = q''/q^2 - 2 q'^2/q^3, q'' = -2
        psi1 = q1 / qm ** 2
        psi2 = -2.0 / qm ** 2 - 2.0 * q1 ** 2 / qm ** 3
        v = self.value(r[inside])
        out[inside] = v * (psi1 ** 2 + psi2)
        return out

    def signature(self):
        return ("bump", self.a, self.b, self.amp)


# ---------------------------------------------------------------------------
# circle maps
# ---------------------------------------------------------------------------

_ORIENT_SAMPLES = np.linspace(0.0, _TWO_PI, 512, endpoint=False)


class CircleDiffeoLift:
    """Lift of an orientation-preserving circle diffeomorphism.

    f(theta) = theta + 2 pi k + p(theta) with p a trigonometric polynomial;
    orientation demands 1 + p'(theta) > 0, checked on 512 samples at
    construction.
    """

    __slots__ = ("winding_offset", "periodic_part", "_dp", "_ddp")

    def __init__(self, winding_offset: int, periodic_part: TrigPoly):
        if periodic_part.is_complex:
            raise DomainError("circle map data must be real")
        dp = tp_derivative(periodic_part)
        if np.min(1.0 + dp(_ORIENT_SAMPLES)) <= 0.0:
            raise DomainError("circle map is not orientation-preserving "
                              "(1 + p' <= 0 somewhere)")
        self.winding_offset = int(winding_offset)
        self.periodic_part = periodic_part
        self._dp = dp
        self._ddp = tp_derivative(dp)

    @classmethod
    def identity(cls):
        return cls(0, TrigPoly.zero())

    def value(self, theta):
        return theta + _TWO_PI * self.winding_offset + self.periodic_part(theta)

    __call__ = value

    def d1(self, theta):
        return 1.0 + self._dp(theta)

    def d2(self, theta):
        return self._ddp(theta)

    def signature(self):
        return ("circle-lift", self.winding_offset,
                self.periodic_part.signature())


def circle_invert(lift: CircleDiffeoLift, theta, tol: float = 1e-12,
                  max_iter: int = 200):
    """Solve f(x) = theta for the lift f, vectorized.

    Bisection brackets the root (f(x) - x is bounded), then Newton refines;
    raises ConvergenceError if |f(x) - theta| > tol after ``max_iter`` total
    iterations.
    """
    theta = np.asarray(theta, dtype=np.float64)
    scalar = theta.ndim == 0
    t = np.atleast_1d(theta).astype(np.float64)
    p = lift.periodic_part
    bound = abs(p.constant) + float(np.sum(np.abs(p.cos_coeffs))
                                    + np.sum(np.abs(p.sin_coeffs))) + 1.0
    shift = _TWO_PI * lift.winding_offset
    lo = t - shift - bound
    hi = t - shift + bound
    it = 0
    for _ in range(60):                     # bisection: bracket to ~1e-18 rel
        it += 1
        mid = 0.5 * (lo + hi)
        high = lift.value(mid) > t
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
        if it >= max_iter:
            break
    x = 0.5 * (lo + hi)
    for _ in range(max_iter - it):
        res = lift.value(x) - t
        if np.max(np.abs(res)) <= tol:
            break
        x = x - res / lift.d1(x)
    res = lift.value(x) - t
    if np.max(np.abs(res)) > tol:
        raise ConvergenceError(
            f"circle inversion stalled at residual {np.max(np.abs(res)):.3e}")
    return float(x[0]) if scalar else x


class CircleIsotopy:
    """Straight-line isotopy s -> (theta + s (2 pi k + p(theta))).

    path(0) is the identity, path(1) the target lift; every intermediate map
    is orientation-preserving whenever the target is (the derivative is
    affine in s).
    """

    __slots__ = ("winding_offset", "periodic_part")

    def __init__(self, winding_offset: int, periodic_part: TrigPoly):
        CircleDiffeoLift(winding_offset, periodic_part)   # validates
        self.winding_offset = int(winding_offset)
        self.periodic_part = periodic_part

    def path(self, s: float) -> CircleDiffeoLift:
        p = self.periodic_part
        scaled = TrigPoly(s * p.constant + _TWO_PI * self.winding_offset * s,
                          s * np.asarray(p.cos_coeffs),
                          s * np.asarray(p.sin_coeffs),
                          max_harmonic=p.max_harmonic)
        return CircleDiffeoLift(0, scaled)

    def displacement_poly(self) -> TrigPoly:
        """2 pi k + p(theta) as a single TrigPoly (the isotopy velocity)."""
        p = self.periodic_part
        return TrigPoly(p.constant + _TWO_PI * self.winding_offset,
                        p.cos_coeffs, p.sin_coeffs,
                        max_harmonic=p.max_harmonic)

    def signature(self):
        return ("circle-isotopy", self.winding_offset,
                self.periodic_part.signature())


# ---------------------------------------------------------------------------
# derivative plans
# ---------------------------------------------------------------------------

class DerivativePlan:
    """How chain derivatives are produced: exact jets or FD4 stencils."""

    __slots__ = ("kind", "fd_rel_step")

    def __init__(self, kind: str, fd_rel_step: float = 1e-4):
        if kind not in ("analytic", "fd4"):
            raise DomainError(f"unknown derivative plan {kind!r}")
        self.kind = kind
        self.fd_rel_step = float(fd_rel_step)

    def signature(self):
        return ("plan", self.kind, self.fd_rel_step)

    def __repr__(self):
        return f"DerivativePlan({self.kind!r}, fd_rel_step={self.fd_rel_step})"


ANALYTIC = DerivativePlan("analytic")
FD4 = DerivativePlan("fd4")


def plan_from_name(name: str) -> DerivativePlan:
    return DerivativePlan(name.lower())


# ---------------------------------------------------------------------------
# angular displacement fields A(r, theta)
# ---------------------------------------------------------------------------

class AngleDisplacement:
    """A(r, theta) = sum_k profile_k(r) poly_k(theta) with exact polar jets."""

    __slots__ = ("terms", "support_min")

    def __init__(self, terms):
        self.terms = tuple((prof, poly, tp_derivative(poly),
                            tp_derivative(tp_derivative(poly)))
                           for prof, poly in terms)
        self.support_min = min((prof.support[0] for prof, *_ in self.terms),
                               default=np.inf)

    def value(self, r, th):
        out = np.zeros(np.broadcast(r, th).shape)
        for prof, poly, _, _ in self.terms:
            out = out + prof.value(r) * poly(th)
        return out

    def jets(self, r, th):
        """Return (A, A_r, A_th, A_rr, A_rth, A_thth), each shaped like r."""
        shape = np.broadcast(r, th).shape
        A = np.zeros(shape)
        Ar = np.zeros(shape)
        At = np.zeros(shape)
        Arr = np.zeros(shape)
        Art = np.zeros(shape)
        Att = np.zeros(shape)
        for prof, poly, dpoly, ddpoly in self.terms:
            f0, f1, f2 = prof.value(r), prof.d1(r), prof.d2(r)
            g0, g1, g2 = poly(th), dpoly(th), ddpoly(th)
            A += f0 * g0
            Ar += f1 * g0
            At += f0 * g1
            Arr += f2 * g0
            Art += f1 * g1
            Att += f0 * g2
        return A, Ar, At, Arr, Art, Att

    def radial_envelope(self, r):
        """Pointwise bound sum_k |profile_k(r)| * ||poly_k||_1; exactly zero
        wherever every term's profile vanishes identically, so it doubles as
        an exact identity mask for the link."""
        out = np.zeros_like(np.asarray(r, dtype=np.float64))
        for prof, poly, _, _ in self.terms:
            bound = abs(poly.constant) + float(
                np.sum(np.abs(poly.cos_coeffs)) + np.sum(np.abs(poly.sin_coeffs)))
            out += np.abs(prof.value(r)) * bound
        return out

    def scaled(self, c: float) -> "AngleDisplacement":
        return AngleDisplacement([(prof, c * poly)
                                  for prof, poly, _, _ in self.terms])

    def signature(self):
        return ("displacement",) + tuple(
            (prof.signature(), poly.signature())
            for prof, poly, _, _ in self.terms)


def _phi_output_jet(r, phi, dphi, d2phi, ir):
    """Jet of (X, Y) = (r cos phi, r sin phi) in m variables.

    ``dphi`` is a list of m first partials of phi, ``d2phi`` an m x m nested
    list of second partials; variable number ``ir`` is r itself (so dr/dv is
    the Kronecker delta on ir).
    """
    m = len(dphi)
    n = r.shape[0]
    c = np.cos(phi)
    s = np.sin(phi)
    X = r * c
    Y = r * s
    j = np.empty((2, m, n))
    for v in range(m):
        rv = 1.0 if v == ir else 0.0
        j[0, v] = rv * c - r * s * dphi[v]
        j[1, v] = rv * s + r * c * dphi[v]
    h = np.empty((2, m, m, n))
    for v in range(m):
        rv = 1.0 if v == ir else 0.0
        for w in range(v, m):
            rw = 1.0 if w == ir else 0.0
            pv, pw, pvw = dphi[v], dphi[w], d2phi[v][w]
            h[0, v, w] = (-rv * s * pw - rw * s * pv
                          - r * c * pv * pw - r * s * pvw)
            h[1, v, w] = (rv * c * pw + rw * c * pv
                          - r * s * pv * pw + r * c * pvw)
            h[0, w, v] = h[0, v, w]
            h[1, w, v] = h[1, v, w]
    return Jet(np.stack([X, Y]), j, h)


def _invert_angle_jets(fwd_jets, psi):
    """Second-order inverse-function data for theta -> theta + A(r, theta).

    Given the forward map Phi(r, theta) = theta + A and the solved preimage
    angle psi (so Phi(r, psi) = t), return the 2-jet of psi as a function of
    (r, t).  ``fwd_jets`` are the displacement jets evaluated at (r, psi).
    """
    A, Ar, At, Arr, Art, Att = fwd_jets
    Pt = 1.0 + At            # dPhi/dtheta at (r, psi)
    Pr = Ar
    Prr, Prt, Ptt = Arr, Art, Att
    psi_t = 1.0 / Pt
    psi_r = -Pr / Pt
    psi_tt = -Ptt * psi_t ** 2 / Pt
    psi_rt = -(Prt + Ptt * psi_r) * psi_t / Pt
    psi_rr = -(Prr + 2.0 * Prt * psi_r + Ptt * psi_r ** 2) / Pt
    return psi_t, psi_r, psi_tt, psi_rt, psi_rr


_LINK_GUARD = 1e-9           # below this radius every angular link is identity


class _AngularLinkBase:
    """Shared machinery for radius-preserving links (r,th)->(r, th+A)."""

    displacement: AngleDisplacement

    def _check_orientation(self):
        rs = np.linspace(max(self.displacement.support_min, 1e-3), 1.2, 64)
        ths = np.linspace(0.0, _TWO_PI, 128, endpoint=False)
        R, T = np.meshgrid(rs, ths, indexing="ij")
        _, _, At, *_ = self.displacement.jets(R.ravel(), T.ravel())
        if np.min(1.0 + At) <= 0.0:
            raise DomainError("angular link is not orientation-preserving")

    def _active(self, r):
        """Exact mask of points the link can move (envelope nonzero)."""
        return (r >= _LINK_GUARD) & (self.displacement.radial_envelope(r) != 0.0)

    def apply(self, pts):
        x, y = pts
        r = np.hypot(x, y)
        m = self._active(r)
        out = pts.copy()
        if np.any(m):
            th = np.arctan2(y[m], x[m])
            phi = th + self.displacement.value(r[m], th)
            out[0, m] = r[m] * np.cos(phi)
            out[1, m] = r[m] * np.sin(phi)
        return out

    def jet(self, pts) -> Jet:
        x, y = pts
        r = np.hypot(x, y)
        m = self._active(r)
        out = Jet.identity(pts)
        if np.any(m):
            sub = pts[:, m]
            chart = polar_chart_jet(sub[0], sub[1])
            rm, thm = chart.x
            A, Ar, At, Arr, Art, Att = self.displacement.jets(rm, thm)
            phi = thm + A
            dphi = [Ar, 1.0 + At]
            d2phi = [[Arr, Art], [Art, Att]]
            polar_out = _phi_output_jet(rm, phi, dphi, d2phi, ir=0)
            full = compose(polar_out, chart)
            out.x[:, m] = full.x
            out.j[:, :, m] = full.j
            out.h[:, :, :, m] = full.h
        return out

    def param_map(self):
        return ParamAngular(self.displacement)


class AlexanderRadial(_AngularLinkBase):
    """Radial (Alexander-style) extension of a circle isotopy over the disc.

    (r, theta) -> (r, theta + t * xi(r) * (2 pi k + p(theta)));  agrees with
    ``isotopy.path(t)`` on the boundary annulus where xi = 1 and with the
    identity below the cutoff window.
    """

    __slots__ = ("isotopy", "cutoff", "t", "displacement")

    def __init__(self, isotopy: CircleIsotopy, cutoff: CutoffFn, t: float = 1.0):
        self.isotopy = isotopy
        self.cutoff = cutoff
        self.t = float(t)
        disp = isotopy.displacement_poly() * float(t)
        self.displacement = AngleDisplacement([(CutoffProfile(cutoff), disp)])
        self._check_orientation()

    def inverse_link(self):
        return InverseAngular(self.displacement, self.signature())

    def signature(self):
        return ("alexander", self.isotopy.signature(),
                self.cutoff.signature(), self.t)


class RadialTwist(_AngularLinkBase):
    """Compactly supported rotation by a radial angle: (r,th)->(r, th+tau(r)).

    The twist profile must be supported in a closed subinterval of (0, 1),
    so the link is a boundary-trivial (sphere-type) diffeomorphism.
    """

    __slots__ = ("profile", "displacement")

    def __init__(self, profile):
        lo, hi = profile.support
        if not (0.0 < lo and hi < 1.0):
            raise DomainError("twist profile must be supported inside (0, 1)")
        self.profile = profile
        self.displacement = AngleDisplacement([(profile, TrigPoly(1.0))])
        # tau depends on r only; orientation is automatic

    def inverse_link(self):
        return InverseAngular(self.displacement, self.signature())

    def signature(self):
        return ("twist", self.profile.signature())


class InverseAngular(_AngularLinkBase):
    """Inverse of a radius-preserving angular link, solved per point."""

    __slots__ = ("displacement", "_fwd_sig")

    def __init__(self, fwd_displacement: AngleDisplacement, fwd_sig):
        self.displacement = fwd_displacement
        self._fwd_sig = fwd_sig

    def _solve(self, r, t, tol=1e-12, max_iter=200):
        """Solve psi + A(r, psi) = t, vectorized bisection + Newton."""
        disp = self.displacement
        bound = 0.0
        for _, poly, _, _ in disp.terms:
            bound += abs(poly.constant) + float(
                np.sum(np.abs(poly.cos_coeffs)) + np.sum(np.abs(poly.sin_coeffs)))
        bound = bound + 1.0
        lo = t - bound
        hi = t + bound
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            high = mid + disp.value(r, mid) > t
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
        psi = 0.5 * (lo + hi)
        for _ in range(max_iter - 60):
            res = psi + disp.value(r, psi) - t
            if np.max(np.abs(res)) <= tol:
                break
            _, _, At, *_ = disp.jets(r, psi)
            psi = psi - res / (1.0 + At)
        res = psi + disp.value(r, psi) - t
        if np.max(np.abs(res)) > tol:
            raise ConvergenceError(
                f"angle inversion stalled at residual {np.max(np.abs(res)):.3e}")
        return psi

    def apply(self, pts):
        x, y = pts
        r = np.hypot(x, y)
        m = self._active(r)
        out = pts.copy()
        if np.any(m):
            t = np.arctan2(y[m], x[m])
            psi = self._solve(r[m], t)
            out[0, m] = r[m] * np.cos(psi)
            out[1, m] = r[m] * np.sin(psi)
        return out

    def jet(self, pts) -> Jet:
        x, y = pts
        r = np.hypot(x, y)
        m = self._active(r)
        out = Jet.identity(pts)
        if np.any(m):
            sub = pts[:, m]
            chart = polar_chart_jet(sub[0], sub[1])
            rm, tm = chart.x
            psi = self._solve(rm, tm)
            fwd = self.displacement.jets(rm, psi)
            psi_t, psi_r, psi_tt, psi_rt, psi_rr = _invert_angle_jets(fwd, psi)
            dphi = [psi_r, psi_t]
            d2phi = [[psi_rr, psi_rt], [psi_rt, psi_tt]]
            polar_out = _phi_output_jet(rm, psi, dphi, d2phi, ir=0)
            full = compose(polar_out, chart)
            out.x[:, m] = full.x
            out.j[:, :, m] = full.j
            out.h[:, :, :, m] = full.h
        return out

    def inverse_link(self):
        return _DisplacementLink(self.displacement)

    def param_map(self):
        return ParamFrozen(self)

    def signature(self):
        return ("inverse-angular", self._fwd_sig)


class Rotation:
    """Rigid rotation of the plane by alpha (exact jets everywhere)."""

    __slots__ = ("alpha",)

    def __init__(self, alpha: float):
        self.alpha = float(alpha)

    def _matrix(self):
        c, s = math.cos(self.alpha), math.sin(self.alpha)
        return np.array([[c, -s], [s, c]])

    def apply(self, pts):
        return self._matrix() @ pts

    def jet(self, pts) -> Jet:
        R = self._matrix()
        n = pts.shape[1]
        j = np.repeat(R[:, :, None], n, axis=2)
        return Jet(R @ pts, j, np.zeros((2, 2, 2, n)))

    def inverse_link(self):
        return Rotation(-self.alpha)

    def param_map(self):
        return ParamRotation(self.alpha)

    def signature(self):
        return ("rotation", self.alpha)


class FlowMap:
    """Time-T flow of a planar vector field, integrated by classical RK4.

    The field object must provide ``cartesian_value(pts)`` and, for the
    analytic jet path, ``cartesian_jet2(pts) -> (V, DV, D2V)``; first and
    second variational equations are integrated alongside the base point.
    """

    __slots__ = ("field", "time", "steps")

    def __init__(self, field, time: float, steps: int = 64):
        if steps < 1:
            raise DomainError("flow needs at least one step")
        self.field = field
        self.time = float(time)
        self.steps = int(steps)

    def time_reversed(self):
        return FlowMap(self.field, -self.time, self.steps)

    def apply(self, pts):
        x = pts.astype(np.float64).copy()
        dt = self.time / self.steps
        for _ in range(self.steps):
            k1 = self.field.cartesian_value(x)
            k2 = self.field.cartesian_value(x + 0.5 * dt * k1)
            k3 = self.field.cartesian_value(x + 0.5 * dt * k2)
            k4 = self.field.cartesian_value(x + dt * k3)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return x

    def _rhs(self, state):
        x, J, H = state
        V, DV, D2V = self.field.cartesian_jet2(x)
        dJ = np.einsum("ikn,kan->ian", DV, J)
        dH = (np.einsum("ikln,kan,lbn->iabn", D2V, J, J)
              + np.einsum("ikn,kabn->iabn", DV, H))
        return V, dJ, dH

    def jet(self, pts) -> Jet:
        n = pts.shape[1]
        x = pts.astype(np.float64).copy()
        J = np.zeros((2, 2, n))
        J[0, 0] = J[1, 1] = 1.0
        H = np.zeros((2, 2, 2, n))
        dt = self.time / self.steps
        state = (x, J, H)
        for _ in range(self.steps):
            k1 = self._rhs(state)
            s2 = tuple(a + 0.5 * dt * b for a, b in zip(state, k1))
            k2 = self._rhs(s2)
            s3 = tuple(a + 0.5 * dt * b for a, b in zip(state, k2))
            k3 = self._rhs(s3)
            s4 = tuple(a + dt * b for a, b in zip(state, k3))
            k4 = self._rhs(s4)
            state = tuple(a + (dt / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
                          for a, b1, b2, b3, b4 in zip(state, k1, k2, k3, k4))
        x, J, H = state
        return Jet(x, J, H)

    def inverse_link(self):
        raise UnsupportedError("flow links have no closed-form inverse; "
                               "use time_reversed() where a numerical inverse "
                               "is acceptable")

    def param_map(self):
        return None

    def signature(self):
        return ("flow", self.field.signature(), self.time, self.steps)


# ---------------------------------------------------------------------------
# disc diffeomorphisms (chains)
# ---------------------------------------------------------------------------

class DiscDiffeo:
    """A diffeomorphism of the disc/plane as a chain of elementary links,
    applied left to right: chain [m1, m2] sends p to m2(m1(p))."""

    __slots__ = ("links",)

    def __init__(self, links=()):
        self.links = tuple(links)

    @classmethod
    def identity(cls):
        return cls(())

    @classmethod
    def from_link(cls, link):
        return cls((link,))

    def apply(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        for link in self.links:
            pts = link.apply(pts)
        return pts

    def jet(self, pts, plan: DerivativePlan = ANALYTIC) -> Jet:
        pts = np.asarray(pts, dtype=np.float64)
        if plan.kind == "analytic":
            current = Jet.identity(pts)
            for link in self.links:
                current = compose(link.jet(current.x), current)
            return current
        step = plan.fd_rel_step
        J = fd4_jacobian(self.apply, pts, step)

        def jfn(q):
            return fd4_jacobian(self.apply, q, step).reshape(4, -1)

        Hflat = fd4_jacobian(jfn, pts, step)          # (4, 2, N)
        H = Hflat.reshape(2, 2, 2, pts.shape[1])
        H = 0.5 * (H + H.transpose(0, 2, 1, 3))       # symmetrize FD noise
        return Jet(self.apply(pts), J, H)

    def signature(self):
        return ("disc-chain",) + tuple(l.signature() for l in self.links)


def disc_compose(g: DiscDiffeo, h: DiscDiffeo) -> DiscDiffeo:
    """(g o h)(p) = g(h(p)): h's links run first."""
    return DiscDiffeo(h.links + g.links)


def disc_invert(g: DiscDiffeo) -> DiscDiffeo:
    """Inverse chain (reversed inverse links); UnsupportedError on flows."""
    return DiscDiffeo(tuple(link.inverse_link() for link in reversed(g.links)))


def disc_jacobian(g: DiscDiffeo, pts, plan: DerivativePlan = ANALYTIC):
    """Jacobian stack (2, 2, N); DegenerateError if any det <= 0."""
    pts = np.asarray(pts, dtype=np.float64)
    single = pts.ndim == 1
    if single:
        pts = pts[:, None]
    J = g.jet(pts, plan).j
    det = det_batched(J)
    if np.any(det <= 0.0) or np.any(~np.isfinite(det)):
        raise DegenerateError(
            f"Jacobian not orientation-preserving (min det {np.min(det):.3e})")
    return J[:, :, 0] if single else J


_BT_ANGLES = np.linspace(0.0, _TWO_PI, 256, endpoint=False)


def is_boundary_trivial(g: DiscDiffeo, eps: float, tol: float = 1e-12) -> bool:
    """Is g the identity (to ``tol``) on the annulus radii 1-eps/2, 1-eps/4?"""
    for r in (1.0 - eps / 2.0, 1.0 - eps / 4.0):
        pts = np.stack([r * np.cos(_BT_ANGLES), r * np.sin(_BT_ANGLES)])
        if np.max(np.abs(g.apply(pts) - pts)) > tol:
            return False
    return True


class SphereDiffeo:
    """A sphere diffeomorphism presented in the disc chart: a disc chain that
    is the identity near the boundary circle, extended by the identity."""

    __slots__ = ("disc", "eps")

    def __init__(self, disc: DiscDiffeo, eps: float):
        self.disc = disc
        self.eps = float(eps)

    def apply(self, pts):
        return self.disc.apply(pts)

    def jet(self, pts, plan: DerivativePlan = ANALYTIC):
        return self.disc.jet(pts, plan)

    def signature(self):
        return ("sphere",) + self.disc.signature()


def sphere_extend(h: DiscDiffeo, eps: float = 0.1) -> SphereDiffeo:
    """Wrap a boundary-trivial disc chain as a sphere map.

    Raises NotBoundaryTrivialError when h fails the identity check near the
    boundary circle.
    """
    if not is_boundary_trivial(h, eps):
        raise NotBoundaryTrivialError(
            "disc map is not the identity near the boundary circle")
    return SphereDiffeo(h, eps)


def alexander_extend(isotopy: CircleIsotopy, cutoff: CutoffFn,
                     t: float = 1.0) -> DiscDiffeo:
    """Disc extension of a circle isotopy by the cutoff-graded Alexander
    construction; the boundary annulus carries isotopy.path(t)."""
    return DiscDiffeo.from_link(AlexanderRadial(isotopy, cutoff, t))


# ---------------------------------------------------------------------------
# parametric planar maps and layered ball diffeomorphisms
# ---------------------------------------------------------------------------

class ParamRotation:
    """u -> rotation by u * alpha."""

    __slots__ = ("alpha",)

    def __init__(self, alpha: float):
        self.alpha = float(alpha)

    def apply(self, u, pts):
        phi = u * self.alpha
        c, s = np.cos(phi), np.sin(phi)
        x, y = pts
        return np.stack([c * x - s * y, s * x + c * y])

    def jet_uxy(self, u, pts) -> Jet:
        a = self.alpha
        phi = u * a
        c, s = np.cos(phi), np.sin(phi)
        x, y = pts
        n = pts.shape[1]
        val = np.stack([c * x - s * y, s * x + c * y])
        # d/du rotates by 90 degrees and scales by alpha
        du = a * np.stack([-s * x - c * y, c * x - s * y])
        j = np.empty((2, 3, n))
        j[:, 0] = du
        j[0, 1], j[0, 2] = c, -s
        j[1, 1], j[1, 2] = s, c
        h = np.zeros((2, 3, 3, n))
        h[:, 0, 0] = -a * a * val
        h[0, 0, 1] = h[0, 1, 0] = -a * s
        h[0, 0, 2] = h[0, 2, 0] = -a * c
        h[1, 0, 1] = h[1, 1, 0] = a * c
        h[1, 0, 2] = h[1, 2, 0] = -a * s
        return Jet(val, j, h)

    def boundary_link(self, u0: float):
        return Rotation(u0 * self.alpha)

    def iszero(self):
        return self.alpha == 0.0

    def signature(self):
        return ("param-rotation", self.alpha)


class ParamAngular:
    """u -> (r, theta) |-> (r, theta + u * A(r, theta))."""

    __slots__ = ("displacement",)

    def __init__(self, displacement: AngleDisplacement):
        self.displacement = displacement

    def apply(self, u, pts):
        x, y = pts
        r = np.hypot(x, y)
        env = self.displacement.radial_envelope(r)
        m = (r >= _LINK_GUARD) & ((env * np.abs(u)) != 0.0)
        out = pts.copy()
        if np.any(m):
            th = np.arctan2(y[m], x[m])
            um = u[m] if np.ndim(u) else u
            phi = th + um * self.displacement.value(r[m], th)
            out[0, m] = r[m] * np.cos(phi)
            out[1, m] = r[m] * np.sin(phi)
        return out

    def jet_uxy(self, u, pts) -> Jet:
        """Jet in (u, x, y); u is a per-point array."""
        x, y = pts
        r = np.hypot(x, y)
        n = pts.shape[1]
        # the u-derivative is A itself, so u = 0 points stay active; only
        # envelope-zero points are exactly the identity in all three slots
        m = (r >= _LINK_GUARD) & (self.displacement.radial_envelope(r) != 0.0)
        # identity default
        val = pts.copy()
        j = np.zeros((2, 3, n))
        j[0, 1] = 1.0
        j[1, 2] = 1.0
        h = np.zeros((2, 3, 3, n))
        if np.any(m):
            sub = pts[:, m]
            um = u[m] if np.ndim(u) else np.full(int(m.sum()), float(u))
            chart = polar_chart_jet(sub[0], sub[1])        # (x,y)->(r,th)
            rm, tm = chart.x
            A, Ar, At, Arr, Art, Att = self.displacement.jets(rm, tm)
            phi = tm + um * A
            # phi as a function of (u, r, th)
            dphi = [A, um * Ar, 1.0 + um * At]
            d2phi = [[np.zeros_like(A), Ar, At],
                     [Ar, um * Arr, um * Art],
                     [At, um * Art, um * Att]]
            out3 = _phi_output_jet(rm, phi, dphi, d2phi, ir=1)
            # compose with (u, x, y) -> (u, r, th)
            inner_j = np.zeros((3, 3, int(m.sum())))
            inner_h = np.zeros((3, 3, 3, int(m.sum())))
            inner_j[0, 0] = 1.0
            inner_j[1:, 1:] = chart.j
            inner_h[1:, 1:, 1:] = chart.h
            inner = Jet(np.concatenate([um[None], chart.x]), inner_j, inner_h)
            full = compose(out3, inner)
            val[:, m] = full.x
            j[:, :, m] = full.j
            h[:, :, :, m] = full.h
        return Jet(val, j, h)

    def boundary_link(self, u0: float):
        return _DisplacementLink(self.displacement.scaled(u0))

    def iszero(self):
        return not self.displacement.terms

    def signature(self):
        return ("param-angular", self.displacement.signature())


class _DisplacementLink(_AngularLinkBase):
    """Plain angular link from a bare displacement (boundary restrictions)."""

    __slots__ = ("displacement",)

    def __init__(self, displacement: AngleDisplacement):
        self.displacement = displacement
        self._check_orientation()

    def inverse_link(self):
        return InverseAngular(self.displacement, self.signature())

    def signature(self):
        return ("displacement-link", self.displacement.signature())


class ParamFrozen:
    """A u-independent layer: wraps any planar link (conjugators)."""

    __slots__ = ("link",)

    def __init__(self, link):
        self.link = link

    def apply(self, u, pts):
        return self.link.apply(pts)

    def jet_uxy(self, u, pts) -> Jet:
        base = self.link.jet(pts)                      # (2-in, 2-out)
        n = pts.shape[1]
        j = np.zeros((2, 3, n))
        j[:, 1:] = base.j
        h = np.zeros((2, 3, 3, n))
        h[:, 1:, 1:] = base.h
        return Jet(base.x, j, h)

    def boundary_link(self, u0: float):
        return self.link

    def iszero(self):
        return False

    def signature(self):
        return ("param-frozen", self.link.signature())


class BallLayerLink:
    """(rho, x, y) -> (rho, P(c(rho), x, y)) for a radial profile c and a
    parametric planar map P; the first output row is always rho itself."""

    __slots__ = ("profile", "pmap")

    def __init__(self, profile, pmap):
        self.profile = profile
        self.pmap = pmap

    def apply(self, pts3):
        rho = pts3[0]
        u = self.profile.value(rho)
        planar = self.pmap.apply(u, pts3[1:])
        return np.concatenate([rho[None], planar])

    def jet3(self, pts3) -> Jet:
        rho = pts3[0]
        n = pts3.shape[1]
        c0 = self.profile.value(rho)
        c1 = self.profile.d1(rho)
        c2 = self.profile.d2(rho)
        pj = self.pmap.jet_uxy(c0, pts3[1:])
        x = np.concatenate([rho[None], pj.x])
        j = np.zeros((3, 3, n))
        j[0, 0] = 1.0
        j[1:, 0] = pj.j[:, 0] * c1
        j[1:, 1:] = pj.j[:, 1:]
        h = np.zeros((3, 3, 3, n))
        h[1:, 0, 0] = pj.h[:, 0, 0] * c1 ** 2 + pj.j[:, 0] * c2
        for b in (1, 2):
            h[1:, 0, b] = pj.h[:, 0, b] * c1
            h[1:, b, 0] = h[1:, 0, b]
        h[1:, 1:, 1:] = pj.h[:, 1:, 1:]
        return Jet(x, j, h)

    def signature(self):
        return ("ball-layer", self.profile.signature(), self.pmap.signature())


class BallDiffeo:
    """Layered diffeomorphism of the solid ball in the chart
    (rho, x, y) with rho preserved by every layer."""

    __slots__ = ("links",)

    def __init__(self, links=()):
        self.links = tuple(links)

    @classmethod
    def identity(cls):
        return cls(())

    def apply(self, pts3):
        pts3 = np.asarray(pts3, dtype=np.float64)
        for link in self.links:
            pts3 = link.apply(pts3)
        return pts3

    def jet(self, pts3, plan: DerivativePlan = ANALYTIC) -> Jet:
        pts3 = np.asarray(pts3, dtype=np.float64)
        if plan.kind == "analytic":
            current = Jet.identity(pts3)
            for link in self.links:
                current = compose(link.jet3(current.x), current)
            return current
        step = plan.fd_rel_step
        J = fd4_jacobian(self.apply, pts3, step)

        def jfn(q):
            return fd4_jacobian(self.apply, q, step).reshape(9, -1)

        Hflat = fd4_jacobian(jfn, pts3, step)
        H = Hflat.reshape(3, 3, 3, pts3.shape[1])
        H = 0.5 * (H + H.transpose(0, 2, 1, 3))
        return Jet(self.apply(pts3), J, H)

    def boundary_map(self) -> DiscDiffeo:
        """The planar chain obtained by restricting every layer to rho = 1."""
        links = []
        for link in self.links:
            u0 = float(link.profile.value(np.array([1.0]))[0])
            bl = link.pmap.boundary_link(u0)
            if bl is not None:
                links.append(bl)
        return DiscDiffeo(tuple(links))

    def normal_derivative_jet(self, plane_pts):
        """(d, dx, dy) with d the rho-derivative of the first output
        component on the boundary sphere and dx, dy its plane partials.
        Layered maps preserve rho, so this is exactly (1, 0, 0)."""
        n = np.asarray(plane_pts).shape[1]
        return np.ones(n), np.zeros(n), np.zeros(n)

    def parameter_zero_map(self) -> DiscDiffeo:
        """The planar chain at parameter u = 0 (must evaluate to the
        identity for a valid extension of an isotopy)."""
        links = []
        for link in self.links:
            links.append(link.pmap.boundary_link(0.0))
        return DiscDiffeo(tuple(links))

    def signature(self):
        return ("ball-chain",) + tuple(l.signature() for l in self.links)


def ball_compose(g: BallDiffeo, h: BallDiffeo) -> BallDiffeo:
    """(g o h)(p) = g(h(p)): h's layers run first."""
    return BallDiffeo(h.links + g.links)


def _param_maps_of(disc: DiscDiffeo):
    """Canonical parametric decomposition of a disc chain: each link yields
    its linear-in-u planar family; flow links have none."""
    pmaps = []
    for link in disc.links:
        pm = link.param_map()
        if pm is None:
            raise UnsupportedError(
                "flow links carry no closed-form isotopy; "
                "ball extensions need rotation/twist/Alexander chains")
        pmaps.append(pm)
    return pmaps


_ID_CHECK_RADII = (0.15, 0.45, 0.75, 0.95)


def _check_parameter_zero_identity(ball: BallDiffeo, tol: float = 1e-12):
    th = np.linspace(0.0, _TWO_PI, 64, endpoint=False)
    pts = np.concatenate([
        np.stack([r * np.cos(th), r * np.sin(th)]) for r in _ID_CHECK_RADII
    ], axis=1)
    zero_map = ball.parameter_zero_map()
    if np.max(np.abs(zero_map.apply(pts) - pts)) > tol:
        raise DomainError(
            "layer isotopy does not start at the identity "
            "(frozen conjugator links fail to cancel at u = 0)")


def ball_extend(h, xi: CutoffFn, profile=None) -> BallDiffeo:
    """Layered ball extension of a boundary map.

    ``h`` may be a DiscDiffeo (sphere map in the chart) or a SphereDiffeo.
    Each link of the chain is graded by the radial profile (default: the
    cutoff itself), so the ball map is the identity near rho = 0 and equals
    the given map on the boundary sphere rho = 1.
    """
    disc = h.disc if isinstance(h, SphereDiffeo) else h
    prof = profile if profile is not None else CutoffProfile(xi)
    links = [BallLayerLink(prof, pm) for pm in _param_maps_of(disc)]
    ball = BallDiffeo(links)
    _check_parameter_zero_identity(ball)
    return ball


def conjugated_extension(g: DiscDiffeo, h: DiscDiffeo, xi: CutoffFn,
                         profile=None) -> BallDiffeo:
    """Ball extension of g o h o g^{-1} along the isotopy u -> g o h_u o g^{-1}:
    the conjugating chains enter as frozen (u-independent) layers."""
    prof = profile if profile is not None else CutoffProfile(xi)
    ginv = disc_invert(g)
    links = [BallLayerLink(prof, ParamFrozen(l)) for l in ginv.links]
    links += [BallLayerLink(prof, pm) for pm in _param_maps_of(h)]
    links += [BallLayerLink(prof, ParamFrozen(l)) for l in g.links]
    ball = BallDiffeo(links)
    _check_parameter_zero_identity(ball)
    return ball


def ball_jacobian(B: BallDiffeo, pts3, plan: DerivativePlan = ANALYTIC):
    """Jacobian stack (3, 3, N); DegenerateError if any det <= 0.  For
    layered maps the top row is exactly (1, 0, 0)."""
    pts3 = np.asarray(pts3, dtype=np.float64)
    single = pts3.ndim == 1
    if single:
        pts3 = pts3[:, None]
    J = B.jet(pts3, plan).j
    det = det_batched(J)
    if np.any(det <= 0.0) or np.any(~np.isfinite(det)):
        raise DegenerateError(
            f"ball Jacobian degenerate (min det {np.min(det):.3e})")
    return J[:, :, 0] if single else J
