"""Complete minimal spheres with embedded planar ends from rational null curves.

Conventions.  The data are the three rational components of Phi' = 2 dX/dz,
so that X = Re Phi with Phi a primitive of Phi'.  The conformal factor of the
induced metric is e^{2 lambda} = |Phi'|^2 / 2 and the Gauss map is obtained
from g = Phi'_3 / (Phi'_1 - i Phi'_2) by inverse stereographic projection,
nu = (2 Re g, 2 Im g, |g|^2 - 1) / (|g|^2 + 1).

Besides the components a :class:`NullCurveData` records a basepoint, the
complex value ``offset`` of Phi at the basepoint (so the conjugate surface
Im Phi is also pinned down) and the centre ``center`` used when the surface
is inverted, Psi = (X - center) / |X - center|^2.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from . import rational as rt
from .errors import (BranchPointDetected, DegenerateEnd, FlatSurface, FormatError,
                     LogEndDetected, NotComplexOrthogonal, NullIdentityViolation,
                     PathThroughPole, PoleEvaluation, SolveFailure, WrongPoleOrder)
from .rational import Mobius, RationalFn

P = np.polynomial.polynomial

NULL_TOL = 1e-12
RESIDUE_TOL = 1e-8
BRANCH_TOL = 1e-8
WSD_VERSION = "wsd-1"


# data types -------------------------------------------------------------------------

@dataclass(frozen=True)
class WeierstrassPair:
    g: RationalFn
    eta: RationalFn


@dataclass(frozen=True, eq=False)
class EndChart:
    """Normalized chart zeta = s (z - p) (or s w with w = 1/z at infinity).

    In this chart Phi' dzeta = (-a / zeta^2 + Y(zeta)) dzeta with a.a = 0 and
    |a|^2 = 2.
    """

    index: int
    location: complex          # np.inf for the point at infinity
    scale: complex
    a: np.ndarray
    Y: Callable
    normal: np.ndarray
    offset: float              # b_i, plane {x : normal . x = b_i}

    @property
    def at_infinity(self) -> bool:
        return not np.isfinite(self.location)

    def to_z(self, zeta):
        """Parameter point of the global coordinate for chart value zeta."""
        w = np.asarray(zeta, dtype=complex) / self.scale
        if self.at_infinity:
            return 1.0 / w
        return self.location + w


@dataclass(frozen=True)
class SurfaceSummary:
    m: int
    p: Optional[int]
    span_dimension: int
    total_curvature: float
    gauss_degree: int
    willmore_energy: Optional[float] = None


@dataclass(frozen=True, eq=False)
class NullCurveData:
    components: tuple
    basepoint: complex = 0.0
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=complex))
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    p: Optional[int] = None
    provenance: str = ""
    genus: int = 0

    def __post_init__(self):
        comps = tuple(rt.with_square_root(c if isinstance(c, RationalFn) else RationalFn(*c))
                      for c in self.components)
        if len(comps) != 3:
            raise ValueError("three components required")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "basepoint", complex(self.basepoint))
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=complex).reshape(3))
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))

    # cached derived rational data
    @cached_property
    def second(self):
        return tuple(rt.derivative(c) for c in self.components)

    @cached_property
    def primitives(self):
        return tuple(rt.antiderivative(c) for c in self.components)

    @cached_property
    def components_w(self):
        inv = Mobius.inversion()
        return tuple(rt.mobius_pullback(c, inv, form=True) for c in self.components)

    @cached_property
    def second_w(self):
        return tuple(rt.derivative(c) for c in self.components_w)

    @cached_property
    def primitive_base(self):
        return np.array([F(self.basepoint) for F in self.primitives])

    @cached_property
    def gauss_rational(self) -> RationalFn:
        return gauss_rational(self)

    @cached_property
    def ends(self):
        return tuple(end_normalize(self, i) for i in range(len(_end_locations(self))))

    # evaluation helpers (vectorized over z)
    def dphi(self, z):
        return np.array([c(z) for c in self.components])

    def ddphi(self, z):
        return np.array([c(z) for c in self.second])

    def phi(self, z):
        z = np.asarray(z, dtype=complex)
        vals = np.array([F(z) for F in self.primitives])
        shift = self.offset - self.primitive_base
        return vals + shift.reshape((3,) + (1,) * z.ndim)

    def X(self, z):
        return self.phi(z).real


# construction ------------------------------------------------------------------------

def _pick_basepoint(comps):
    for b in (0.0, 0.1 + 0.05j, -0.3 + 0.2j, 0.5 - 0.4j, 1.3 + 0.7j):
        try:
            for c in comps:
                c(b)
            return b
        except PoleEvaluation:
            continue
    raise PathThroughPole("no admissible basepoint")


def from_components(comps, p=None, provenance="", center=(0.0, 0.0, 0.0),
                    basepoint=None, offset=None, check=True) -> NullCurveData:
    comps = tuple(comps)
    b = _pick_basepoint(comps) if basepoint is None else basepoint
    data = NullCurveData(comps, b, np.zeros(3) if offset is None else offset, center, p, provenance)
    if check:
        validate(data)
    return data


def from_weierstrass(pair: WeierstrassPair, **kw) -> NullCurveData:
    """Phi' = ((1 - g^2) eta, i (1 + g^2) eta, 2 g eta), then validated."""
    g, eta = pair.g, pair.eta
    if rt.reduce(g).deg_num == 0 and rt.reduce(g).deg_den == 0:
        raise FlatSurface("constant Gauss map")
    if eta.is_zero:
        raise ValueError("eta vanishes identically")
    g2 = g * g
    comps = ((1 - g2) * eta, (1 + g2) * eta * 1j, g * eta * 2)
    kw.setdefault("provenance", "weierstrass pair")
    return from_components(comps, **kw)


# validation ---------------------------------------------------------------------------

def null_square(data: NullCurveData):
    """Phi'.Phi' as a rational function and the coefficient scale of its terms."""
    comps = data.components
    if all(np.array_equal(c.den, comps[0].den) for c in comps):
        terms = [np.convolve(c.num, c.num) for c in comps]
        den = np.convolve(comps[0].den, comps[0].den)
    else:
        dens = [np.convolve(c.den, c.den) for c in comps]
        terms = []
        for k, c in enumerate(comps):
            t = np.convolve(c.num, c.num)
            for j in range(3):
                if j != k:
                    t = np.convolve(t, dens[j])
            terms.append(t)
        den = np.convolve(np.convolve(dens[0], dens[1]), dens[2])
    total = np.zeros(max(t.size for t in terms), dtype=complex)
    for t in terms:
        total[:t.size] += t
    scale = max(np.abs(t).max() for t in terms)
    return RationalFn(total, den), scale


def _end_locations(data: NullCurveData):
    return _analysis(data)["ends"]


def _laurent_vector(comps, z0, n_after=1):
    """Principal parts and constant term of a vector of rational functions."""
    orders = [rt._pole_order_at(c, z0) for c in comps]
    e = max(orders)
    coef = np.zeros((3, e + n_after), dtype=complex)
    for k, c in enumerate(comps):
        ek, ck = rt.laurent(c, z0, orders[k] + n_after, order=orders[k])
        coef[k, e - ek:] = ck[:e + n_after - (e - ek)]
    return e, coef


def _classify_pole(comps, z0, where):
    e, coef = _laurent_vector(comps, z0)
    scale = max(np.linalg.norm(coef, axis=0).max(), 1e-300)
    if e == 0:
        return None
    res = np.linalg.norm(coef[:, e - 1])
    if res > RESIDUE_TOL * scale:
        raise LogEndDetected(f"nonzero residue {res:.3e} at {where}")
    for j in range(e, 2, -1):
        if np.linalg.norm(coef[:, e - j]) > RESIDUE_TOL * scale:
            raise WrongPoleOrder(f"pole of order {j} at {where}")
    if e >= 2 and np.linalg.norm(coef[:, e - 2]) > RESIDUE_TOL * scale:
        return coef[:, e - 2]
    return None


def _merged_pole_locations(comps):
    locs = []
    for c in comps:
        for z, _ in rt.certified_roots(c.den):
            if not any(abs(z - w) <= 1e-7 * max(1.0, abs(z)) for w in locs):
                locs.append(z)
    return locs


def _analysis(data: NullCurveData):
    cache = data.__dict__.get("_analysis_cache")
    if cache is not None:
        return cache
    S, scale = null_square(data)
    if np.abs(S.num).max() > NULL_TOL * scale:
        raise NullIdentityViolation(
            f"Phi'.Phi' has coefficients of relative size {np.abs(S.num).max() / scale:.2e}")
    ends = []
    for z0 in _merged_pole_locations(data.components):
        A = _classify_pole(data.components, z0, f"z = {z0}")
        if A is not None:
            ends.append((z0, A))
    # the point at infinity, via w = 1/z
    A = _classify_pole(data.components_w, 0.0, "infinity")
    inf_regular = True
    if A is not None:
        ends.append((np.inf, A))
        inf_regular = False
    elif any(rt._pole_order_at(c, 0.0) > 0 for c in data.components_w):
        inf_regular = False
    # branch points: common zeros of the numerators over a common denominator
    comps = data.components
    common = comps[0].den
    for c in comps[1:]:
        if not np.array_equal(c.den, common):
            common = None
            break
    if common is None:
        dens = [c.den for c in comps]
        nums = []
        for k, c in enumerate(comps):
            t = c.num
            for j in range(3):
                if j != k:
                    t = np.convolve(t, dens[j])
            nums.append(t)
    else:
        nums = [c.num for c in comps]
    rng = np.random.default_rng(12345)
    weights = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    combo = sum(w * np.pad(n, (0, max(x.size for x in nums) - n.size)) for w, n in zip(weights, nums))
    end_locs = [z for z, _ in ends if np.isfinite(z)]
    if np.any(combo) and np.trim_zeros(combo, "b").size > 1:
        for r in np.roots(np.trim_zeros(combo, "b")[::-1]):
            if any(abs(r - z) <= 1e-6 * max(1.0, abs(z)) for z in end_locs):
                continue
            vals = np.array([rt.horner(n, r) for n in nums])
            scl = max(rt._abs_horner(n, abs(r)) for n in nums)
            if np.linalg.norm(vals) <= BRANCH_TOL * scl:
                raise BranchPointDetected(f"Phi' vanishes at z = {r}")
    if inf_regular:
        v0 = np.array([c(0.0) for c in data.components_w])
        scl = max(np.abs(c.num).max() / np.abs(c.den).max() for c in data.components_w)
        if np.linalg.norm(v0) <= BRANCH_TOL * max(scl, 1e-300):
            raise BranchPointDetected("Phi' vanishes at infinity")
    g = gauss_rational(data)
    deg = rt.degree(g)
    if deg == 0:
        raise FlatSurface("constant Gauss map (planar data)")
    if not ends:
        raise WrongPoleOrder("no double-pole ends")
    cache = {"ends": ends, "gauss_degree": deg}
    data.__dict__["_analysis_cache"] = cache
    return cache


def gauss_rational(data: NullCurveData) -> RationalFn:
    """Reduced Gauss map g = Phi'_3 / (Phi'_1 - i Phi'_2)."""
    c1, c2, c3 = data.components
    den = c1 - c2 * 1j
    if den.is_zero:
        raise FlatSurface("Phi'_1 - i Phi'_2 vanishes identically")
    return rt.reduce(c3 / den)


def validate(data: NullCurveData) -> SurfaceSummary:
    info = _analysis(data)
    m = len(info["ends"])
    deg = info["gauss_degree"]
    d = end_span_dimension(data) if m >= 1 else 0
    return SurfaceSummary(m=m, p=data.p, span_dimension=d,
                          total_curvature=-4.0 * np.pi * deg, gauss_degree=deg)


# ends and Gauss map --------------------------------------------------------------------

def end_normalize(data: NullCurveData, i: int) -> EndChart:
    ends = _end_locations(data)
    if not 0 <= i < len(ends):
        raise IndexError(f"end index {i} out of range (m = {len(ends)})")
    loc, A = ends[i]
    nA = np.linalg.norm(A)
    if nA == 0:
        raise DegenerateEnd(f"zero leading coefficient at end {i}")
    s = np.sqrt(2.0) / nA
    a = -s * A
    cr = np.cross(a.real, a.imag)
    normal = -cr / np.linalg.norm(cr)
    if np.isfinite(loc):
        comps, p0 = data.components, loc
        others = [q for q, _ in ends if np.isfinite(q) and q != loc]
    else:
        comps, p0 = data.components_w, 0.0
        others = [1.0 / q for q, _ in ends if np.isfinite(q) and q != 0]
    Y = _regular_part(comps, p0, s, a, others)
    b = _plane_offset_exact(data, loc, normal)
    return EndChart(i, loc, s, a, Y, normal, b)


def _regular_part(comps, p0, s, a, others, n_terms=40):
    """Y(zeta) = Phi'/s + a/zeta^2 in the normalized chart.

    Near the end the difference cancels catastrophically, so there the Taylor
    series of the regular part is summed instead.
    """
    taylor = np.array([rt.laurent(c, p0, n_terms + 2, order=2)[1][2:] for c in comps])
    radius = 0.25 * min([abs(q - p0) for q in others], default=1.0)

    def Y(zeta):
        zeta = np.asarray(zeta, dtype=complex)
        t = zeta / s
        near = np.abs(t) < radius
        out = np.empty((3,) + zeta.shape, dtype=complex)
        if np.any(near):
            tn = t[near]
            out[:, near] = np.array([rt.horner(c, tn) for c in taylor]) / s
        if np.any(~near):
            tf, zf = t[~near], zeta[~near]
            out[:, ~near] = (np.array([c(p0 + tf) for c in comps]) / s
                             + a[:, None] / zf ** 2)
        return out
    return Y


def _plane_offset_exact(data, loc, normal):
    """nu . Re(constant Laurent term of Phi) at the end."""
    if np.isfinite(loc):
        prims = data.primitives
        z0 = loc
    else:
        inv = Mobius.inversion()
        prims = [rt.mobius_pullback(F, inv) for F in data.primitives]
        z0 = 0.0
    const = np.zeros(3, dtype=complex)
    for k, F in enumerate(prims):
        e = rt._pole_order_at(F, z0)
        _, c = rt.laurent(F, z0, e + 1, order=e)
        const[k] = c[e]
    const = const + data.offset - data.primitive_base
    return float(normal @ const.real)


def complex_line_constants(data: NullCurveData):
    """For each end, (A_i, C_i): Phi ~ A_i' / (z - p_i) + C_i with direction A_i."""
    out = []
    for loc, A in _end_locations(data):
        if np.isfinite(loc):
            prims, z0 = data.primitives, loc
        else:
            inv = Mobius.inversion()
            prims, z0 = [rt.mobius_pullback(F, inv) for F in data.primitives], 0.0
        const = np.zeros(3, dtype=complex)
        for k, F in enumerate(prims):
            e = rt._pole_order_at(F, z0)
            _, c = rt.laurent(F, z0, e + 1, order=e)
            const[k] = c[e]
        out.append((A, const + data.offset - data.primitive_base))
    return out


def _sphere_normal_homogeneous(gn, gd):
    n2, d2 = np.abs(gn) ** 2, np.abs(gd) ** 2
    cross = gn * np.conj(gd)
    return np.array([2 * cross.real, 2 * cross.imag, n2 - d2]) / (n2 + d2)


def gauss_map(data: NullCurveData, z):
    """Extended Gauss map at parameter values z (np.inf allowed)."""
    g = data.gauss_rational
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    out = np.empty((3, flat.size))
    for j, zz in enumerate(flat):
        if not np.isfinite(zz) or abs(zz) > 1:
            w = 0.0 if not np.isfinite(zz) else 1.0 / zz
            rn, rd = g.num[::-1], g.den[::-1]
            shift = g.den.size - g.num.size
            gn = rt.horner(rn, w) * (w ** shift if shift > 0 else 1.0)
            gd = rt.horner(rd, w) * (w ** (-shift) if shift < 0 else 1.0)
        else:
            gn, gd = rt.horner(g.num, zz), rt.horner(g.den, zz)
        out[:, j] = _sphere_normal_homogeneous(gn, gd)
    return out.reshape((3,) + z.shape)


def span_dimension(normals, rel_tol=1e-8) -> int:
    s = np.linalg.svd(np.atleast_2d(np.asarray(normals, dtype=float)), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def end_span_dimension(data: NullCurveData) -> int:
    return span_dimension([e.normal for e in data.ends])


def end_normals(data: NullCurveData) -> np.ndarray:
    return np.array([e.normal for e in data.ends])


# immersion ------------------------------------------------------------------------------

def _segment_integral(data, a, b, tol=1e-13, n=24):
    x, w = np.polynomial.legendre.leggauss(n)

    def panel(u, v):
        t = 0.5 * (v - u) * x + 0.5 * (v + u)
        return (data.dphi(t) * w).sum(axis=1) * 0.5 * (v - u)

    def rec(u, v, whole, depth):
        m = 0.5 * (u + v)
        left, right = panel(u, m), panel(m, v)
        if np.linalg.norm(left + right - whole) <= tol * max(1.0, np.linalg.norm(whole)) or depth > 40:
            return left + right
        return rec(u, m, left, depth + 1) + rec(m, v, right, depth + 1)

    return rec(a, b, panel(a, b), 0)


def _pole_locations_finite(data):
    """Finite poles of the components (no validation needed)."""
    locs = []
    for c in data.components:
        for z, _ in rt.certified_roots(c.den) if c.den.size > 1 else ():
            if all(abs(z - q) > 1e-9 * max(1.0, abs(q)) for q in locs):
                locs.append(z)
    return locs


def _default_path(data, a, b):
    """Straight segment, with a detour around any end within reach of it."""
    pts = [a]
    for p0 in _pole_locations_finite(data):
        d = b - a
        if d == 0:
            continue
        t = ((p0 - a) * np.conj(d)).real / abs(d) ** 2
        if 0 < t < 1:
            foot = a + t * d
            dist = abs(foot - p0)
            r = 0.25 * max(abs(d), 1e-3)
            if dist < r:
                nrm = 1j * d / abs(d)
                side = nrm if ((foot - p0) * np.conj(nrm)).real >= 0 else -nrm
                pts.append(p0 + side * r)
    pts.append(b)
    if len(pts) > 2:
        mid = sorted(pts[1:-1], key=lambda q: ((q - a) * np.conj(b - a)).real)
        pts = [a] + mid + [b]
    return pts


def immersion_eval(data: NullCurveData, z, basepoint=None, method="primitive", path=None):
    """X(z) = Re Phi(z).

    ``method='primitive'`` uses the exact rational primitive of Phi';
    ``method='path'`` integrates Phi' by adaptive Gauss-Legendre quadrature
    along a polygonal path (``path`` waypoints between basepoint and z, or an
    automatically chosen pole-avoiding path).
    """
    if basepoint is None:
        b, start = data.basepoint, data.offset
    else:
        b, start = complex(basepoint), np.zeros(3, dtype=complex)
    if method == "primitive":
        z = np.asarray(z, dtype=complex)
        Phi = data.phi(z) - data.phi(b).reshape((3,) + (1,) * z.ndim)
        return (Phi + start.reshape((3,) + (1,) * z.ndim)).real
    z = complex(z)
    pts = [b] + list(path) + [z] if path is not None else _default_path(data, b, z)
    ends = _pole_locations_finite(data)
    for q in pts:
        for p0 in ends:
            if abs(q - p0) < 1e-9 * max(1.0, abs(p0)):
                raise PathThroughPole(f"waypoint {q} hits the end at {p0}")
    total = start.astype(complex)
    for u, v in zip(pts[:-1], pts[1:]):
        d = v - u
        for p0 in ends:
            t = np.clip(((p0 - u) * np.conj(d)).real / max(abs(d) ** 2, 1e-300), 0, 1)
            if abs(u + t * d - p0) < 1e-9 * max(1.0, abs(p0)):
                raise PathThroughPole(f"segment {u} -> {v} passes through the end at {p0}")
        total = total + _segment_integral(data, u, v)
    return total.real


# transformations ------------------------------------------------------------------------

def associate(data: NullCurveData, t: float) -> NullCurveData:
    c = np.exp(1j * t)
    comps = tuple(x * c for x in data.components)
    out = replace(data, components=comps, offset=data.offset * c,
                  provenance=_append(data.provenance, f"associate(t={t!r})"))
    validate(out)
    return out


def conjugate(data: NullCurveData) -> NullCurveData:
    return associate(data, np.pi / 2)


def is_complex_orthogonal(M, tol=1e-10) -> bool:
    M = np.asarray(M, dtype=complex)
    if M.shape != (3, 3):
        return False
    return (np.abs(M.T @ M - np.eye(3)).max() <= tol * max(1.0, np.abs(M).max() ** 2)
            and abs(np.linalg.det(M) - 1) <= tol * max(1.0, np.abs(M).max() ** 3))


def orbit_act(data: NullCurveData, M) -> NullCurveData:
    """Replace Phi' by M Phi' for M in SO(3, C)."""
    M = np.asarray(M, dtype=complex)
    if not is_complex_orthogonal(M):
        raise NotComplexOrthogonal("M^T M != I or det M != 1")
    comps = []
    for k in range(3):
        acc = None
        for j in range(3):
            if M[k, j] == 0:
                continue
            term = data.components[j] * M[k, j]
            acc = term if acc is None else acc + term
        comps.append(acc if acc is not None else RationalFn([0.0], data.components[0].den))
    real = np.abs(M.imag).max() == 0
    center = (M.real @ data.center) if real else data.center
    out = replace(data, components=tuple(comps), offset=M @ data.offset, center=center,
                  provenance=_append(data.provenance, "orbit_act"))
    validate(out)
    return out


def translate(data: NullCurveData, tau) -> NullCurveData:
    """Rigid translation of the surface (and of its inversion centre)."""
    tau = np.asarray(tau, dtype=float)
    return replace(data, offset=data.offset + tau, center=data.center + tau,
                   provenance=_append(data.provenance, "translate"))


def with_center(data: NullCurveData, center) -> NullCurveData:
    return replace(data, center=np.asarray(center, dtype=float))


def random_orbit_matrix(rng, modulus=0.3) -> np.ndarray:
    """exp(A) with A complex antisymmetric, entries uniform in a disk."""
    r = modulus * np.sqrt(rng.uniform(size=3))
    th = rng.uniform(0, 2 * np.pi, size=3)
    e = r * np.exp(1j * th)
    A = np.array([[0, e[0], e[1]], [-e[0], 0, e[2]], [-e[1], -e[2], 0]])
    return scipy.linalg.expm(A)


def random_orbit_element(data: NullCurveData, rng, modulus=0.3) -> NullCurveData:
    """Seeded element of the S^1 x SO(3, C) orbit of ``data``."""
    t = rng.uniform(0, 2 * np.pi)
    M = random_orbit_matrix(rng, modulus)
    return orbit_act(associate(data, t), M)


def _append(prov, note):
    return f"{prov}; {note}" if prov else note


# centring -------------------------------------------------------------------------------

def center_complex(data: NullCurveData):
    """Shift the complex offset so the asymptotic planes of X and of its
    conjugate Im Phi pass through the origin as nearly as possible.

    The planes of both surfaces at end i contain the origin iff
    nu_i . (C_i + o) = 0, with C_i the constant Laurent term of Phi there.
    The normals are real, so Re o and Im o are fitted separately.  Returns
    the new data and the least-squares residuals for X and for its conjugate.
    """
    rows, rhs = [], []
    for (A, C), end in zip(complex_line_constants(data), data.ends):
        rows.append(end.normal)
        rhs.append(-end.normal @ C)
    Amat = np.array(rows)
    b = np.array(rhs)
    o_re, *_ = np.linalg.lstsq(Amat, b.real, rcond=None)
    o_im, *_ = np.linalg.lstsq(Amat, b.imag, rcond=None)
    resid_re = float(np.abs(Amat @ o_re - b.real).max())
    resid_im = float(np.abs(Amat @ o_im - b.imag).max())
    return replace(data, offset=data.offset + o_re + 1j * o_im), resid_re, resid_im


def surface_scale(data: NullCurveData, n=257) -> float:
    """Median distance of sampled surface points from their coordinatewise median."""
    k = np.arange(n) + 0.5
    zc = 1 - 2 * k / n
    ph = np.pi * (1 + 5 ** 0.5) * k
    rho = np.sqrt(1 - zc ** 2)
    # inverse stereographic: n = (2x, 2y, |z|^2 - 1)/(|z|^2 + 1)
    z = rho * np.exp(1j * ph) / (1 - zc)
    pts = []
    for zz in z:
        try:
            pts.append(data.X(zz))
        except PoleEvaluation:
            continue
    pts = np.array(pts)
    med = np.median(pts, axis=0)
    return float(np.median(np.linalg.norm(pts - med, axis=1)))


# the minimal flowers --------------------------------------------------------------------

def _flower_polys(p, beta, kA, kB, kappa=1.0):
    q = np.zeros(2 * p + 1, dtype=complex)
    q[0], q[p], q[2 * p] = 1.0, beta, 1.0
    A = np.zeros(2 * p, dtype=complex)
    A[p - 1], A[2 * p - 1] = kappa, kappa * kA
    B = np.zeros(p + 1, dtype=complex)
    B[0], B[p] = 1.0, kB
    return q, A, B


def _spinor_numerators(A, B):
    A2, B2, AB = P.polymul(A, A), P.polymul(B, B), P.polymul(A, B)
    return [P.polysub(B2, A2), 1j * P.polyadd(B2, A2), 2 * AB]


def _flower_residuals(x, p):
    beta, kA, kB = x
    q, A, B = _flower_polys(p, beta, kA, kB)
    dq, ddq = P.polyder(q), P.polyder(q, 2)
    roots = np.roots(q[::-1])
    out = []
    for f in (P.polymul(A, A), P.polymul(B, B), P.polymul(A, B)):
        df = P.polyder(f)
        for r in roots:
            # residue of f/q^2 at a simple root r of q
            d1 = P.polyval(r, dq)
            out.append((P.polyval(r, df) * d1 - P.polyval(r, f) * P.polyval(r, ddq)) / d1 ** 3)
    return np.array(out)


def _newton_flower(p, x0, tol=1e-14, maxit=60):
    x = np.array(x0, dtype=complex)
    for _ in range(maxit):
        F = _flower_residuals(x, p)
        if not np.all(np.isfinite(F)):
            return None, np.inf
        J = np.empty((F.size, 3), dtype=complex)
        for j in range(3):
            h = 1e-7 * max(1.0, abs(x[j]))
            e = np.zeros(3, dtype=complex)
            e[j] = h
            J[:, j] = (_flower_residuals(x + e, p) - _flower_residuals(x - e, p)) / (2 * h)
        step, *_ = np.linalg.lstsq(J, -F, rcond=None)
        x = x + step
        if np.linalg.norm(step) <= tol * max(1.0, np.linalg.norm(x)):
            break
    res = np.linalg.norm(_flower_residuals(x, p))
    return x, res


def flower_parameters(p: int):
    """Solve the residue conditions of the flower ansatz by Newton iteration.

    Ansatz: q = z^{2p} + beta z^p + 1 and spinors A = kappa z^{p-1}(1 + kA z^p),
    B = 1 + kB z^p, so Phi' = (B^2 - A^2, i(B^2 + A^2), 2AB)/q^2 is null by
    construction and p-fold symmetric.  The residues do not involve kappa;
    kappa is fixed afterwards by the orientation-reversing symmetry, which
    exchanges the two rings of ends and therefore forces
    |g(r_+)| |g(r_-)| = 1 for ends r_+, r_- on different rings.
    """
    if int(p) != p or p < 2:
        raise ValueError("p must be an integer >= 2")
    p = int(p)
    starts = []
    for mag in (1.0, 2.0, 3.0, 0.5):
        for ka in (0.3, 1.0, -0.5):
            for kb in (-1.0, -2.0, -0.5):
                starts.append((1j * mag, 1j * ka, 1j * kb))
    best = None
    for x0 in starts:
        x, res = _newton_flower(p, x0)
        if x is None or res > 1e-11:
            continue
        beta, kA, kB = x
        if abs(beta ** 2 - 4) < 1e-6 or abs(kA) < 1e-8 or abs(kB) < 1e-8:
            continue
        # spinors must not share a zero (branch point) and q must have simple roots
        q, A, B = _flower_polys(p, beta, kA, kB)
        zA = np.roots(np.trim_zeros(A, "b")[::-1])
        zB = np.roots(np.trim_zeros(B, "b")[::-1])
        if min(abs(a - b) for a in zA for b in zB) < 1e-6:
            continue
        best = x
        break
    if best is None:
        raise SolveFailure(f"residue system for p = {p} did not converge")
    beta, kA, kB = best
    # fix the gauge beta -> conjugate so that Im beta > 0 (rotation z -> e^{i pi/p} z)
    if beta.imag < 0:
        beta, kA, kB = -beta, -kA, -kB
    q, A, B = _flower_polys(p, beta, kA, kB)
    roots = np.roots(q[::-1])
    ring = np.abs(roots) > 1
    gabs = np.abs(P.polyval(roots, A) / P.polyval(roots, B))
    kappa = 1.0 / np.sqrt(gabs[ring][0] * gabs[~ring][0])
    return complex(beta), complex(kA), complex(kB), float(kappa)


def flower_data(p: int, height: float | None = None) -> NullCurveData:
    """The 2p-ended minimal flower, centred, with inversion centre on the axis."""
    beta, kA, kB, kappa = flower_parameters(p)
    q, A, B = _flower_polys(p, beta, kA, kB, kappa)
    q2 = P.polymul(q, q)
    comps = tuple(RationalFn(n, q2, root=(q, 2)) for n in _spinor_numerators(A, B))
    data = NullCurveData(comps, 0.0, np.zeros(3), np.zeros(3), int(p),
                         f"minimal flower p={p}: residue solve beta={beta!r}")
    validate(data)
    data, resid, resid_conj = center_complex(data)
    if resid > 1e-9:
        raise SolveFailure(f"flower could not be centred (residual {resid:.2e})")
    data = replace(data, provenance=data.provenance
                   + f"; conjugate plane residual {resid_conj:.3e}")
    if height is None:
        height = 0.5 * surface_scale(data)
    data = with_center(data, (0.0, 0.0, height))
    summary = validate(data)
    if summary.m != 2 * p:
        raise SolveFailure(f"expected {2 * p} ends, found {summary.m}")
    return data


# .wsd files -----------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".16e")


def _cfmt(z) -> list:
    z = complex(z)
    return [_fmt(z.real), _fmt(z.imag)]


def _cparse(pair) -> complex:
    if not (isinstance(pair, list) and len(pair) == 2):
        raise FormatError(f"bad complex entry {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def dumps_wsd(data: NullCurveData) -> str:
    doc = {
        "format_version": WSD_VERSION,
        "p": data.p,
        "components": [{"num": [_cfmt(c) for c in R.num], "den": [_cfmt(c) for c in R.den]}
                       for R in data.components],
        "basepoint": _cfmt(data.basepoint),
        "offset": [_cfmt(c) for c in data.offset],
        "center": [_fmt(c) for c in data.center],
        "provenance": data.provenance,
    }
    return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


def loads_wsd(text: str) -> NullCurveData:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not a surface data file: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format_version") != WSD_VERSION:
        raise FormatError(f"unsupported format version {doc.get('format_version') if isinstance(doc, dict) else None!r}")
    try:
        comps = tuple(RationalFn([_cparse(c) for c in R["num"]], [_cparse(c) for c in R["den"]])
                      for R in doc["components"])
        return NullCurveData(comps, _cparse(doc["basepoint"]),
                             np.array([_cparse(c) for c in doc["offset"]]),
                             np.array([float(c) for c in doc["center"]]),
                             doc.get("p"), doc.get("provenance", ""))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed surface data file: {exc}") from exc


def write_wsd(data: NullCurveData, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_wsd(data))


def read_wsd(path) -> NullCurveData:
    with open(path, encoding="utf-8") as fh:
        return loads_wsd(fh.read())
