"""Differential geometry of a minimal surface with planar ends and of its inversion.

Every pointwise quantity is computed from the exact rational derivatives
Phi' and Phi'' in the chart of the evaluation point (no finite differences).
Scalar fields are handled as :class:`~willmore_lab.jets.Jet` objects, so the
Jacobi operator L_g f = Delta_g f - 2 K_g f = 4 e^{-2 lambda} f_{z zbar} - 2 K f
is exact up to rounding.

Positions are taken relative to an origin, by default the inversion centre
of the data: X below always means X - origin, and the inverted surface is
Psi = X / |X|^2.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import surface as sf
from .errors import (ExtrapolationDivergence, NotSpiny, OriginOnSurface)
from .jets import Jet, dot
from .quadrature import (ChartPoints, adaptive_sphere, integrate, partition_layout,
                         regularized_integrals)


# local frames ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LocalFrame:
    """Exact first and second order data of X at a batch of chart points."""

    chart: str
    coords: np.ndarray
    z: np.ndarray
    X: np.ndarray          # (3, n), relative to the origin
    Xc: np.ndarray         # (3, n), conjugate surface Im Phi (not shifted)
    dphi: np.ndarray       # (3, n), derivative of Phi in the chart coordinate
    ddphi: np.ndarray
    e2l: np.ndarray        # conformal factor |Phi'|^2 / 2
    K: np.ndarray          # Gauss curvature (Hermitian route)
    nu: np.ndarray         # (3, n) unit normal
    dnu: np.ndarray        # (3, n) complex, d nu / d chart
    ddnu: np.ndarray       # (3, n)
    grad_nu2: np.ndarray   # |grad nu|_g^2 (Gauss map route)

    # jets of the basic fields
    def coordinate(self, k) -> Jet:
        return Jet(self.X[k], 0.5 * self.dphi[k], np.zeros_like(self.e2l))

    def position(self) -> Jet:
        return Jet(self.X, 0.5 * self.dphi, np.zeros_like(self.X))

    def conjugate_position(self) -> Jet:
        return Jet(self.Xc, self.dphi / 2j, np.zeros_like(self.Xc))

    def sqnorm(self) -> Jet:
        return Jet((self.X ** 2).sum(axis=0), (self.X * self.dphi).sum(axis=0), self.e2l)

    def normal(self) -> Jet:
        return Jet(self.nu, self.dnu, self.ddnu)

    def support(self) -> Jet:
        return dot(self.position(), self.normal())

    def conjugate_support(self) -> Jet:
        return dot(self.conjugate_position(), self.normal())

    def weighted_inverted_normal(self) -> Jet:
        """|X|^2 n_Psi = |X|^2 nu - 2 (X . nu) X, as a (3, n) vector jet."""
        sq = self.sqnorm()
        u = self.support()
        X = self.position()
        ex = lambda j: Jet(j.val[None], j.d[None], j.dd[None])
        return ex(sq) * self.normal() - 2.0 * (ex(u) * X)

    def inverted_normal(self) -> np.ndarray:
        sq = (self.X ** 2).sum(axis=0)
        u = (self.X * self.nu).sum(axis=0)
        return self.nu - 2.0 * u * self.X / sq

    def inverted(self) -> np.ndarray:
        return self.X / (self.X ** 2).sum(axis=0)

    def jacobi(self, f: Jet):
        """L_g f = 4 e^{-2 lambda} f_{z zbar} - 2 K f."""
        return 4.0 * f.dd / self.e2l - 2.0 * self.K * f.val


def local_frame(data: sf.NullCurveData, points, origin=None) -> LocalFrame:
    """Frame at chart points (a :class:`ChartPoints`, or global z values)."""
    if not isinstance(points, ChartPoints):
        z = np.atleast_1d(np.asarray(points, dtype=complex)).ravel()
        inner = np.abs(z) <= 1
        if inner.all():
            points = ChartPoints("z", z, np.ones(z.size))
        elif (~inner).all():
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(np.isinf(z), 0.0, 1.0 / z)
            points = ChartPoints("w", w, np.ones(z.size))
        else:
            fz = local_frame(data, ChartPoints("z", z[inner], np.ones(inner.sum())), origin)
            zo = z[~inner]
            with np.errstate(divide="ignore", invalid="ignore"):
                wo = np.where(np.isinf(zo), 0.0, 1.0 / zo)
            fw = local_frame(data, ChartPoints("w", wo, np.ones(zo.size)), origin)
            return _merge(fz, fw, inner)
    c = points.coords
    if points.chart == "z":
        z = c
        dphi = np.array([f(c) for f in data.components])
        ddphi = np.array([f(c) for f in data.second])
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(c == 0, complex(np.inf, 0.0), 1.0 / np.where(c == 0, 1.0, c))
        dphi = np.array([f(c) for f in data.components_w])
        ddphi = np.array([f(c) for f in data.second_w])
    origin = data.center if origin is None else np.asarray(origin, dtype=float)
    Phi = data.phi(z)
    X = Phi.real - origin[:, None]
    e2l = 0.5 * (np.abs(dphi) ** 2).sum(axis=0)
    # curvature from the Hermitian identity for log|Phi'|^2
    n1 = (np.abs(dphi) ** 2).sum(axis=0)
    n2 = (np.abs(ddphi) ** 2).sum(axis=0)
    herm = (ddphi * np.conj(dphi)).sum(axis=0)
    K = -2.0 / e2l * (n1 * n2 - np.abs(herm) ** 2) / n1 ** 2
    # homogeneous Gauss map g = N / D, choosing the better conditioned pair
    Na, Da = dphi[2], dphi[0] - 1j * dphi[1]
    Nb, Db = -(dphi[0] + 1j * dphi[1]), dphi[2]
    use_a = np.abs(Na) ** 2 + np.abs(Da) ** 2 >= np.abs(Nb) ** 2 + np.abs(Db) ** 2
    N = np.where(use_a, Na, Nb)
    D = np.where(use_a, Da, Db)
    dN = np.where(use_a, ddphi[2], -(ddphi[0] + 1j * ddphi[1]))
    dD = np.where(use_a, ddphi[0] - 1j * ddphi[1], ddphi[2])
    S = np.abs(N) ** 2 + np.abs(D) ** 2
    W = dN * D - N * dD
    ND = N * np.conj(D)
    nu = np.array([2 * ND.real, 2 * ND.imag, np.abs(N) ** 2 - np.abs(D) ** 2]) / S
    Nb_, Db_ = np.conj(N), np.conj(D)
    dnu = W * np.array([Db_ ** 2 - Nb_ ** 2, -1j * (Db_ ** 2 + Nb_ ** 2), 2 * Nb_ * Db_]) / S ** 2
    g2 = np.abs(W) ** 2 / S ** 2
    ddnu = -2.0 * g2 * nu
    grad = 8.0 * g2 / e2l
    return LocalFrame(points.chart, c, z, X, Phi.imag, dphi, ddphi, e2l, K, nu, dnu, ddnu, grad)


def _merge(fz, fw, inner):
    n = inner.size

    def put(a, b):
        shape = a.shape[:-1] + (n,)
        out = np.empty(shape, dtype=np.result_type(a, b))
        out[..., inner] = a
        out[..., ~inner] = b
        return out

    fields = {}
    for name in ("coords", "z", "X", "Xc", "dphi", "ddphi", "e2l", "K", "nu", "dnu", "ddnu", "grad_nu2"):
        fields[name] = put(getattr(fz, name), getattr(fw, name))
    # mixed charts: derivatives are chart dependent, keep them only for
    # chart-invariant uses (values, curvature, normals)
    return LocalFrame("mixed", **fields)


# samples ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceSample:
    z: complex
    X: np.ndarray
    Psi: np.ndarray
    n_X: np.ndarray
    n_Psi: np.ndarray
    lam: float
    K: float
    grad_nu2: float


def scale_of(data: sf.NullCurveData) -> float:
    cache = data.__dict__.get("_scale_cache")
    if cache is None:
        cache = sf.surface_scale(data)
        data.__dict__["_scale_cache"] = cache
    return cache


def _check_origin(data, X):
    r = np.sqrt((X ** 2).sum(axis=0))
    if np.any(r < 1e-9 * scale_of(data)):
        raise OriginOnSurface("the inversion centre lies on the surface")


def sample(data: sf.NullCurveData, z) -> SurfaceSample:
    fr = local_frame(data, np.array([complex(z)]))
    _check_origin(data, fr.X)
    return SurfaceSample(complex(z), fr.X[:, 0], fr.inverted()[:, 0], fr.nu[:, 0],
                         fr.inverted_normal()[:, 0], float(0.5 * np.log(fr.e2l[0])),
                         float(fr.K[0]), float(fr.grad_nu2[0]))


def random_parameters(data: sf.NullCurveData, n: int, rng, min_dist=1e-2):
    """Uniform points of the parameter sphere kept away from the ends."""
    out = []
    ends = [e for e in data.ends]
    while len(out) < n:
        v = rng.standard_normal(3)
        v /= np.linalg.norm(v)
        if v[2] >= 1 - 1e-12:
            continue
        z = (v[0] + 1j * v[1]) / (1 - v[2])
        ok = True
        for e in ends:
            if e.at_infinity:
                ok &= abs(z) < 1 / min_dist
            else:
                ok &= abs(z - e.location) > min_dist
        if ok:
            out.append(z)
    return np.array(out)


# Jacobi operator and field constructors -----------------------------------------------------

FieldFn = Callable[[LocalFrame], Jet]


def coordinate_field(k) -> FieldFn:
    return lambda fr: fr.coordinate(k)


def normal_field(k) -> FieldFn:
    return lambda fr: fr.normal()[k]


def sqnorm_field() -> FieldFn:
    return lambda fr: fr.sqnorm()


def support_field() -> FieldFn:
    return lambda fr: fr.support()


def conjugate_support_field() -> FieldFn:
    return lambda fr: fr.conjugate_support()


def weighted_inverted_normal_field(k) -> FieldFn:
    return lambda fr: fr.weighted_inverted_normal()[k]


def jacobi_apply(data: sf.NullCurveData, field: FieldFn, z, origin=None) -> np.ndarray:
    """Delta_g w - 2 K_g w at parameter points z (exact derivatives)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    inner = np.abs(z) <= 1
    out = np.empty(z.size)
    for mask, chart in ((inner, "z"), (~inner, "w")):
        if mask.any():
            c = z[mask] if chart == "z" else 1.0 / z[mask]
            fr = local_frame(data, ChartPoints(chart, c, np.ones(c.size)), origin)
            out[mask] = fr.jacobi(field(fr))
    return out


def inverted_normal_identity_residual(data: sf.NullCurveData, k: int, z) -> float:
    """max |L_g(|X|^2 n_Psi^k) - 4 n_X^k| over the parameter points z."""
    sf.validate(data)
    k = int(k) - 1 if k in (1, 2, 3) else int(k)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    worst = 0.0
    inner = np.abs(z) <= 1
    for mask, chart in ((inner, "z"), (~inner, "w")):
        if mask.any():
            c = z[mask] if chart == "z" else 1.0 / z[mask]
            fr = local_frame(data, ChartPoints(chart, c, np.ones(c.size)))
            _check_origin(data, fr.X)
            lhs = fr.jacobi(fr.weighted_inverted_normal()[k])
            worst = max(worst, float(np.abs(lhs - 4.0 * fr.nu[k]).max()))
    return worst


# Willmore energy and total curvature ----------------------------------------------------------

@dataclass(frozen=True)
class EnergyResult:
    value: float
    error: float
    cross_check: float
    sphere_n: int


def _energy_density(data):
    def reducer(pts):
        fr = local_frame(data, pts)
        _check_origin(data, fr.X)
        sq = fr.sqnorm()
        inv = sq.reciprocal()
        X = fr.position()
        psi = Jet(inv.val[None], inv.d[None], inv.dd[None]) * X
        lap = 4.0 * psi.dd
        e2mu = fr.e2l / sq.val ** 2
        primary = 0.25 * (lap ** 2).sum(axis=0) / e2mu
        u = (fr.X * fr.nu).sum(axis=0)
        second = 4.0 * u ** 2 / sq.val ** 2 * fr.e2l
        return np.array([(primary * pts.weights).sum(), (second * pts.weights).sum()])
    return reducer


def willmore_energy(data: sf.NullCurveData, tol=1e-11, n0=48, nmax=1536) -> EnergyResult:
    """Willmore energy 1/4 int |H|^2 of the inverted sphere Psi = X / |X|^2.

    The primary value integrates |Delta Psi|^2 e^{-2 mu} / 4 with exact jets of
    Psi; the cross check integrates 4 (X . nu)^2 / |X|^4 dmu_g.
    """
    sf.validate(data)
    val, err, n = adaptive_sphere(_energy_density(data), n0=n0, tol=tol, nmax=nmax)
    return EnergyResult(float(val[0]), float(err), float(val[1]), n)


def total_curvature(data: sf.NullCurveData, tol=1e-10) -> float:
    """int K_g dmu_g over the whole surface."""
    def reducer(pts):
        fr = local_frame(data, pts)
        return (fr.K * fr.e2l * pts.weights).sum()
    val, _, _ = adaptive_sphere(reducer, tol=tol)
    return float(val)


# asymptotic planes and spininess ------------------------------------------------------------

@dataclass(frozen=True)
class AsymptoticPlane:
    index: int
    normal: np.ndarray
    offset: float
    error: float = 0.0


@dataclass(frozen=True)
class SpinyReport:
    is_spiny: bool
    point: np.ndarray
    residual: float
    threshold: float


def _richardson3(f):
    """Eliminate O(r) and O(r^2) from values at r, r/2, r/4."""
    g1 = 2 * f[1] - f[0]
    g2 = 2 * f[2] - f[1]
    return (4 * g2 - g1) / 3


def _end_limit(data, end, fn, r0=4e-3, theta=0.3):
    """lim fn(z) at an end by Richardson extrapolation along a ray of the chart."""
    rs = r0 / 2.0 ** np.arange(4)
    zeta = rs * np.exp(1j * theta)
    z = end.to_z(zeta)
    vals = np.array([fn(zz) for zz in z])
    a = _richardson3(vals[:3])
    b = _richardson3(vals[1:])
    return b, float(np.max(np.abs(b - a)))


def asymptotic_planes(data: sf.NullCurveData, origin=None, tol=1e-8) -> list:
    """Plane offsets b_i = lim X . nu_i at each end, extrapolated from the surface."""
    sf.validate(data)
    origin = np.zeros(3) if origin is None else np.asarray(origin, dtype=float)
    scale = scale_of(data)
    out = []
    for end in data.ends:
        nu = end.normal
        b, err = _end_limit(data, end, lambda z: float(nu @ (data.X(z) - origin)))
        if not np.isfinite(b) or err > tol * scale:
            raise ExtrapolationDivergence(
                f"offset of end {end.index} did not settle (estimate {err:.2e})")
        out.append(AsymptoticPlane(end.index, nu, float(b), err))
    return out


def exact_planes(data: sf.NullCurveData) -> list:
    """Offsets from the constant Laurent term of Phi (independent route)."""
    return [AsymptoticPlane(e.index, e.normal, e.offset) for e in data.ends]


def spiny_test(planes: Sequence[AsymptoticPlane]) -> SpinyReport:
    if len(planes) < 3:
        raise ValueError("at least three planes are needed")
    N = np.array([p.normal for p in planes])
    b = np.array([p.offset for p in planes])
    x, *_ = np.linalg.lstsq(N, b, rcond=None)
    r = float(np.abs(N @ x - b).max())
    thr = 1e-6 * float(np.max(np.abs(b) + 1))
    return SpinyReport(r < thr, x, r, thr)


@dataclass(frozen=True)
class SupportFieldReport:
    jacobi_residual: float
    conjugate_jacobi_residual: float
    end_values: np.ndarray
    spiny_point: np.ndarray


def support_field_check(data: sf.NullCurveData, n_samples=64, seed=0) -> SupportFieldReport:
    """Support function u = X . nu about the spiny point: L_g u and u(p_i)."""
    rep = spiny_test(asymptotic_planes(data))
    if not rep.is_spiny:
        raise NotSpiny(f"asymptotic planes miss a common point by {rep.residual:.2e}")
    x0 = rep.point
    z = random_parameters(data, n_samples, np.random.default_rng(seed))
    res = np.abs(jacobi_apply(data, support_field(), z, origin=x0)).max()
    resc = np.abs(jacobi_apply(data, conjugate_support_field(), z, origin=x0)).max()
    vals = []
    for end in data.ends:
        v, _ = _end_limit(data, end, lambda zz: float(local_frame(data, np.array([zz]), x0)
                                                         .support().val[0]))
        vals.append(v)
    return SupportFieldReport(float(res), float(resc), np.array(vals), x0)


# conformal density at infinity --------------------------------------------------------------

@dataclass(frozen=True)
class DensityRow:
    epsilon: float
    area: float
    defect: float


def _area_reducer(data):
    def reducer(pts):
        dphi = (np.array([f(pts.coords) for f in data.components]) if pts.chart == "z"
                else np.array([f(pts.coords) for f in data.components_w]))
        return (0.5 * (np.abs(dphi) ** 2).sum(axis=0) * pts.weights).sum()
    return reducer


def density_sweep(data: sf.NullCurveData, eps_list, chart_factor=1.0, tol=1e-9, **layout_kw):
    """Rows (eps, area of Sigma_eps, area - pi m / eps^2) for each eps.

    ``chart_factor`` rescales the normalized end charts (2 reproduces the
    mis-normalized control in which a is doubled).
    """
    sf.validate(data)
    ends = [replace(e, scale=e.scale * chart_factor) for e in data.ends]
    m = len(ends)
    layout = partition_layout(ends, eps_list, **layout_kw)
    vals, diag = regularized_integrals(_area_reducer(data), ends, layout, tol=tol,
                                       scale=1.0)
    rows = [DensityRow(e, float(v), float(v - np.pi * m / e ** 2)) for e, v in zip(layout.eps, vals)]
    order = np.argsort([-r.epsilon for r in rows])
    return [rows[i] for i in order]


def density_csv(rows) -> str:
    buf = io.StringIO()
    buf.write("epsilon,area,defect\n")
    for r in rows:
        buf.write(f"{r.epsilon:.17g},{r.area:.17g},{r.defect:.17g}\n")
    return buf.getvalue()


def fit_end_count(rows) -> float:
    """Least-squares fit area ~ c / eps^2 + d; returns c / pi."""
    e = np.array([r.epsilon for r in rows])
    A = np.stack([1 / e ** 2, np.ones_like(e)], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.array([r.area for r in rows]), rcond=None)
    return float(coef[0] / np.pi)
