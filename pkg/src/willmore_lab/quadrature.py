"""Quadrature on the parameter sphere, with punctured end disks.

Points are always delivered in one of two charts of the Riemann sphere: the
global coordinate z (``chart='z'``) or w = 1/z (``chart='w'``).  Weights are
area elements of the chart coordinate, so integrating a density given per
unit chart area needs no further Jacobian.

Integrals over Sigma_eps (the sphere minus the disks |zeta| < eps in the
normalized end charts) are split with a smooth partition of unity: each end
carries a bump chi(|zeta| / R0) that is one near the end and zero outside
|zeta| = R0; the bump part is integrated in polar coordinates of zeta on
geometric radial panels whose edges contain every requested eps, and the
remainder (1 - sum chi) is integrated on a Gauss-Legendre x trapezoid grid
of the sphere refined by doubling.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import OverlappingEndDisks, QuadratureNonconvergence

CHUNK = 8192


@dataclass(frozen=True)
class ChartPoints:
    chart: str
    coords: np.ndarray
    weights: np.ndarray

    @property
    def size(self):
        return self.coords.size

    def global_z(self):
        if self.chart == "z":
            return self.coords
        with np.errstate(divide="ignore"):
            return 1.0 / self.coords

    def chunks(self, size=CHUNK):
        for k in range(0, self.size, size):
            yield ChartPoints(self.chart, self.coords[k:k + size], self.weights[k:k + size])

    def masked(self, keep):
        return ChartPoints(self.chart, self.coords[keep], self.weights[keep])

    def reweighted(self, factor):
        return ChartPoints(self.chart, self.coords, self.weights * factor)


def sphere_rule(n: int):
    """Gauss-Legendre in cos(theta) (n nodes) x trapezoid in phi (2n nodes).

    Returns two :class:`ChartPoints`: the hemisphere |z| <= 1 in the z chart
    and the complementary one in the w chart.
    """
    x, wx = np.polynomial.legendre.leggauss(n)
    phi = 2 * np.pi * (np.arange(2 * n) + 0.5) / (2 * n)
    ct, ph = np.meshgrid(x, phi, indexing="ij")
    wS = np.outer(wx, np.full(2 * n, np.pi / n))
    # z = cot(theta/2) e^{i phi}; |z| <= 1 iff cos(theta) <= 0
    r = np.sqrt((1 + ct) / (1 - ct))
    out = []
    lower = ct <= 0
    z = (r * np.exp(1j * ph))[lower]
    out.append(ChartPoints("z", z, (wS[lower] * (1 + np.abs(z) ** 2) ** 2 / 4)))
    w = ((1 / r) * np.exp(-1j * ph))[~lower]
    out.append(ChartPoints("w", w, (wS[~lower] * (1 + np.abs(w) ** 2) ** 2 / 4)))
    return out


def integrate(reducer, rules):
    """Sum ``reducer(points)`` over chunks of every rule."""
    total = None
    for rule in rules:
        for ch in rule.chunks():
            if ch.size == 0:
                continue
            part = reducer(ch)
            total = part if total is None else total + part
    return total


def adaptive_sphere(reducer, n0=48, tol=1e-10, nmax=1536, scale=None, weight=None):
    """Integrate over the whole sphere, doubling n until two levels agree.

    ``weight(points)`` optionally multiplies the weights (partition of
    unity) and may return a boolean mask of points to drop.  Returns
    (value, error estimate, final n).
    """
    prev = None
    n = n0
    while n <= nmax:
        rules = []
        for rule in sphere_rule(n):
            if weight is not None:
                fac = weight(rule)
                keep = fac != 0
                rule = rule.masked(keep).reweighted(fac[keep])
            rules.append(rule)
        val = integrate(reducer, rules)
        if prev is not None:
            err = float(np.max(np.abs(np.asarray(val) - np.asarray(prev))))
            ref = scale if scale is not None else max(1.0, float(np.max(np.abs(val))))
            if err <= tol * ref:
                return val, err, n
        prev = val
        n *= 2
    raise QuadratureNonconvergence(f"sphere quadrature did not converge by n = {nmax}")


# partition of unity around the ends ---------------------------------------------------------

def _smooth_step(x):
    """C-infinity function: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def bump(t, lo):
    """1 for t <= lo, 0 for t >= 1, smooth in between."""
    return 1.0 - _smooth_step((np.asarray(t) - lo) / (1.0 - lo))


def end_zeta(end, points: ChartPoints):
    """Normalized end-chart coordinate of each point (inf where undefined)."""
    c = points.coords
    with np.errstate(divide="ignore", invalid="ignore"):
        if end.at_infinity:
            w = c if points.chart == "w" else np.where(c != 0, 1.0 / c, np.inf)
            return end.scale * w
        z = c if points.chart == "z" else np.where(c != 0, 1.0 / c, np.inf)
        return end.scale * (z - end.location)


def max_patch_radius(ends) -> float:
    """Largest R such that the chart disks |zeta| < R of all ends are disjoint."""
    finite = [e for e in ends if not e.at_infinity]
    inf = [e for e in ends if e.at_infinity]
    best = np.inf
    for i, a in enumerate(finite):
        for b in finite[i + 1:]:
            best = min(best, abs(a.location - b.location) / (1 / abs(a.scale) + 1 / abs(b.scale)))
    for e in inf:
        s = abs(e.scale)
        for a in finite:
            # |z - p| < R / s_a and |z| > s / R must be disjoint: |p| + R/s_a <= s/R
            pa, sa = abs(a.location), abs(a.scale)
            R = (-pa + np.sqrt(pa ** 2 + 4 * s / sa)) / (2 / sa)
            best = min(best, R)
    return float(best)


@dataclass(frozen=True)
class EndPatchLayout:
    R0: float
    lo: float
    eps: tuple
    n_theta: int = 64
    order: int = 12
    ratio: float = 1.41

    def radial_edges(self):
        stops = sorted(set([float(e) for e in self.eps] + [self.lo * self.R0, self.R0]))
        edges = [stops[0]]
        for a, b in zip(stops[:-1], stops[1:]):
            k = max(1, int(np.ceil(np.log(b / a) / np.log(self.ratio))))
            edges.extend(list(np.geomspace(a, b, k + 1)[1:]))
        return np.array(edges)

    def panels(self, end):
        """Yield (inner radius, ChartPoints) per radial panel of one end."""
        gx, gw = np.polynomial.legendre.leggauss(self.order)
        th = 2 * np.pi * np.arange(self.n_theta) / self.n_theta
        e_th = np.exp(1j * th)
        s = abs(end.scale)
        phase = end.scale / s
        edges = self.radial_edges()
        for a, b in zip(edges[:-1], edges[1:]):
            r = 0.5 * (b - a) * gx + 0.5 * (b + a)
            wr = 0.5 * (b - a) * gw * r * (2 * np.pi / self.n_theta)
            chi = bump(r / self.R0, self.lo)
            zeta = (r[:, None] * e_th[None, :]).ravel()
            wts = np.repeat(wr * chi, self.n_theta) / s ** 2
            local = zeta / (s * phase)
            if end.at_infinity:
                yield a, ChartPoints("w", local, wts)
            else:
                yield a, ChartPoints("z", end.location + local, wts)


def partition_layout(ends, eps, lo=0.35, fraction=0.95, **kw) -> EndPatchLayout:
    eps = tuple(sorted(float(e) for e in eps))
    Rmax = max_patch_radius(ends)
    R0 = fraction * Rmax
    if not np.isfinite(R0):
        R0 = 1.0
    if eps[-1] > lo * R0:
        raise OverlappingEndDisks(
            f"eps = {eps[-1]} exceeds the admissible end-disk radius {lo * R0:.4g}")
    return EndPatchLayout(R0=R0, lo=lo, eps=eps, **kw)


def remainder_weight(ends, layout: EndPatchLayout):
    def weight(points):
        fac = np.ones(points.size)
        for e in ends:
            fac = fac - bump(np.abs(end_zeta(e, points)) / layout.R0, layout.lo)
        fac[np.abs(fac) < 1e-15] = 0.0
        return fac
    return weight


def _panel_sums(reducer, ends, layout: EndPatchLayout):
    parts = {}
    for end in ends:
        for a, pts in layout.panels(end):
            parts.setdefault(a, []).append(integrate(reducer, [pts]))
    return {a: sum(v[1:], v[0]) for a, v in parts.items()}


def regularized_integrals(reducer, ends, layout: EndPatchLayout, tol=1e-10, n0=48, nmax=1536,
                          scale=None, max_refine=4):
    """Integrals of a density over Sigma_eps for every eps of ``layout``.

    The end panels are refined (angular nodes and radial order doubled) until
    the cumulative panel sums of two levels agree to ``tol``.  Returns
    (values in the order of ``layout.eps`` (ascending), dict of diagnostics).
    """
    rest, rest_err, n_used = adaptive_sphere(reducer, n0=n0, tol=tol, nmax=nmax, scale=scale,
                                             weight=remainder_weight(ends, layout))
    eps = np.array(layout.eps)
    ref = scale if scale is not None else max(1.0, float(np.max(np.abs(rest))))

    def cumulative(sums):
        inner = sorted(sums)
        out = []
        for e in eps:
            acc = 0.0
            for a in inner:
                if a >= e * (1 - 1e-12):
                    acc = acc + sums[a]
            out.append(acc)
        return out

    cur = layout
    prev = cumulative(_panel_sums(reducer, ends, cur))
    panel_err = np.inf
    for _ in range(max_refine):
        cur = replace(cur, n_theta=2 * cur.n_theta, order=2 * cur.order)
        now = cumulative(_panel_sums(reducer, ends, cur))
        panel_err = max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)))) for x, y in zip(now, prev))
        prev = now
        if panel_err <= tol * ref:
            break
    else:
        raise QuadratureNonconvergence(f"end panel quadrature did not converge "
                                       f"(change {panel_err:.2e})")
    out = [rest + p for p in prev]
    return out, {"remainder": rest, "remainder_error": rest_err, "sphere_n": n_used,
                 "panel_error": panel_err, "panel_n_theta": cur.n_theta, "panel_order": cur.order}
