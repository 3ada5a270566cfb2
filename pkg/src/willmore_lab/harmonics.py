"""Real spherical harmonics on the parameter sphere as exact jets.

The parameter sphere is identified with the extended plane by inverse
stereographic projection n(z) = (2 Re z, 2 Im z, |z|^2 - 1) / (|z|^2 + 1).
With t = n_3 and s = n_1 + i n_2 a harmonic of degree l and order m >= 0 is

    Y = N_lm Q_lm(t) Re(s^m)   or   N_lm Q_lm(t) Im(s^m),

where Q_lm = P_lm / (1 - t^2)^{m/2} is a polynomial.  Every function is
smooth on the sphere and its derivatives are available in closed form in
both the z chart and the w = 1/z chart.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import lgamma

import numpy as np

from .jets import Jet


@dataclass(frozen=True)
class HarmonicIndex:
    l: int
    m: int
    kind: str  # "c" (cosine / zonal) or "s" (sine)


def harmonic_indices(L: int, orders=None):
    """All (l, m, kind) with l <= L; optionally only orders m in ``orders``."""
    out = []
    for l in range(L + 1):
        for m in range(l + 1):
            if orders is not None and m not in orders:
                continue
            out.append(HarmonicIndex(l, m, "c"))
            if m > 0:
                out.append(HarmonicIndex(l, m, "s"))
    return out


def _norm(l, m):
    c = np.exp(0.5 * (np.log((2 * l + 1) / (4 * np.pi)) + lgamma(l - m + 1) - lgamma(l + m + 1)))
    return c * (np.sqrt(2.0) if m > 0 else 1.0)


def _q_table(L, t):
    """Q[l, m] = P_lm(t) / (1 - t^2)^{m/2} (Condon-Shortley phase) for l, m <= L+1."""
    Lp = L + 2
    Q = np.zeros((Lp, Lp) + t.shape)
    qmm = np.ones_like(t)
    for m in range(Lp):
        if m > 0:
            qmm = -(2 * m - 1) * qmm
        Q[m, m] = qmm
        if m + 1 < Lp:
            Q[m + 1, m] = t * (2 * m + 1) * qmm
        for l in range(m + 2, Lp):
            Q[l, m] = (t * (2 * l - 1) * Q[l - 1, m] - (l + m - 1) * Q[l - 2, m]) / (l - m)
    return Q


def harmonic_jets(indices, zeta, chart="z") -> Jet:
    """Jets of the harmonics at chart points ``zeta``; result has shape (n, npts).

    ``chart='w'`` means the points are w = 1/z and derivatives are taken in w.
    """
    zeta = np.asarray(zeta, dtype=complex).ravel()
    L = max(ix.l for ix in indices)
    r2 = np.abs(zeta) ** 2
    den = 1.0 + r2
    t = (r2 - 1.0) / den
    s = 2.0 * zeta / den
    sb = np.conj(s)
    dt = 2.0 * np.conj(zeta) / den ** 2
    ds = 2.0 / den ** 2
    dsb = -2.0 * np.conj(zeta) ** 2 / den ** 2
    Q = _q_table(L, t)
    Mmax = max(ix.m for ix in indices)
    spow = [np.ones_like(s)]
    sbpow = [np.ones_like(s)]
    for _ in range(Mmax):
        spow.append(spow[-1] * s)
        sbpow.append(sbpow[-1] * sb)
    n = len(indices)
    val = np.empty((n, zeta.size))
    d = np.empty((n, zeta.size), dtype=complex)
    for j, ix in enumerate(indices):
        l, m = ix.l, ix.m
        N = _norm(l, m)
        q = Q[l, m]
        dq = -Q[l, m + 1]  # d/dt Q_lm = -Q_l,m+1
        if m == 0:
            ang, dang = np.ones_like(s), np.zeros_like(s)
        else:
            # d(s^m)/dz and d(conj(s)^m)/dz
            a1 = m * spow[m - 1] * ds
            a2 = m * sbpow[m - 1] * dsb
            if ix.kind == "c":
                ang, dang = 0.5 * (spow[m] + sbpow[m]), 0.5 * (a1 + a2)
            else:
                ang, dang = (spow[m] - sbpow[m]) / 2j, (a1 - a2) / 2j
        sign = 1.0
        if chart == "w":
            sign = (-1.0) ** (l + m) * (-1.0 if ix.kind == "s" else 1.0)
        val[j] = sign * N * q * ang.real
        d[j] = sign * N * (dq * dt * ang.real + q * dang)
    lfac = np.array([ix.l * (ix.l + 1) for ix in indices], dtype=float)
    dd = -lfac[:, None] * val / den ** 2
    return Jet(val, d, dd)


def harmonic_values(indices, z) -> np.ndarray:
    """Values at global parameter points z (np.inf allowed); shape (n, npts)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.empty((len(indices), z.size))
    inner = np.isfinite(z) & (np.abs(z) <= 1)
    if inner.any():
        out[:, inner] = harmonic_jets(indices, z[inner], "z").val
    if (~inner).any():
        zz = z[~inner]
        w = np.where(np.isfinite(zz), 1.0 / np.where(np.isfinite(zz), zz, 1.0), 0.0)
        out[:, ~inner] = harmonic_jets(indices, w, "w").val
    return out
