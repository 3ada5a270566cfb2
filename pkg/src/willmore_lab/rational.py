"""Complex rational functions with explicit (double precision) coefficients.

A :class:`RationalFn` stores numerator and denominator coefficient arrays in
ascending degree.  Values are immutable; every operation returns a new object.
Reduction (cancellation of common factors) only happens when ``reduce`` is
called, so pole records of a given object never change behind the caller's back.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditioned, PoleEvaluation

EPS = np.finfo(float).eps

# clusters of companion eigenvalues closer than this (relative) are examined
# as one candidate multiple root
CLUSTER_TOL = 1e-4
# relative size below which a Taylor coefficient is treated as zero
ZERO_TOL = 1e-9


def _clean(c) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, dtype=complex)).ravel().copy()
    if c.size == 0:
        return np.zeros(1, dtype=complex)
    n = c.size
    while n > 1 and c[n - 1] == 0:
        n -= 1
    c = c[:n]
    c.setflags(write=False)
    return c


def horner(c, z):
    """Evaluate the ascending coefficient array ``c`` at ``z`` (vectorized)."""
    z = np.asarray(z, dtype=complex)
    out = np.full(z.shape, c[-1], dtype=complex)
    for a in c[-2::-1]:
        out = out * z + a
    return out


def _abs_horner(c, r):
    r = np.asarray(r, dtype=float)
    a = np.abs(c)
    out = np.full(r.shape, a[-1])
    for x in a[-2::-1]:
        out = out * r + x
    return out


def taylor_shift(c, z0) -> np.ndarray:
    """Coefficients of t -> c(z0 + t)."""
    a = np.array(c, dtype=complex)
    n = a.size
    for k in range(n - 1):
        for j in range(n - 2, k - 1, -1):
            a[j] += z0 * a[j + 1]
    return a


def _shift_scale(c, z0) -> np.ndarray:
    """Coefficients of t -> |c|(|z0| + t); the magnitude scale of ``taylor_shift``."""
    return np.abs(taylor_shift(np.abs(c), abs(z0)))


def series_divide(num, den, n) -> np.ndarray:
    """First ``n`` Taylor coefficients of num/den at 0 (den[0] != 0)."""
    num = np.concatenate([np.asarray(num, complex), np.zeros(n, complex)])[:n]
    den = np.concatenate([np.asarray(den, complex), np.zeros(n, complex)])[:n]
    out = np.zeros(n, dtype=complex)
    for j in range(n):
        acc = num[j] - np.dot(den[1:j + 1], out[j - 1::-1][:j]) if j else num[0]
        out[j] = acc / den[0]
    return out


@dataclass(frozen=True)
class PoleRecord:
    location: complex
    order: int
    residue: complex


class RationalFn:
    """num(z)/den(z) with ascending complex coefficient arrays."""

    __slots__ = ("num", "den", "_root")

    def __init__(self, num, den=(1.0,), root=None):
        """``root = (b, k)`` declares den == b^k; evaluation then uses b, which
        keeps full accuracy next to multiple poles."""
        num = _clean(num)
        den = _clean(den)
        if not np.any(den):
            raise ValueError("zero denominator polynomial")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "_root", None if root is None else (_clean(root[0]), int(root[1])))

    def __setattr__(self, name, value):
        raise AttributeError("RationalFn is immutable")

    # construction helpers
    @classmethod
    def constant(cls, c) -> "RationalFn":
        return cls([c])

    @classmethod
    def monomial(cls, k: int, c=1.0) -> "RationalFn":
        if k >= 0:
            return cls(np.r_[np.zeros(k), c])
        return cls([c], np.r_[np.zeros(-k), 1.0])

    @property
    def deg_num(self) -> int:
        return 0 if not np.any(self.num) else self.num.size - 1

    @property
    def deg_den(self) -> int:
        return self.den.size - 1

    @property
    def is_zero(self) -> bool:
        return not np.any(self.num)

    def scale(self) -> float:
        """Coefficient scale used by relative tolerances."""
        return float(max(np.abs(self.num).max(), 1e-300))

    def __repr__(self):
        return f"RationalFn(num={self.num.tolist()}, den={self.den.tolist()})"

    def __eq__(self, other):
        return (isinstance(other, RationalFn) and np.array_equal(self.num, other.num)
                and np.array_equal(self.den, other.den))

    __hash__ = None

    # evaluation
    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        big = np.abs(z) > 1.0
        out = np.empty(z.shape, dtype=complex)
        tiny = np.empty(z.shape, dtype=bool)
        base, power = self._root if self._root is not None else (self.den, 1)
        if np.any(~big):
            zs = z[~big]
            d = horner(base, zs)
            sd = _abs_horner(base, np.abs(zs))
            tiny[~big] = np.abs(d) <= 64 * EPS * sd
            with np.errstate(all="ignore"):
                out[~big] = horner(self.num, zs) / d ** power
        if np.any(big):
            zb = z[big]
            w = 1.0 / zb
            rn, rd = self.num[::-1], base[::-1]
            d = horner(rd, w)
            sd = _abs_horner(rd, np.abs(w))
            tiny[big] = np.abs(d) <= 64 * EPS * sd
            with np.errstate(all="ignore"):
                k = self.num.size - self.den.size
                out[big] = horner(rn, w) / d ** power * (zb ** k if k > 0 else w ** (-k))
        if np.any(tiny):
            bad = z[tiny].ravel()[0]
            raise PoleEvaluation(f"evaluation at a pole near z = {bad}")
        return out if out.ndim else out[()]

    # arithmetic
    def _coerce(self, other):
        if isinstance(other, RationalFn):
            return other
        return RationalFn([complex(other)])

    def __add__(self, other):
        o = self._coerce(other)
        if np.array_equal(self.den, o.den):
            return RationalFn(_padd(self.num, o.num), self.den, self._root or o._root)
        return RationalFn(_padd(np.convolve(self.num, o.den), np.convolve(o.num, self.den)),
                          np.convolve(self.den, o.den))

    __radd__ = __add__

    def __neg__(self):
        return RationalFn(-self.num, self.den, self._root)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, RationalFn):
            return RationalFn(self.num * complex(other), self.den, self._root)
        return RationalFn(np.convolve(self.num, other.num), np.convolve(self.den, other.den))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, RationalFn):
            return RationalFn(self.num / complex(other), self.den, self._root)
        if other.is_zero:
            raise ZeroDivisionError("division by the zero rational function")
        if np.array_equal(self.den, other.den):
            return RationalFn(self.num, other.num)
        return RationalFn(np.convolve(self.num, other.den), np.convolve(self.den, other.num))

    def derivative(self) -> "RationalFn":
        return derivative(self)

    def poles(self):
        return poles(self)

    def residue_at(self, z0):
        return residue_at(self, z0)

    def reduce(self, tol=1e-6):
        return reduce(self, tol)


def _padd(a, b):
    n = max(a.size, b.size)
    out = np.zeros(n, dtype=complex)
    out[:a.size] += a
    out[:b.size] += b
    return out


def _pder(c):
    if c.size == 1:
        return np.zeros(1, dtype=complex)
    return c[1:] * np.arange(1, c.size)


def evaluate(R: RationalFn, z):
    return R(z)


def derivative(R: RationalFn) -> RationalFn:
    """Quotient rule (N'D - ND')/D^2."""
    if R.den.size == 1:
        return RationalFn(_pder(R.num) / R.den[0])
    b, k = R._root if R._root is not None else (R.den, 1)
    num = _padd(np.convolve(_pder(R.num), b), -k * np.convolve(R.num, _pder(b)))
    den = b
    for _ in range(k):
        den = np.convolve(den, b)
    return RationalFn(num, den, root=(b, k + 1))


# roots ------------------------------------------------------------------------

def _nth_derivative(c, k):
    for _ in range(k):
        c = _pder(c)
    return c


def _polish(c, z, iters=30):
    dc = _pder(c)
    for _ in range(iters):
        f = horner(c, z)
        df = horner(dc, z)
        if df == 0:
            break
        step = f / df
        z = z - step
        if abs(step) <= 4 * EPS * max(1.0, abs(z)):
            break
    return complex(z)


def certified_roots(c, cluster_tol=CLUSTER_TOL):
    """Roots of an ascending coefficient polynomial as (location, multiplicity).

    Companion eigenvalues are clustered; each cluster is polished by Newton's
    method on the derivative of order (multiplicity-1) and certified by the
    vanishing of all lower derivatives.  Clusters that fail certification raise
    :class:`IllConditioned` instead of being merged silently.
    """
    c = _clean(c)
    if c.size <= 1:
        return []
    raw = np.roots(c[::-1])
    n = raw.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(raw[i] - raw[j]) <= cluster_tol * max(1.0, abs(raw[i]), abs(raw[j])):
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(raw[i])
    out = []
    for members in groups.values():
        e = len(members)
        z = _polish(_nth_derivative(c, e - 1), complex(np.mean(members)))
        for k in range(e):
            ck = _nth_derivative(c, k)
            val = abs(horner(ck, z))
            scale = float(_abs_horner(ck, abs(z)))
            tol = 1e-13 if k == e - 1 else ZERO_TOL
            if val > tol * max(scale, 1e-300):
                raise IllConditioned(
                    f"root cluster of size {e} near {z} cannot be certified "
                    f"(derivative {k} residual {val / scale:.2e})")
        out.append((z, e))
    out.sort(key=lambda t: (round(t[0].real, 12), round(t[0].imag, 12)))
    return out


# Laurent expansions ---------------------------------------------------------------

def _pole_order_at(R: RationalFn, z0) -> int:
    d = taylor_shift(R.den, z0)
    s = _shift_scale(R.den, z0)
    e = 0
    while e < d.size - 1 and abs(d[e]) <= ZERO_TOL * s[e]:
        e += 1
    return e


def laurent(R: RationalFn, z0, n_terms: int, order: int | None = None):
    """Laurent coefficients of R at z0.

    Returns ``(e, c)`` where ``c[j]`` multiplies ``(z - z0)**(j - e)``; ``e`` is
    the multiplicity of z0 as a root of the denominator (not reduced against
    the numerator, so leading coefficients may vanish).
    """
    e = _pole_order_at(R, z0) if order is None else int(order)
    d = taylor_shift(R.den, z0)[e:]
    nshift = taylor_shift(R.num, z0)
    return e, series_divide(nshift, d, n_terms)


def residue_at(R: RationalFn, z0) -> complex:
    """Coefficient of (z - z0)^-1; zero at regular points."""
    e = _pole_order_at(R, z0)
    if e == 0:
        return 0j
    _, c = laurent(R, z0, e, order=e)
    return complex(c[e - 1])


def contour_residue(R: RationalFn, z0, radius: float, n: int = 128) -> complex:
    """Residue by trapezoidal quadrature on a small circle (independent route)."""
    t = np.exp(2j * np.pi * np.arange(n) / n)
    return complex(np.mean(R(z0 + radius * t) * radius * t))


def residue_at_infinity(R: RationalFn) -> complex:
    """Residue of the 1-form R dz at infinity: -(coefficient of 1/z at infinity)."""
    return residue_at(mobius_pullback(R, Mobius.inversion(), form=True), 0.0)


def poles(R: RationalFn):
    """All denominator roots with multiplicities and residues."""
    out = []
    for z, e in certified_roots(R.den):
        _, c = laurent(R, z, e, order=e)
        out.append(PoleRecord(z, e, complex(c[e - 1])))
    return out


def _deflate(c, z):
    """Divide ascending coefficients c by (x - z), dropping the remainder."""
    q, _ = np.polynomial.polynomial.polydiv(c, np.array([-z, 1.0], dtype=complex))
    return np.asarray(q, dtype=complex)


def _vanishing_order(c, z, tol, limit):
    """Number of leading derivatives of c vanishing at z (relative test)."""
    k = 0
    while k < limit and c.size > 1:
        if abs(horner(c, z)) > tol * max(_abs_horner(c, abs(z)), 1e-300):
            break
        c = _pder(c)
        k += 1
    return k


def reduce(R: RationalFn, tol: float = 1e-6) -> RationalFn:
    """Cancel numerically common roots of numerator and denominator.

    Denominator roots are certified and polished first; the numerator is
    tested at each of them and common factors are removed by deflation so
    that the surviving coefficients keep full accuracy.
    """
    if R.is_zero:
        return RationalFn([0.0])
    if R.den.size <= 1 or R.num.size <= 1:
        return R
    try:
        droots = certified_roots(R.den)
    except IllConditioned:
        droots = [(r, 1) for r in np.roots(R.den[::-1])]
    num, den = R.num.copy(), R.den.copy()
    changed = False
    for z, e in droots:
        k = _vanishing_order(num, z, tol, e)
        for _ in range(k):
            num, den = _deflate(num, z), _deflate(den, z)
            changed = True
    return RationalFn(num, den) if changed else R


def degree(R: RationalFn) -> int:
    """Degree of R as a map of the Riemann sphere (R assumed reduced)."""
    return max(R.deg_num, R.deg_den)


def antiderivative(R: RationalFn, tol: float = 1e-9) -> RationalFn:
    """Rational primitive of R; requires every residue to vanish."""
    q, _ = np.polynomial.polynomial.polydiv(R.num, R.den) if R.num.size >= R.den.size else (np.zeros(1), None)
    q = np.asarray(q, dtype=complex)
    recs = []
    for z, e in certified_roots(R.den):
        _, c = laurent(R, z, e, order=e)
        scale = max(np.abs(c).max(), 1e-300)
        if abs(c[e - 1]) > tol * scale:
            raise ValueError(f"nonzero residue {c[e - 1]} at {z}: no rational primitive")
        recs.append((z, e, c))
    qint = np.r_[0.0, q / np.arange(1, q.size + 1)]
    P = np.polynomial.polynomial
    den = np.array([1.0 + 0j])
    for z, e, _ in recs:
        den = P.polymul(den, P.polypow([-z, 1.0], e - 1))
    num = P.polymul(qint, den)
    for i, (z, e, c) in enumerate(recs):
        other = np.array([1.0 + 0j])
        for j, (z2, e2, _) in enumerate(recs):
            if j != i:
                other = P.polymul(other, P.polypow([-z2, 1.0], e2 - 1))
        # c[j] multiplies (z - z0)^(j - e); term of order -k integrates to
        # -c/(k-1) (z - z0)^-(k-1)
        for k in range(2, e + 1):
            coef = -c[e - k] / (k - 1)
            factor = P.polymul(other, P.polypow([-z, 1.0], (e - 1) - (k - 1)))
            num = P.polyadd(num, coef * factor)
    return RationalFn(num, den)


# chart changes --------------------------------------------------------------------

@dataclass(frozen=True)
class Mobius:
    """Chart change w = 1/z (kind 'inversion') or w = alpha z + beta ('affine')."""

    kind: str
    alpha: complex = 1.0
    beta: complex = 0.0

    @classmethod
    def inversion(cls):
        return cls("inversion")

    @classmethod
    def affine(cls, alpha, beta=0.0):
        if alpha == 0:
            raise ValueError("degenerate affine map")
        return cls("affine", complex(alpha), complex(beta))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "inversion":
            return 1.0 / z
        return self.alpha * z + self.beta

    def inverse(self, w):
        w = np.asarray(w, dtype=complex)
        if self.kind == "inversion":
            return 1.0 / w
        return (w - self.beta) / self.alpha

    def jacobian(self) -> RationalFn:
        """dz/dw as a rational function of w."""
        if self.kind == "inversion":
            return RationalFn([-1.0], [0.0, 0.0, 1.0])
        return RationalFn([1.0 / self.alpha])


def mobius_pullback(R: RationalFn, m: Mobius, form: bool = False) -> RationalFn:
    """R expressed in the coordinate w = m(z).

    With ``form=False`` returns w -> R(m^-1(w)); with ``form=True`` returns the
    coefficient of the 1-form R dz written as (...) dw.
    """
    if m.kind == "inversion":
        shift = R.den.size - R.num.size
        rn, rd = R.num[::-1], R.den[::-1]
        if shift >= 0:
            out = RationalFn(np.r_[np.zeros(shift), rn], rd)
        else:
            out = RationalFn(rn, np.r_[np.zeros(-shift), rd])
    else:
        inv_a = 1.0 / m.alpha

        def comp(c):
            return taylor_shift(c * inv_a ** np.arange(c.size), -m.beta)

        out = RationalFn(comp(R.num), comp(R.den))
    if form:
        out = out * m.jacobian()
    if m.kind == "inversion":
        out = _cancel_origin(out)
        if R._root is not None:
            out = _adopt_root(out, R._root[0][::-1], R._root[1])
    return out


def _poly_sqrt(c):
    """b with b^2 = c, solved from the leading coefficient down."""
    n2 = c.size - 1
    if n2 % 2:
        return None
    n = n2 // 2
    b = np.zeros(n + 1, dtype=complex)
    b[n] = np.sqrt(complex(c[-1]))
    for j in range(n - 1, -1, -1):
        # coefficient of z^{n + j} in b^2
        acc = sum(b[i] * b[n + j - i] for i in range(j + 1, n))
        b[j] = (c[n + j] - acc) / (2 * b[n])
    return b


def with_square_root(R: RationalFn) -> RationalFn:
    """R with the factorization den = b^2 attached when the denominator is a square."""
    if R._root is not None or R.den.size < 3:
        return R
    b = _poly_sqrt(R.den)
    if b is None:
        return R
    return _adopt_root(R, b, 2)


def _adopt_root(R: RationalFn, b, k) -> RationalFn:
    """Attach the factorization den = b^k when it holds to rounding."""
    b = _clean(b)
    full = b
    for _ in range(k - 1):
        full = np.convolve(full, b)
    if full.size != R.den.size:
        return R
    lead = R.den[-1] / full[-1]
    if np.abs(R.den - lead * full).max() > 1e-13 * np.abs(R.den).max():
        return R
    return RationalFn(R.num, R.den, root=(b * complex(lead) ** (1.0 / k), k))


def _cancel_origin(R: RationalFn) -> RationalFn:
    """Remove exact common factors w^k (leading zero coefficients)."""
    def zeros(c):
        nz = np.flatnonzero(c)
        return int(nz[0]) if nz.size else c.size
    k = min(zeros(R.num), zeros(R.den))
    if k == 0 or k >= R.den.size:
        return R
    return RationalFn(R.num[k:], R.den[k:])
