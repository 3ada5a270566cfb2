"""Second variation of the Willmore energy of the inverted sphere.

A normal variation v n_Psi of Psi = X / |X|^2 corresponds to the variation
w = |X|^2 v of the minimal surface, and the second variation is the limit

    Q(u, v) = lim_{eps -> 0} 1/2 int_{Sigma_eps} L_g(|X|^2 u) L_g(|X|^2 v) dmu_g
              - 8 pi / eps^2 sum_i u(p_i) v(p_i),

with Sigma_eps the surface minus the disks |zeta| < eps of the normalized end
charts.  The form is assembled on a Galerkin basis of real spherical
harmonics of the parameter sphere for several eps and extrapolated; the
inertia of the pencil (Q, M), with M the L^2 Gram matrix in the metric of
Psi, gives the Morse index.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from . import surface as sf
from .errors import (EigenFailure, EndValueDegenerate, NonconvergentEntry, SymmetryMismatch,
                     UnequalEndValues)
from .geometry import LocalFrame, local_frame, scale_of, _check_origin
from .harmonics import HarmonicIndex, harmonic_indices, harmonic_jets, harmonic_values
from .jets import Jet
from .quadrature import (adaptive_sphere, integrate, partition_layout, regularized_integrals,
                         sphere_rule)

DEFAULT_EPS = (0.04, 0.02, 0.01, 0.005)


# scalar fields on the parameter sphere ----------------------------------------------------

class Field:
    """A finite family of smooth functions on the parameter sphere."""

    size: int

    def jet(self, fr: LocalFrame) -> Jet:
        """Jets (size, npts) of the functions in the chart of ``fr``."""
        raise NotImplementedError

    def weighted(self, fr: LocalFrame):
        """(values v, jet of |X|^2 v)."""
        v = self.jet(fr)
        return v.val, v * fr.sqnorm()

    def end_values(self, data) -> np.ndarray:
        """Values at the ends, shape (size, m)."""
        raise NotImplementedError


class HarmonicField(Field):
    def __init__(self, indices: Sequence[HarmonicIndex]):
        self.indices = list(indices)
        self.size = len(self.indices)

    def jet(self, fr):
        return harmonic_jets(self.indices, fr.coords, fr.chart)

    def end_values(self, data):
        return harmonic_values(self.indices, [e.location for e in data.ends])


class InvertedNormalField(Field):
    """Components n_Psi^k of the normal of Psi (the translation Jacobi fields)."""

    def __init__(self, ks=(0, 1, 2)):
        self.ks = list(ks)
        self.size = len(self.ks)

    def weighted(self, fr):
        W = fr.weighted_inverted_normal()[self.ks]
        return fr.inverted_normal()[self.ks], W

    def jet(self, fr):
        W = fr.weighted_inverted_normal()[self.ks]
        r = fr.sqnorm().reciprocal()
        return W * Jet(r.val[None], r.d[None], r.dd[None])

    def end_values(self, data):
        # X . nu stays bounded and |X| -> infinity at an end, so n_Psi -> nu(p_i)
        return np.array([e.normal for e in data.ends]).T[self.ks]


class BumpField(Field):
    """exp(1 - 1/(1 - t)) with t = |z - z0|^2 / r^2, supported in |z - z0| < r."""

    def __init__(self, z0, r):
        self.z0, self.r = complex(z0), float(r)
        self.size = 1

    def jet(self, fr):
        if fr.chart == "z":
            c = fr.coords - self.z0
            t = Jet(np.abs(c) ** 2 / self.r ** 2, np.conj(c) / self.r ** 2,
                    np.full(c.shape, 1.0 / self.r ** 2))
        else:
            # t as a function of w through z = 1/w
            w = fr.coords
            z = 1.0 / w
            c = z - self.z0
            dz = -1.0 / w ** 2
            t = Jet(np.abs(c) ** 2 / self.r ** 2, np.conj(c) * dz / self.r ** 2,
                    np.abs(dz) ** 2 / self.r ** 2)
        s = np.clip(1.0 - t.val, 0.0, None)
        inside = s > 1e-3
        ss = np.where(inside, s, 1.0)
        f0 = np.where(inside, np.exp(1.0 - 1.0 / ss), 0.0)
        f1 = np.where(inside, -f0 / ss ** 2, 0.0)
        f2 = np.where(inside, f0 * (1.0 / ss ** 4 - 2.0 / ss ** 3), 0.0)
        j = t.compose(f0, f1, f2)
        return Jet(j.val[None], j.d[None], j.dd[None])

    def end_values(self, data):
        vals = []
        for e in data.ends:
            if e.at_infinity:
                vals.append(0.0)
            else:
                t = abs(e.location - self.z0) ** 2 / self.r ** 2
                vals.append(np.exp(1 - 1 / (1 - t)) if t < 1 else 0.0)
        return np.array([vals])


class StackedField(Field):
    def __init__(self, parts: Sequence[Field]):
        self.parts = list(parts)
        self.size = sum(p.size for p in self.parts)

    def weighted(self, fr):
        vs, Ws = zip(*(p.weighted(fr) for p in self.parts))
        return (np.concatenate(vs, axis=0),
                Jet(np.concatenate([W.val for W in Ws]), np.concatenate([W.d for W in Ws]),
                    np.concatenate([W.dd for W in Ws])))

    def jet(self, fr):
        js = [p.jet(fr) for p in self.parts]
        return Jet(np.concatenate([j.val for j in js]), np.concatenate([j.d for j in js]),
                   np.concatenate([j.dd for j in js]))

    def end_values(self, data):
        return np.concatenate([p.end_values(data) for p in self.parts], axis=0)


class CombinedField(Field):
    """A single function sum_j c_j f_j of another field family."""

    def __init__(self, base: Field, coeffs):
        self.base = base
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.size = 1

    def weighted(self, fr):
        v, W = self.base.weighted(fr)
        c = self.coeffs[:, None]
        return ((c * v).sum(axis=0)[None],
                Jet((c * W.val).sum(axis=0)[None], (c * W.d).sum(axis=0)[None],
                    (c * W.dd).sum(axis=0)[None]))

    def jet(self, fr):
        j = self.base.jet(fr)
        c = self.coeffs[:, None]
        return Jet((c * j.val).sum(axis=0)[None], (c * j.d).sum(axis=0)[None],
                   (c * j.dd).sum(axis=0)[None])

    def end_values(self, data):
        return (self.coeffs @ self.base.end_values(data))[None]


@dataclass
class GalerkinBasis:
    """Real spherical harmonics up to degree L (optionally selected orders),
    followed by any extra fields."""

    L: int
    orders: Optional[Sequence[int]] = None
    extra: Sequence[Field] = ()

    def __post_init__(self):
        self.indices = harmonic_indices(self.L, self.orders)
        self.field = StackedField([HarmonicField(self.indices)] + list(self.extra))

    @property
    def size(self):
        return self.field.size

    @property
    def n_harmonic(self):
        return len(self.indices)

    def end_values(self, data):
        return self.field.end_values(data)


# assembly ------------------------------------------------------------------------------

def _jacobi_values(fr: LocalFrame, W: Jet):
    return 4.0 * W.dd / fr.e2l - 2.0 * fr.K * W.val


def _form_reducer(data, fld: Field):
    def reducer(pts):
        fr = local_frame(data, pts)
        _check_origin(data, fr.X)
        _, W = fld.weighted(fr)
        F = _jacobi_values(fr, W)
        return 0.5 * (F * (fr.e2l * pts.weights)) @ F.T
    return reducer


@dataclass
class FormSequence:
    eps: tuple
    matrices: list
    end_values: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def end_correction(U, eps) -> np.ndarray:
    """(8 pi / eps^2) sum_i u(p_i) v(p_i) for end values U of shape (n, m)."""
    U = np.asarray(U, dtype=float)
    return (8 * np.pi / eps ** 2) * (U @ U.T)


def assemble_form_eps(data: sf.NullCurveData, basis, eps=DEFAULT_EPS, tol=1e-9, **layout_kw):
    """Q_eps for every eps in one pass (shared remainder, nested end panels)."""
    sf.validate(data)
    fld = basis.field if isinstance(basis, GalerkinBasis) else basis
    layout = partition_layout(data.ends, eps, **layout_kw)
    ints, diag = regularized_integrals(_form_reducer(data, fld), data.ends, layout, tol=tol)
    U = fld.end_values(data)
    mats = []
    for e, I in zip(layout.eps, ints):
        Q = I - end_correction(U, e)
        mats.append(0.5 * (Q + Q.T))
    # descending eps for reporting
    order = np.argsort(layout.eps)[::-1]
    diag.update({"R0": layout.R0, "lo": layout.lo})
    return FormSequence(tuple(layout.eps[i] for i in order), [mats[i] for i in order], U, diag)


@dataclass
class QuadraticForm:
    Q: np.ndarray
    M: Optional[np.ndarray]
    eps: tuple
    order: float
    fit_residual: np.ndarray
    flagged: list
    scale: float


def _detect_order(eps, D, scale):
    """Weighted median of log(D_k / D_{k+1}) / log(eps_k / eps_{k+1}) over the
    last two differences, weighted by the size of the entries."""
    d1, d2 = D[-2], D[-1]
    big = (np.abs(d1) > 1e-10 * scale) & (d2 != 0)
    if not big.any():
        return np.inf
    lr = np.log(np.abs(d1[big] / d2[big])) / np.log(eps[-2] / eps[-1])
    w = np.abs(d1[big])
    idx = np.argsort(lr)
    cw = np.cumsum(w[idx])
    return float(lr[idx][np.searchsorted(cw, 0.5 * cw[-1])])


def extrapolate_form(seq, tol=1e-4, strict=True, order=None) -> QuadraticForm:
    """Entrywise fit Q_eps = Q + c eps^r with a detected common order r.

    ``seq`` is a :class:`FormSequence` or a list of (eps, matrix) pairs.
    The order is read from the ratio of successive differences of the
    largest entries; every entry is then fitted by least squares over all
    eps and entries whose fit residual exceeds ``tol`` times the form scale
    are flagged (``NonconvergentEntry`` when ``strict``).
    """
    if isinstance(seq, FormSequence):
        pairs = list(zip(seq.eps, seq.matrices))
    else:
        pairs = list(seq)
    if len(pairs) < 3:
        raise ValueError("at least three eps values are needed")
    pairs.sort(key=lambda p: -p[0])
    eps = np.array([p[0] for p in pairs], dtype=float)
    A = np.array([np.asarray(p[1], dtype=float) for p in pairs])
    shape = A.shape[1:]
    scale = float(np.abs(A[-1]).max()) or 1.0
    D = np.diff(A, axis=0)
    if order is None:
        order = _detect_order(eps, D, scale)
    if not np.isfinite(order) or order <= 0:
        Q = A[-1]
        res = np.abs(A - A[-1]).max(axis=0)
        order_out = np.inf
    else:
        basis = np.stack([np.ones_like(eps), eps ** order], axis=1)
        flat = A.reshape(len(eps), -1)
        coef, *_ = np.linalg.lstsq(basis, flat, rcond=None)
        Q = coef[0].reshape(shape)
        res = np.abs(basis @ coef - flat).max(axis=0).reshape(shape)
        order_out = order
    Q = 0.5 * (Q + Q.T)
    flagged = [tuple(int(i) for i in ix) for ix in np.argwhere(res > tol * scale)]
    if flagged and strict:
        raise NonconvergentEntry(f"{len(flagged)} entries do not follow eps^{order_out:.3g} "
                                 f"(worst residual {res.max():.2e}, scale {scale:.2e})")
    return QuadraticForm(Q, None, tuple(eps), order_out, res, flagged, scale)


def mass_matrix(data: sf.NullCurveData, basis, tol=1e-10, check=True) -> np.ndarray:
    """Gram matrix int u v dmu of the inverted surface Psi."""
    if check:
        sf.validate(data)
    fld = basis.field if isinstance(basis, GalerkinBasis) else basis

    def reducer(pts):
        fr = local_frame(data, pts)
        _check_origin(data, fr.X)
        v = fld.jet(fr).val
        sq = (fr.X ** 2).sum(axis=0)
        return (v * (fr.e2l / sq ** 2 * pts.weights)) @ v.T

    M, _, _ = adaptive_sphere(reducer, tol=tol)
    return 0.5 * (M + M.T)


# spectra -------------------------------------------------------------------------------

@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    inertia: tuple
    tau: float
    sweep: list
    stable: bool
    vectors: np.ndarray
    equivariant: bool = False
    order: float = float("nan")
    notes: list = field(default_factory=list)

    @property
    def index(self) -> int:
        return self.inertia[0]

    @property
    def verdict(self) -> str:
        return "STABLE" if self.stable else "UNSTABLE"


def _inertia(lam, tau):
    return (int(np.sum(lam < -tau)), int(np.sum(np.abs(lam) <= tau)), int(np.sum(lam > tau)))


def morse_index(Q, M, tau_rel=1e-4, sweep=np.geomspace(0.1, 1.0, 11)) -> SpectralReport:
    """Inertia of the pencil Q x = lambda M x with zero band tau = tau_rel max|lambda|.

    The count is repeated for band widths ``sweep * tau`` (default: the decade
    below tau); ``stable`` is False if n_minus changes anywhere in the sweep.
    """
    Q = np.asarray(Q, dtype=float)
    M = np.asarray(M, dtype=float)
    if np.abs(Q - Q.T).max() > 1e-10 * max(np.abs(Q).max(), 1e-300):
        raise EigenFailure("Q is not symmetric")
    try:
        lam, vec = scipy.linalg.eigh(Q, M)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigenFailure(str(exc)) from exc
    tau = tau_rel * float(np.abs(lam).max())
    rows = [(float(tau * s),) + _inertia(lam, tau * s) for s in sweep]
    return SpectralReport(lam, _inertia(lam, tau), tau, rows, len({r[1] for r in rows}) == 1, vec)


@dataclass
class IndexRun:
    report: SpectralReport
    form: QuadraticForm
    M: np.ndarray
    basis: GalerkinBasis
    sequence: FormSequence


def compute_index(data: sf.NullCurveData, L: int, eps=DEFAULT_EPS, orders=None, extra=(),
                  strict=False, tau_rel=1e-4, tol=1e-9) -> IndexRun:
    basis = GalerkinBasis(L, orders, tuple(extra))
    seq = assemble_form_eps(data, basis, eps, tol=tol)
    form = extrapolate_form(seq, strict=strict)
    M = mass_matrix(data, basis, check=False)
    form.M = M
    rep = morse_index(form.Q, M, tau_rel)
    rep.order = form.order
    return IndexRun(rep, form, M, basis, seq)


def rotation_symmetry(data: sf.NullCurveData, p: int, n=24, seed=7):
    """Rotation R with Psi(e^{2 pi i / p} z) = R Psi(z), and the fit residual."""
    rng = np.random.default_rng(seed)
    from .geometry import random_parameters
    z = random_parameters(data, n, rng, min_dist=5e-2)
    rot = np.exp(2j * np.pi / p)
    A = local_frame(data, z).inverted()
    B = local_frame(data, rot * z).inverted()
    H = B @ A.T
    U, _, Vt = np.linalg.svd(H)
    Dm = np.diag([1, 1, np.sign(np.linalg.det(U @ Vt))])
    R = U @ Dm @ Vt
    res = float(np.abs(R @ A - B).max())
    return R, res


def equivariant_index(data: sf.NullCurveData, L: int, p: Optional[int] = None, eps=DEFAULT_EPS,
                      tau_rel=1e-4, strict=False, tol=1e-9) -> IndexRun:
    """Index restricted to variations invariant under z -> e^{2 pi i / p} z."""
    p = int(p if p is not None else data.p)
    R, res = rotation_symmetry(data, p)
    scale = float(np.abs(local_frame(data, np.array([0.3 + 0.1j])).inverted()).max())
    if res > 1e-8 * max(1.0, scale) or np.abs(np.linalg.matrix_power(R, p) - np.eye(3)).max() > 1e-8:
        raise SymmetryMismatch(f"no {p}-fold rotational symmetry about the polar axis "
                               f"(residual {res:.2e})")
    orders = [m for m in range(L + 1) if m % p == 0]
    run = compute_index(data, L, eps, orders=orders, strict=strict, tau_rel=tau_rel, tol=tol)
    run.report.equivariant = True
    return run


def lowest_mode_symmetry(run: IndexRun, p: int) -> float:
    """Fraction of the lowest eigenvector carried by orders m = 0 mod p."""
    v = run.report.vectors[:, 0]
    mask = np.array([ix.m % p == 0 for ix in run.basis.indices] + [False] * (run.basis.size - run.basis.n_harmonic))
    Mv = run.M @ v
    tot = float(v @ Mv)
    w = v * mask
    return float(w @ run.M @ w) / tot


# equal end values ----------------------------------------------------------------------

def second_variation_equal_ends(data: sf.NullCurveData, fld: Field, tol=1e-10, check_eps=None):
    """Regularized form for a single function v with equal end values v0.

    Integrates 1/2 [(Delta_g(|X|^2 (v - v0)) - 2 K |X|^2 v)^2 - 16 v0 K |X|^2 v] dmu_g
    over the whole sphere.  With ``check_eps`` the eps-extrapolated value is
    returned as well.
    """
    sf.validate(data)
    ends = fld.end_values(data)[0]
    v0 = float(ends.mean())
    if np.abs(ends - v0).max() > 1e-8 * max(1.0, np.abs(ends).max()):
        raise UnequalEndValues(f"end values {ends} are not equal")

    def reducer(pts):
        fr = local_frame(data, pts)
        _check_origin(data, fr.X)
        v, W = fld.weighted(fr)
        v, W = v[0], W[0]
        sq = fr.sqnorm()
        Wc = W - sq * v0
        A = 4.0 * Wc.dd / fr.e2l - 2.0 * fr.K * W.val
        dens = 0.5 * (A ** 2 - 16.0 * v0 * fr.K * W.val)
        return (dens * fr.e2l * pts.weights).sum()

    val, err, _ = adaptive_sphere(reducer, tol=tol, scale=1.0)
    out = {"value": float(val), "error": float(err), "end_value": v0}
    if check_eps is not None:
        seq = assemble_form_eps(data, fld, check_eps)
        out["extrapolated"] = float(extrapolate_form(seq, strict=False).Q[0, 0])
    return out


# sign change of the lowest mode ------------------------------------------------------------

CANONICAL_TETRAHEDRON = np.array([
    [np.sqrt(2 / 3), 0.0, np.sqrt(1 / 3)],
    [-np.sqrt(2 / 3), 0.0, np.sqrt(1 / 3)],
    [0.0, np.sqrt(2 / 3), -np.sqrt(1 / 3)],
    [0.0, -np.sqrt(2 / 3), -np.sqrt(1 / 3)]])


def tetrahedral_frame(normals):
    """Rotation R and end ordering perm with R normals[perm[i]] = canonical[i]."""
    import itertools
    normals = np.asarray(normals, dtype=float)
    best = None
    for perm in itertools.permutations(range(4)):
        A = normals[list(perm)]
        H = CANONICAL_TETRAHEDRON.T @ A
        U, _, Vt = np.linalg.svd(H)
        Dm = np.diag([1, 1, np.sign(np.linalg.det(U @ Vt))])
        R = U @ Dm @ Vt
        res = np.abs(A @ R.T - CANONICAL_TETRAHEDRON).max()
        if best is None or res < best[0]:
            best = (res, R, list(perm))
    return best[1], best[2], best[0]


@dataclass
class SignChangeResult:
    coefficients: dict
    end_values: np.ndarray
    v0: float
    minimum: float
    maximum: float
    sign_change: bool
    general_solution_gap: float


def sign_change_check(data: sf.NullCurveData, run: IndexRun, n_sphere=96):
    """Adjust the lowest mode by translation fields to equal positive end values
    and test whether it changes sign."""
    if run.report.index < 1:
        raise EndValueDegenerate("no negative eigenvalue")
    lam = run.report.eigenvalues
    if lam[1] < -run.report.tau:
        raise EndValueDegenerate("lowest eigenvalue is not simple")
    coeff = run.report.vectors[:, 0]
    basis = run.basis
    mode = CombinedField(basis.field, coeff)
    U = mode.end_values(data)[0]
    normals = np.array([e.normal for e in data.ends])
    R, perm, fit = tetrahedral_frame(normals)
    n_can = normals @ R.T  # canonical-frame normals, rows in data order
    u_can = U[perm]        # end values in canonical order
    nc = n_can[perm]
    # first subtract translation fields so that v(p_2) = v(p_3) = v(p_4) = 0
    a, *_ = np.linalg.lstsq(nc[1:], u_can[1:], rcond=None)
    v0 = float(u_can[0] - nc[0] @ a)
    scale = float(np.abs(U).max())
    if abs(v0) < 1e-8 * max(scale, 1e-300):
        raise EndValueDegenerate("mode cannot be equalized to a nonzero end value")
    sign = 1.0 if v0 > 0 else -1.0
    a, v0, coeff, U = sign * a, sign * v0, sign * coeff, sign * U
    c, d = np.sqrt(2 / 3), np.sqrt(1 / 3)
    b = a + np.array([v0 / (2 * c), 0.0, v0 / (4 * d)])  # total canonical-frame shift
    shift = R.T @ b                                        # in data coordinates
    ends_after = U - normals @ shift
    # independent route: solve nu_i . s + v_eq = U_i directly
    G = np.hstack([normals, np.ones((len(U), 1))])
    sol = np.linalg.solve(G, U)
    gap = float(max(np.abs(sol[:3] - shift).max(), abs(sol[3] - v0 / 4)))
    # sample the adjusted function densely over the sphere
    vmin, vmax = np.inf, -np.inf
    for rule in sphere_rule(n_sphere):
        for ch in rule.chunks():
            fr = local_frame(data, ch)
            v = (coeff[:, None] * basis.field.jet(fr).val).sum(axis=0)
            v = v - shift @ fr.inverted_normal()
            vmin, vmax = min(vmin, v.min()), max(vmax, v.max())
    return SignChangeResult({"a": a, "shift": shift, "c": c, "d": d, "frame_fit": fit},
                            ends_after, v0, float(vmin), float(vmax),
                            bool(vmin < 0 < vmax), gap)


# output ----------------------------------------------------------------------------------

def spectrum_csv(report: SpectralReport) -> str:
    buf = io.StringIO()
    buf.write("index,eigenvalue\n")
    for i, x in enumerate(report.eigenvalues):
        buf.write(f"{i},{x:.17g}\n")
    return buf.getvalue()


def report_text(run: IndexRun, title="Willmore index") -> str:
    rep = run.report
    lines = [title,
             f"basis size: {run.basis.size} (L = {run.basis.L}"
             + (f", orders {list(run.basis.orders)})" if run.basis.orders is not None else ")"),
             f"eps: {', '.join(f'{e:g}' for e in run.form.eps)}",
             f"extrapolation order: {run.form.order:.4g}",
             f"flagged entries: {len(run.form.flagged)}",
             f"lowest eigenvalues: {', '.join(f'{x:.6g}' for x in rep.eigenvalues[:8])}",
             f"tau: {rep.tau:.6g}",
             f"inertia (n-, n0, n+): {rep.inertia}",
             "tau sweep:",
             "  tau  n-  n0  n+"]
    for row in rep.sweep:
        lines.append(f"  {row[0]:.4g}  {row[1]}  {row[2]}  {row[3]}")
    lines.append(f"verdict: {rep.verdict}")
    lines.append(("equivariant index" if rep.equivariant else "index") + f" = {rep.index}")
    return "\n".join(lines) + "\n"
