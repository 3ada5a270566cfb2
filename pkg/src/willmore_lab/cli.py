"""Command line front end.

Exit codes: 0 success, 1 validation failure or usage error, 2 numerical
nonconvergence, 3 unstable spectral verdict.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import geometry as geo
from . import mesh as msh
from . import spectral as sp
from . import surface as sf
from .errors import (IllConditioned, NumericalFailure, PoleEvaluation, ValidationFailure,
                     WillmoreLabError)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_UNSTABLE = 0, 1, 2, 3
DENSITY_EPS = (0.2, 0.1, 0.05, 0.025)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    surface: Optional[str] = None
    p: Optional[int] = None
    degree: int = 10
    eps: tuple = ()
    tol: float = 1e-9
    samples: int = 200
    seed: int = 0
    modulus: float = 0.3
    angle: float = 0.0
    inverted: bool = False
    clip: float = 0.05
    out: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tol > 0:
            raise UsageError("--tol must be positive")
        if self.eps:
            e = np.asarray(self.eps, dtype=float)
            if (e <= 0).any() or (np.diff(e) >= 0).any():
                raise UsageError("--eps must be positive and strictly decreasing")
        if self.samples < 1:
            raise UsageError("--samples must be positive")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _eps_list(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="willmore-lab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def surface_cmd(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("surface", help=".wsd surface file")
        return s

    s = sub.add_parser("flower", help="construct the minimal flower with 2p planar ends")
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--out", required=True)

    s = surface_cmd("verify", "run the verification suite on a surface")
    s.add_argument("--samples", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--eps", type=_eps_list, default=DENSITY_EPS)

    s = surface_cmd("energy", "Willmore energy of the inverted surface")
    s.add_argument("--tol", type=float, default=1e-11)

    surface_cmd("span", "dimension of the span of the end normals")
    surface_cmd("spiny", "asymptotic planes and the spiny test")

    s = surface_cmd("density", "area defect sweep near the ends")
    s.add_argument("--eps", type=_eps_list, default=DENSITY_EPS)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--out", help="CSV output path")

    for name, help_ in (("index", "Morse index of the inverted surface"),
                        ("equivariant", "index restricted to p-fold symmetric variations")):
        s = surface_cmd(name, help_)
        s.add_argument("--degree", type=int, default=10)
        s.add_argument("--eps", type=_eps_list, default=sp.DEFAULT_EPS)
        s.add_argument("--tol", type=float, default=1e-9)
        s.add_argument("--out", help="output prefix for <out>.csv and <out>.txt")
        if name == "equivariant":
            s.add_argument("--p", type=int)

    s = surface_cmd("mesh", "export an OBJ mesh")
    s.add_argument("--samples", type=int, default=64)
    s.add_argument("--inverted", action="store_true")
    s.add_argument("--clip", type=float, default=0.05,
                   help="parameter radius removed around each end (non-inverted export)")
    s.add_argument("--out", required=True)

    s = surface_cmd("orbit", "random element of the S^1 x SO(3,C) orbit")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--modulus", type=float, default=0.3)
    s.add_argument("--out", required=True)

    s = surface_cmd("associate", "associate surface e^{it} Phi'")
    s.add_argument("angle", type=float)
    s.add_argument("--out", required=True)
    return ap


def parse_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    kw = {k: v for k, v in vars(ns).items() if v is not None}
    return RunConfig(**kw)


# commands --------------------------------------------------------------------------------

def _load(cfg: RunConfig) -> sf.NullCurveData:
    path = Path(cfg.surface)
    if not path.is_file():
        raise UsageError(f"no such file: {path}")
    return sf.read_wsd(path)


def _summary_lines(data, summary):
    return [f"ends m = {summary.m}",
            f"p = {summary.p}",
            f"gauss degree = {summary.gauss_degree}",
            f"total curvature = {summary.total_curvature:.12g}",
            f"end normal span = {summary.span_dimension}"]


def cmd_flower(cfg, out):
    if cfg.p is None or cfg.p < 2:
        raise UsageError("--p must be an integer >= 2")
    data = sf.flower_data(cfg.p)
    summary = sf.validate(data)
    sf.write_wsd(data, cfg.out)
    for line in _summary_lines(data, summary):
        print(line, file=out)
    print(f"wrote {cfg.out}", file=out)
    return EXIT_OK


def _check(out, name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", file=out)
    return ok


def cmd_verify(cfg, out):
    data = _load(cfg)
    summary = sf.validate(data)
    ok = _check(out, "validation", True,
                f"m = {summary.m}, gauss degree = {summary.gauss_degree}, span = {summary.span_dimension}")
    rng = np.random.default_rng(cfg.seed)
    z = geo.random_parameters(data, cfg.samples, rng)
    for k in (1, 2, 3):
        r = geo.inverted_normal_identity_residual(data, k, z)
        ok &= _check(out, f"inverted normal identity k = {k}", r < 1e-8, f"max residual {r:.3e}")
    rep = geo.spiny_test(geo.asymptotic_planes(data))
    ok &= _check(out, "spiny", rep.is_spiny,
                 f"residual {rep.residual:.3e} (threshold {rep.threshold:.1e}), "
                 f"point {np.array2string(rep.point, precision=6)}")
    if rep.is_spiny:
        sfc = geo.support_field_check(data, seed=cfg.seed)
        scale = geo.scale_of(data)
        ok &= _check(out, "support function is a Jacobi field", sfc.jacobi_residual < 1e-8 * max(1, scale),
                     f"max |L u| {sfc.jacobi_residual:.3e}")
        ok &= _check(out, "conjugate support function is a Jacobi field",
                     sfc.conjugate_jacobi_residual < 1e-8 * max(1, scale),
                     f"max |L u*| {sfc.conjugate_jacobi_residual:.3e}")
        ev = float(np.abs(sfc.end_values).max())
        ok &= _check(out, "support function vanishes at the ends", ev < 1e-8 * max(1, scale),
                     f"max |u(p_i)| {ev:.3e}")
    else:
        ok &= _check(out, "support function is a Jacobi field", False, "skipped: surface is not spiny")
    rows = geo.density_sweep(data, cfg.eps or DENSITY_EPS)
    d = np.abs([r.defect for r in rows])
    dec = bool(np.all(np.diff(d) < 0) and d[-1] < 0.1 * d[0])
    ok &= _check(out, "area density at the ends", dec,
                 "defects " + ", ".join(f"{x:.3e}" for x in d))
    print("ALL PASS" if ok else "SOME CHECKS FAILED", file=out)
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_energy(cfg, out):
    data = _load(cfg)
    res = geo.willmore_energy(data, tol=cfg.tol)
    print(f"W = {res.value:.15g}", file=out)
    print(f"W / 4pi = {res.value / (4 * np.pi):.15g}", file=out)
    print(f"cross check = {res.cross_check:.15g}", file=out)
    print(f"quadrature error estimate = {res.error:.3e} (n = {res.sphere_n})", file=out)
    return EXIT_OK


def cmd_span(cfg, out):
    data = _load(cfg)
    normals = sf.end_normals(data)
    for i, nrm in enumerate(normals):
        print(f"end {i}: {nrm[0]:.15g} {nrm[1]:.15g} {nrm[2]:.15g}", file=out)
    print(f"span dimension = {sf.end_span_dimension(data)}", file=out)
    return EXIT_OK


def cmd_spiny(cfg, out):
    data = _load(cfg)
    planes = geo.asymptotic_planes(data)
    exact = geo.exact_planes(data)
    for pl, ex in zip(planes, exact):
        print(f"end {pl.index}: normal {np.array2string(pl.normal, precision=9)} "
              f"offset {pl.offset:.12g} (Laurent {ex.offset:.12g})", file=out)
    rep = geo.spiny_test(planes)
    print(f"spiny = {rep.is_spiny}", file=out)
    print(f"point = {np.array2string(rep.point, precision=12)}", file=out)
    print(f"residual = {rep.residual:.3e} (threshold {rep.threshold:.3e})", file=out)
    return EXIT_OK if rep.is_spiny else EXIT_VALIDATION


def cmd_density(cfg, out):
    data = _load(cfg)
    rows = geo.density_sweep(data, cfg.eps or DENSITY_EPS, tol=cfg.tol)
    text = geo.density_csv(rows)
    if cfg.out:
        Path(cfg.out).write_text(text)
    out.write(text)
    print(f"fitted end count = {geo.fit_end_count(rows):.6g}", file=out)
    return EXIT_OK


def _spectral_outputs(cfg, run, out, title):
    text = sp.report_text(run, title)
    if cfg.out:
        Path(cfg.out + ".csv").write_text(sp.spectrum_csv(run.report))
        Path(cfg.out + ".txt").write_text(text)
    out.write(text)
    return EXIT_OK if run.report.stable else EXIT_UNSTABLE


def cmd_index(cfg, out):
    data = _load(cfg)
    run = sp.compute_index(data, cfg.degree, cfg.eps or sp.DEFAULT_EPS, tol=cfg.tol)
    return _spectral_outputs(cfg, run, out, "Willmore index")


def cmd_equivariant(cfg, out):
    data = _load(cfg)
    p = cfg.p if cfg.p is not None else data.p
    if p is None:
        raise UsageError("--p is required when the surface file carries no symmetry order")
    run = sp.equivariant_index(data, cfg.degree, p, cfg.eps or sp.DEFAULT_EPS, tol=cfg.tol)
    return _spectral_outputs(cfg, run, out, f"Willmore index, {p}-fold symmetric variations")


def cmd_mesh(cfg, out):
    data = _load(cfg)
    if cfg.samples < 16:
        raise UsageError("--samples must be at least 16")
    m = msh.sample_mesh(data, cfg.samples, inverted=cfg.inverted, clip=cfg.clip)
    what = "inverted surface" if cfg.inverted else f"minimal surface, ends clipped at {cfg.clip:g}"
    msh.write_obj(m, cfg.out, comment=f"{what}\n{data.provenance}")
    print(f"vertices = {len(m.vertices)}", file=out)
    print(f"faces = {len(m.faces)}", file=out)
    print(f"area = {m.area():.12g}", file=out)
    print(f"euler characteristic = {m.euler_characteristic()}", file=out)
    print(f"wrote {cfg.out}", file=out)
    return EXIT_OK


def cmd_orbit(cfg, out):
    data = _load(cfg)
    new = sf.random_orbit_element(data, np.random.default_rng(cfg.seed), cfg.modulus)
    sf.write_wsd(new, cfg.out)
    print(f"wrote {cfg.out}", file=out)
    return EXIT_OK


def cmd_associate(cfg, out):
    data = _load(cfg)
    sf.write_wsd(sf.associate(data, cfg.angle), cfg.out)
    print(f"wrote {cfg.out}", file=out)
    return EXIT_OK


COMMANDS = {"flower": cmd_flower, "verify": cmd_verify, "energy": cmd_energy, "span": cmd_span,
            "spiny": cmd_spiny, "density": cmd_density, "index": cmd_index,
            "equivariant": cmd_equivariant, "mesh": cmd_mesh, "orbit": cmd_orbit,
            "associate": cmd_associate}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
        return COMMANDS[cfg.command](cfg, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValidationFailure as exc:
        print(f"validation failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalFailure, PoleEvaluation, IllConditioned) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except WillmoreLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
