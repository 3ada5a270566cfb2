"""Triangle meshes of a surface sampled on the parameter sphere, and OBJ output.

The parameter sphere is sampled on a latitude-longitude grid.  The southern
half (|z| <= 1) is evaluated in the z chart and the northern half in the
w = 1/z chart, so neither pole is special.  Grid vertices on the longitude
seam and at the poles are welded by index, which leaves a closed triangulated
sphere (Euler characteristic 2) for the inverted surface Psi.  The minimal
surface X itself is exported with small disks around the ends removed.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import surface as sf
from .geometry import _check_origin, local_frame


@dataclass
class TriangleMesh:
    vertices: np.ndarray  # (n, 3)
    normals: np.ndarray   # (n, 3)
    faces: np.ndarray     # (f, 3) zero-based

    def area(self) -> float:
        a, b, c = (self.vertices[self.faces[:, k]] for k in range(3))
        return float(0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1).sum())

    def euler_characteristic(self) -> int:
        f = self.faces
        edges = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
        n_edges = len(np.unique(edges, axis=0))
        n_verts = len(np.unique(f))
        return int(n_verts - n_edges + len(f))

    def boundary_edges(self) -> int:
        f = self.faces
        edges = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        return int((counts == 1).sum())


def sphere_grid(samples: int):
    """Welded lat-long grid: global parameter values (inf allowed) and faces.

    ``samples`` latitude bands per hemisphere and 4 * samples longitudes.
    """
    if samples < 16:
        raise ValueError("at least 16 samples per chart direction are required")
    n_lat = 2 * samples
    n_lon = 4 * samples
    theta = np.linspace(0.0, np.pi, n_lat + 1)[1:-1]   # interior latitudes
    phi = 2 * np.pi * np.arange(n_lon) / n_lon
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    z = (1.0 / np.tan(th / 2)) * np.exp(1j * ph)      # theta = 0 is z = infinity
    z = np.concatenate([[np.inf], z.ravel(), [0.0]])
    north, south = 0, len(z) - 1

    def vid(i, j):
        return 1 + i * n_lon + (j % n_lon)

    faces = []
    for j in range(n_lon):
        faces.append((north, vid(0, j + 1), vid(0, j)))
    for i in range(n_lat - 2):
        for j in range(n_lon):
            a, b = vid(i, j), vid(i, j + 1)
            c, d = vid(i + 1, j), vid(i + 1, j + 1)
            faces.append((a, b, d))
            faces.append((a, d, c))
    for j in range(n_lon):
        faces.append((south, vid(n_lat - 2, j), vid(n_lat - 2, j + 1)))
    return z, np.array(faces, dtype=np.int64)


def _end_mask(data: sf.NullCurveData, z, radius):
    """True where z lies within ``radius`` of an end (inf-aware)."""
    near = np.zeros(z.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(np.isfinite(z), 1.0 / np.where(z == 0, 1.0, z), 0.0)
        w = np.where(z == 0, np.inf, w)
    for e in data.ends:
        if e.at_infinity:
            near |= np.abs(w) < radius
        else:
            near |= np.isfinite(z) & (np.abs(z - e.location) < radius)
    return near


def _evaluate(data, z, origin):
    fr = local_frame(data, z, origin)
    return fr.X, fr.nu


def sample_mesh(data: sf.NullCurveData, samples=64, inverted=True, clip=0.05) -> TriangleMesh:
    """Mesh of Psi (``inverted``) or of X with end disks of radius ``clip`` removed."""
    sf.validate(data)
    z, faces = sphere_grid(samples)
    at_end = _end_mask(data, z, 1e-10 if inverted else clip)
    keep = ~at_end
    X, nu = _evaluate(data, z[keep], data.center)
    verts = np.zeros((z.size, 3))
    nrm = np.zeros((z.size, 3))
    if inverted:
        _check_origin(data, X)
        r2 = (X ** 2).sum(axis=0)
        verts[keep] = (X / r2).T
        nrm[keep] = (nu - 2 * (X * nu).sum(axis=0) * X / r2).T
        # an end maps to the inversion centre with normal nu(p_i)
        for idx in np.flatnonzero(at_end):
            zz = z[idx]
            for e in data.ends:
                if (e.at_infinity and not np.isfinite(zz)) or \
                        (not e.at_infinity and np.isfinite(zz) and abs(zz - e.location) < 1e-10):
                    nrm[idx] = e.normal
        used = faces
    else:
        verts[keep] = (X + data.center[:, None]).T
        nrm[keep] = nu.T
        used = faces[keep[faces].all(axis=1)]
    # orient faces along the vertex normals
    a, b, c = (verts[used[:, k]] for k in range(3))
    fn = np.cross(b - a, c - a)
    vn = nrm[used].sum(axis=1)
    if (fn * vn).sum() < 0:
        used = used[:, ::-1]
    # drop unused vertices and renumber
    ids = np.unique(used)
    remap = -np.ones(z.size, dtype=np.int64)
    remap[ids] = np.arange(ids.size)
    return TriangleMesh(verts[ids], nrm[ids], remap[used])


def obj_text(mesh: TriangleMesh, comment=None) -> str:
    buf = io.StringIO()
    if comment:
        for line in str(comment).splitlines():
            buf.write(f"# {line}\n")
    for v in mesh.vertices:
        buf.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
    for n in mesh.normals:
        buf.write(f"vn {n[0]:.17g} {n[1]:.17g} {n[2]:.17g}\n")
    for f in mesh.faces + 1:
        buf.write(f"f {f[0]}//{f[0]} {f[1]}//{f[1]} {f[2]}//{f[2]}\n")
    return buf.getvalue()


def write_obj(mesh: TriangleMesh, path, comment=None):
    with open(path, "w") as fh:
        fh.write(obj_text(mesh, comment))


def read_obj(path) -> TriangleMesh:
    verts, nrms, faces = [], [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "vn":
                nrms.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return TriangleMesh(np.array(verts), np.array(nrms), np.array(faces, dtype=np.int64))

