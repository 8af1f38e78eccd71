"""Triangle meshes: OBJ input/output, topology checks, discrete curvatures."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from ..errors import DegenerateTriangleError, MeshError, NonManifoldError, ObjParseError
from ..exterior import hodge_frame
from ..graph_lift import SurfaceSample, lift_sample

log = logging.getLogger(__name__)


class TriangleMesh:
    """Vertex positions (n, 3) and counter-clockwise triangles (m, 3).

    Construction validates indices, edge manifoldness (no edge in more than
    two triangles) and consistent winding (no directed edge used twice).
    """

    def __init__(self, vertices, faces, validate=True):
        self.vertices = np.array(vertices, dtype=float).reshape(-1, 3)
        self.faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
        if validate:
            self.validate()

    def copy(self, vertices=None):
        m = TriangleMesh.__new__(TriangleMesh)
        m.vertices = np.array(self.vertices if vertices is None else vertices, dtype=float)
        m.faces = self.faces
        # topology is shared, so cached topology can be reused
        for key in ("edges", "edge_faces", "boundary_vertices"):
            if key in self.__dict__:
                m.__dict__[key] = self.__dict__[key]
        return m

    def __repr__(self):
        return f"TriangleMesh(n_vertices={self.n_vertices}, n_faces={self.n_faces}, chi={self.euler_characteristic})"

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def validate(self):
        F, n = self.faces, self.n_vertices
        if not np.all(np.isfinite(self.vertices)):
            raise MeshError("non-finite vertex coordinates")
        if F.size and (F.min() < 0 or F.max() >= n):
            raise MeshError("face index out of range")
        rep = (F[:, 0] == F[:, 1]) | (F[:, 1] == F[:, 2]) | (F[:, 0] == F[:, 2])
        if np.any(rep):
            raise MeshError(f"triangles with repeated vertices: {np.flatnonzero(rep)[:10].tolist()}")
        counts = {}
        for key, faces in self.edge_faces.items():
            counts[key] = len(faces)
        bad = [k for k, c in counts.items() if c > 2]
        if bad:
            raise NonManifoldError(f"{len(bad)} non-manifold edge(s), e.g. {bad[:5]}", bad)
        directed = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
        _, cnt = np.unique(directed, axis=0, return_counts=True)
        if np.any(cnt > 1):
            dup = np.unique(directed, axis=0)[cnt > 1]
            raise NonManifoldError(
                f"inconsistent winding on {len(dup)} edge(s), e.g. {dup[:5].tolist()}",
                [tuple(e) for e in dup],
            )

    @cached_property
    def edge_faces(self):
        out = {}
        for f, tri in enumerate(self.faces.tolist()):
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                out.setdefault((min(a, b), max(a, b)), []).append(f)
        return out

    @cached_property
    def edges(self):
        return np.array(sorted(self.edge_faces), dtype=np.int64).reshape(-1, 2)

    @cached_property
    def boundary_vertices(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        for (a, b), faces in self.edge_faces.items():
            if len(faces) == 1:
                mask[a] = mask[b] = True
        return mask

    @property
    def boundary_edges(self):
        return [e for e, f in self.edge_faces.items() if len(f) == 1]

    @property
    def is_closed(self):
        return not self.boundary_edges

    @property
    def euler_characteristic(self):
        return int(self.n_vertices - len(self.edges) + self.n_faces)

    def face_areas(self):
        return face_geometry(self.vertices, self.faces).area

    def area(self):
        return float(np.sum(self.face_areas()))

    def volume(self):
        """Signed enclosed volume (positive for outward winding)."""
        X, F = self.vertices, self.faces
        return float(np.sum(np.einsum("ij,ij->i", X[F[:, 0]], np.cross(X[F[:, 1]], X[F[:, 2]]))) / 6.0)

    def bbox_diagonal(self):
        return float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))

    def length_scale(self):
        """Twice the largest vertex distance from the centroid (rigid-motion invariant)."""
        X = self.vertices
        return float(2.0 * np.max(np.linalg.norm(X - X.mean(0), axis=1))) if len(X) else 0.0


# -- OBJ ---------------------------------------------------------------------


def _obj_index(tok, n, lineno):
    head = tok.split("/")[0]
    try:
        k = int(head)
    except ValueError:
        raise ObjParseError(f"bad face index {tok!r}", lineno) from None
    if k == 0:
        raise ObjParseError("face index 0 is invalid in OBJ", lineno)
    return k - 1 if k > 0 else n + k


def parse_obj(text):
    verts, faces = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        tag = toks[0]
        if tag == "v":
            if len(toks) < 4:
                raise ObjParseError("vertex record needs 3 coordinates", lineno)
            try:
                verts.append([float(t) for t in toks[1:4]])
            except ValueError:
                raise ObjParseError(f"bad vertex coordinates {toks[1:4]}", lineno) from None
        elif tag == "f":
            if len(toks) < 4:
                raise ObjParseError("face record needs at least 3 vertices", lineno)
            idx = [_obj_index(t, len(verts), lineno) for t in toks[1:]]
            if any(i < 0 or i >= len(verts) for i in idx):
                raise ObjParseError(f"face references undefined vertex {toks[1:]}", lineno)
            # fan triangulation of polygons
            for k in range(1, len(idx) - 1):
                faces.append([idx[0], idx[k], idx[k + 1]])
        # other records (vt, vn, o, g, s, usemtl, ...) are ignored
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def load_obj(path) -> TriangleMesh:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MeshError(f"cannot read {path}: {exc}") from exc
    V, F = parse_obj(text)
    if len(F) == 0:
        raise ObjParseError("no faces found")
    used = np.zeros(len(V), dtype=bool)
    used[F.ravel()] = True
    if not used.all():
        log.warning("dropping %d unreferenced vertices from %s", int((~used).sum()), path)
        remap = np.cumsum(used) - 1
        V, F = V[used], remap[F]
    return TriangleMesh(V, F)


def write_obj(mesh: TriangleMesh, path, header=None):
    lines = []
    if header:
        lines += [f"# {h}" for h in header.splitlines()]
    lines += [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


# -- generators --------------------------------------------------------------


def icosphere(subdivisions=3, radius=1.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Subdivided icosahedron with vertices on the sphere, outward winding."""
    t = (1.0 + 5**0.5) / 2.0
    V = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    F = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in V]
    faces = F
    for _ in range(int(subdivisions)):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    X = np.asarray(center, float) + radius * np.array(verts)
    return TriangleMesh(X, faces)


def flat_grid(n=8, size=1.0) -> TriangleMesh:
    """(n+1) x (n+1) vertex grid on [0, size]^2 in the z = 0 plane, normal +z."""
    xs = np.linspace(0.0, size, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    V = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size)], -1)
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    F = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            F += [(a, b, c), (a, c, d)]
    return TriangleMesh(V, F)


def torus_mesh(R=2.0, r=1.0, n_major=32, n_minor=16) -> TriangleMesh:
    """Triangulated torus of revolution about the z axis, outward winding."""
    if not (r > 0 and R > r) or n_major < 3 or n_minor < 3:
        raise MeshError("torus mesh requires R > r > 0 and at least 3 segments per direction")
    u = 2 * np.pi * np.arange(n_major) / n_major
    v = 2 * np.pi * np.arange(n_minor) / n_minor
    U, V = np.meshgrid(u, v, indexing="ij")
    w = R + r * np.cos(V)
    X = np.stack([w * np.cos(U), w * np.sin(U), r * np.sin(V)], -1).reshape(-1, 3)
    F = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            c = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            d = i * n_minor + (j + 1) % n_minor
            F += [(a, b, c), (a, c, d)]
    return TriangleMesh(X, F)


def perturb_radially(mesh: TriangleMesh, amplitude=0.02, seed=0) -> TriangleMesh:
    """Multiply each vertex by (1 + amplitude * U(-1, 1)) about the centroid."""
    rng = np.random.default_rng(seed)
    c = mesh.vertices.mean(0)
    f = 1.0 + amplitude * rng.uniform(-1.0, 1.0, size=mesh.n_vertices)
    return mesh.copy(c + (mesh.vertices - c) * f[:, None])


def transformed(mesh: TriangleMesh, rotation=None, translation=None, scale=1.0) -> TriangleMesh:
    X = mesh.vertices * scale
    if rotation is not None:
        X = X @ np.asarray(rotation, float).T
    if translation is not None:
        X = X + np.asarray(translation, float)
    return mesh.copy(X)


# -- discrete geometry -------------------------------------------------------


@dataclass
class FaceGeometry:
    """Per-face data; corner k of face f is vertex faces[f, k]."""

    u: np.ndarray  # (m, 3, 3) edge from corner k to corner k+1
    v: np.ndarray  # (m, 3, 3) edge from corner k to corner k+2
    dot: np.ndarray  # (m, 3) u . v
    cross: np.ndarray  # (m, 3) |u x v| (twice the face area, same for all corners)
    cot: np.ndarray  # (m, 3) cotangent of the corner angle
    angle: np.ndarray  # (m, 3)
    normal2: np.ndarray  # (m, 3) (x1 - x0) x (x2 - x0)
    area: np.ndarray  # (m,)


def face_geometry(X, F) -> FaceGeometry:
    P = X[F]  # (m, 3 corners, 3)
    u = np.roll(P, -1, axis=1) - P
    v = np.roll(P, -2, axis=1) - P
    dot = np.einsum("mki,mki->mk", u, v)
    cr = np.linalg.norm(np.cross(u, v), axis=-1)
    normal2 = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    area = 0.5 * np.linalg.norm(normal2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cot = dot / cr
    angle = np.arctan2(cr, dot)
    return FaceGeometry(u, v, dot, cr, cot, angle, normal2, area)


def mixed_area_corners(g: FaceGeometry):
    """Mixed (Voronoi / obtuse-corrected) area of each face corner, (m, 3).

    Non-obtuse face: (|e_k,k+1|^2 cot_{k+2} + |e_k,k+2|^2 cot_{k+1}) / 8.
    Obtuse face: area/2 at the obtuse corner, area/4 at the others.
    """
    lu2 = np.einsum("mki,mki->mk", g.u, g.u)
    lv2 = np.einsum("mki,mki->mk", g.v, g.v)
    vor = (lu2 * np.roll(g.cot, -2, axis=1) + lv2 * np.roll(g.cot, -1, axis=1)) / 8.0
    obtuse = g.dot < 0
    any_obt = obtuse.any(axis=1)
    obt_part = np.where(obtuse, 0.5, 0.25) * g.area[:, None]
    return np.where(any_obt[:, None], obt_part, vor)


def cotan_laplacian_apply(X, F, cot):
    """sum_j w_ij (x_i - x_j) with w_ij = cot alpha_ij + cot beta_ij."""
    out = np.zeros_like(X)
    for k in range(3):
        i, j = F[:, (k + 1) % 3], F[:, (k + 2) % 3]
        d = cot[:, k, None] * (X[i] - X[j])
        np.add.at(out, i, d)
        np.add.at(out, j, -d)
    return out


@dataclass
class MeshCurvatures:
    H: np.ndarray
    K: np.ndarray
    normals: np.ndarray
    area: np.ndarray
    angle_defect: np.ndarray
    boundary: np.ndarray
    mean_curvature_vector: np.ndarray


def check_triangles(mesh: TriangleMesh, g: FaceGeometry | None = None, rel=1e-14):
    g = face_geometry(mesh.vertices, mesh.faces) if g is None else g
    scale = max(mesh.length_scale(), 1e-300)
    bad = np.flatnonzero(~(g.area > rel * scale**2))
    if bad.size:
        raise DegenerateTriangleError(f"degenerate triangle(s): {bad[:10].tolist()}", bad.tolist())
    return g


def mesh_curvatures(mesh: TriangleMesh) -> MeshCurvatures:
    """Per-vertex curvature estimates, convention H = k1 + k2.

    H is the length of the cotangent mean-curvature vector over the mixed
    area, signed against the area-weighted vertex normal (on the boundary,
    where that vector also carries the curvature of the boundary curve, its
    normal component is used instead); K is the angle defect over the
    mixed area.  Boundary vertices get K = 0 (their turning angle belongs to
    the boundary curve, not to the surface).
    """
    X, F = mesh.vertices, mesh.faces
    g = check_triangles(mesh)
    n = len(X)
    A = np.zeros(n)
    np.add.at(A, F.ravel(), mixed_area_corners(g).ravel())
    N = np.zeros((n, 3))
    for k in range(3):
        np.add.at(N, F[:, k], g.normal2)
    normals = N / np.linalg.norm(N, axis=1)[:, None]
    LX = cotan_laplacian_apply(X, F, g.cot)
    Hvec = LX / (2.0 * A[:, None])
    boundary = mesh.boundary_vertices
    H = signed_mean_curvature(LX, normals, A, boundary)
    angsum = np.zeros(n)
    np.add.at(angsum, F.ravel(), g.angle.ravel())
    defect = np.where(boundary, 0.0, 2 * np.pi - angsum)
    K = defect / A
    return MeshCurvatures(H, K, normals, A, defect, boundary, Hvec)


def signed_mean_curvature(LX, normals, A, boundary):
    s = np.einsum("ij,ij->i", LX, normals)
    mag = np.where(s >= 0, 1.0, -1.0) * np.linalg.norm(LX, axis=1)
    return np.where(boundary, s, mag) / (2.0 * A)


def principal_from_HK(H, K):
    """k1, k2 = H/2 +- sqrt(max(H^2/4 - K, 0)); also returns the clamp mask."""
    disc = H**2 / 4.0 - K
    clamped = disc < 0
    r = np.sqrt(np.maximum(disc, 0.0))
    return H / 2.0 + r, H / 2.0 - r, clamped


def mesh_surface_samples(mesh: TriangleMesh, curv: MeshCurvatures | None = None):
    """Per-vertex SurfaceSamples with a synthesised umbilic-direction-free L.

    Returns (samples, n_clamped).
    """
    curv = mesh_curvatures(mesh) if curv is None else curv
    k1, k2, clamped = principal_from_HK(curv.H, curv.K)
    if clamped.any():
        log.info("clamped H^2/4 - K at %d vertices", int(clamped.sum()))
    out = []
    for i in range(mesh.n_vertices):
        nu = curv.normals[i]
        t1, t2 = hodge_frame(nu, tol=1e-8)
        L = k1[i] * np.outer(t1, t1) + k2[i] * np.outer(t2, t2)
        out.append(SurfaceSample(mesh.vertices[i], nu, t1, t2, L, float(curv.area[i]), 1))
    return out, int(clamped.sum())


def mesh_to_samples(mesh: TriangleMesh, curv: MeshCurvatures | None = None):
    """Per-vertex GaussGraphSamples; ``meta['clamped']`` marks clamped vertices."""
    curv = mesh_curvatures(mesh) if curv is None else curv
    surf, _ = mesh_surface_samples(mesh, curv)
    _, _, clamped = principal_from_HK(curv.H, curv.K)
    out = []
    for s, cl in zip(surf, clamped):
        g = lift_sample(s)
        g.meta["clamped"] = bool(cl)
        out.append(g)
    return out


def mesh_boundary_mass(mesh: TriangleMesh, curv: MeshCurvatures | None = None):
    """Length in R^3 x R^3 of the lifted boundary polyline (x, nu(x))."""
    be = mesh.boundary_edges
    if not be:
        return 0.0
    curv = mesh_curvatures(mesh) if curv is None else curv
    e = np.array(be)
    dx = mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]]
    dn = curv.normals[e[:, 0]] - curv.normals[e[:, 1]]
    return float(np.sum(np.sqrt(np.sum(dx**2, 1) + np.sum(dn**2, 1))))
