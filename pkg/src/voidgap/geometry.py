"""Cross-sections, void shapes and the periodicity cell of the quasi-cylinder.

The waveguide is ``omega x R`` with period 1 in ``z``.  One period of the
perforated guide is the cell ``(omega x (0, 1)) \\ (x0 + eps * theta)``.
Longer periods are expressed by shrinking the cross-section with
:func:`rescale_period`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import BadScale, BadShape, DegenerateMesh, VoidEscapesCell

BC_KINDS = ("neumann", "mixed")
_BC_ALIASES = {"neumann": "neumann", "mixed": "mixed", "mixed_dirichlet_lateral": "mixed",
               "dirichlet": "mixed"}


def normalize_bc(bc: str) -> str:
    try:
        return _BC_ALIASES[str(bc).lower()]
    except KeyError:
        raise ValueError(f"unknown boundary condition kind {bc!r}") from None


def _positive(values, what):
    for v in values:
        if not (math.isfinite(v) and v > 0):
            raise BadShape(f"{what} must be finite and positive, got {values!r}")


# ---------------------------------------------------------------------------
# cross-sections
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CrossSection:
    """Bounded planar domain ``omega``.

    Rectangles occupy ``[0, a] x [0, b]``, disks are centred at the origin and
    polygons are given by their vertex list (closed implicitly).
    """

    kind: str
    dims: tuple = ()
    vertices: tuple = ()

    def __post_init__(self):
        if self.kind == "rectangle":
            if len(self.dims) != 2:
                raise BadShape("rectangle needs (a, b)")
            _positive(self.dims, "rectangle sides")
        elif self.kind == "disk":
            if len(self.dims) != 1:
                raise BadShape("disk needs (radius,)")
            _positive(self.dims, "disk radius")
        elif self.kind == "polygon":
            verts = np.asarray(self.vertices, dtype=float)
            if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
                raise BadShape("polygon needs at least three (x, y) vertices")
            if not np.all(np.isfinite(verts)):
                raise BadShape("polygon vertices must be finite")
            signed = _shoelace(verts)
            if abs(signed) <= 1e-14 * max(1.0, np.ptp(verts) ** 2):
                raise BadShape("polygon has zero area")
            if _self_intersects(verts):
                raise BadShape("polygon is not simple")
            if signed < 0:
                object.__setattr__(self, "vertices", tuple(map(tuple, verts[::-1])))
            else:
                object.__setattr__(self, "vertices", tuple(map(tuple, verts)))
        else:
            raise BadShape(f"unknown cross-section kind {self.kind!r}")

    @classmethod
    def rectangle(cls, a: float, b: float) -> "CrossSection":
        return cls("rectangle", (float(a), float(b)))

    @classmethod
    def disk(cls, radius: float) -> "CrossSection":
        return cls("disk", (float(radius),))

    @classmethod
    def polygon(cls, vertices) -> "CrossSection":
        return cls("polygon", (), tuple(map(tuple, np.asarray(vertices, dtype=float))))

    @cached_property
    def area(self) -> float:
        if self.kind == "rectangle":
            return self.dims[0] * self.dims[1]
        if self.kind == "disk":
            return math.pi * self.dims[0] ** 2
        return abs(_shoelace(np.asarray(self.vertices)))

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """``(xmin, xmax, ymin, ymax)`` of the bounding box."""
        if self.kind == "rectangle":
            return 0.0, self.dims[0], 0.0, self.dims[1]
        if self.kind == "disk":
            r = self.dims[0]
            return -r, r, -r, r
        v = np.asarray(self.vertices)
        return v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max()

    def contains(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        x1, x2 = y[..., 0], y[..., 1]
        if self.kind == "rectangle":
            a, b = self.dims
            return (x1 >= 0) & (x1 <= a) & (x2 >= 0) & (x2 <= b)
        if self.kind == "disk":
            return x1 * x1 + x2 * x2 <= self.dims[0] ** 2
        return _point_in_polygon(y, np.asarray(self.vertices))

    def distance_to_boundary(self, y) -> np.ndarray:
        """Signed distance to the boundary, positive inside."""
        y = np.asarray(y, dtype=float)
        if self.kind == "disk":
            return self.dims[0] - np.hypot(y[..., 0], y[..., 1])
        if self.kind == "rectangle":
            a, b = self.dims
            inner = np.minimum.reduce([y[..., 0], a - y[..., 0], y[..., 1], b - y[..., 1]])
            dx = np.maximum.reduce([-y[..., 0], y[..., 0] - a, np.zeros_like(y[..., 0])])
            dy = np.maximum.reduce([-y[..., 1], y[..., 1] - b, np.zeros_like(y[..., 1])])
            return np.where(inner >= 0, inner, -np.hypot(dx, dy))
        verts = np.asarray(self.vertices)
        d = _distance_to_segments(y, verts, np.roll(verts, -1, axis=0))
        return np.where(self.contains(y), d, -d)

    def boundary_samples(self, n: int = 200) -> tuple[np.ndarray, np.ndarray]:
        """Points on the boundary and outward unit normals, roughly equispaced."""
        if self.kind == "disk":
            t = 2 * np.pi * (np.arange(n) + 0.5) / n
            nrm = np.stack([np.cos(t), np.sin(t)], axis=1)
            return self.dims[0] * nrm, nrm
        if self.kind == "rectangle":
            a, b = self.dims
            verts = np.array([[0, 0], [a, 0], [a, b], [0, b]], dtype=float)
        else:
            verts = np.asarray(self.vertices)
        nxt = np.roll(verts, -1, axis=0)
        lengths = np.linalg.norm(nxt - verts, axis=1)
        counts = np.maximum(1, np.round(n * lengths / lengths.sum()).astype(int))
        pts, nrms = [], []
        for p, q, m, L in zip(verts, nxt, counts, lengths):
            t = (np.arange(m) + 0.5) / m
            pts.append(p + t[:, None] * (q - p))
            tangent = (q - p) / L
            # counter-clockwise orientation: outward normal is the tangent turned clockwise
            nrms.append(np.repeat([[tangent[1], -tangent[0]]], m, axis=0))
        return np.concatenate(pts), np.concatenate(nrms)

    def scaled(self, s: float) -> "CrossSection":
        if self.kind == "polygon":
            return CrossSection.polygon(np.asarray(self.vertices) * s)
        return CrossSection(self.kind, tuple(d * s for d in self.dims))

    def describe(self) -> str:
        if self.kind == "rectangle":
            return f"rectangle {self.dims[0]:g} x {self.dims[1]:g}"
        if self.kind == "disk":
            return f"disk r={self.dims[0]:g}"
        return f"polygon with {len(self.vertices)} vertices"


def rescale_period(cs: CrossSection, l: float) -> CrossSection:
    """Cross-section of the guide after rescaling a period of length ``l`` to 1.

    The new domain is ``{y' : l y' in omega}``; its Laplacian eigenvalues are
    ``l**2`` times the original ones.
    """
    if not (math.isfinite(l) and l > 0):
        raise BadScale(f"period length must be positive, got {l!r}")
    return cs.scaled(1.0 / l)


def _shoelace(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _self_intersects(v: np.ndarray) -> bool:
    n = len(v)
    segs = [(v[i], v[(i + 1) % n]) for i in range(n)]

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            p1, p2 = segs[i]
            q1, q2 = segs[j]
            d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
            d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
            if d1 * d2 < 0 and d3 * d4 < 0:
                return True
    return False


def _point_in_polygon(y: np.ndarray, v: np.ndarray) -> np.ndarray:
    x, yy = y[..., 0], y[..., 1]
    inside = np.zeros(x.shape, dtype=bool)
    n = len(v)
    for i in range(n):
        (x1, y1), (x2, y2) = v[i], v[(i + 1) % n]
        crosses = (y1 > yy) != (y2 > yy)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (yy - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < xint)
    # points exactly on an edge count as inside, like the closed analytic kinds
    return inside | (_distance_to_segments(y, v, np.roll(v, -1, axis=0)) < 1e-12)


def _distance_to_segments(y, a, b) -> np.ndarray:
    p = y[..., None, :]
    ab = b - a
    t = np.clip(np.sum((p - a) * ab, axis=-1) / np.sum(ab * ab, axis=-1), 0.0, 1.0)
    closest = a + t[..., None] * ab
    return np.min(np.linalg.norm(p - closest, axis=-1), axis=-1)


# ---------------------------------------------------------------------------
# void shapes
# ---------------------------------------------------------------------------

def icosphere(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit-sphere triangulation by repeated midpoint subdivision of an
    icosahedron; ``20 * 4**level`` outward-oriented faces."""
    t = (1 + 5 ** 0.5) / 2
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    V = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    F = list(faces)
    for _ in range(level):
        cache: dict[tuple[int, int], int] = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = V[a] + V[b]
                V.append(m / np.linalg.norm(m))
                cache[key] = len(V) - 1
            return cache[key]

        new = []
        for a, b, c in F:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        F = new
    return orient_outward(np.array(V), np.array(F, dtype=np.int64))


def _box_surface(half: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    s = np.linspace(-1.0, 1.0, n + 1)
    verts, faces = [], []
    offset = 0
    for axis in range(3):
        for sign in (-1.0, 1.0):
            u, v = [(axis + 1) % 3, (axis + 2) % 3]
            U, W = np.meshgrid(s, s, indexing="ij")
            P = np.zeros(U.shape + (3,))
            P[..., axis] = sign
            P[..., u] = U
            P[..., v] = W
            verts.append(P.reshape(-1, 3))
            idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1) + offset
            a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
            c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
            faces.append(np.stack([a, b, c], 1))
            faces.append(np.stack([a, c, d], 1))
            offset += (n + 1) ** 2
    V = np.concatenate(verts) * half
    F = np.concatenate(faces)
    # merge duplicated edge vertices so the surface is closed
    V, inverse = np.unique(np.round(V, 12), axis=0, return_inverse=True)
    F = inverse.reshape(-1)[F]
    return _fix_face_orientation(V, F)


def _fix_face_orientation(V, F):
    # per-face orientation for convex shapes centred at the origin
    c = V[F].mean(axis=1)
    nrm = np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]])
    flip = np.einsum("ij,ij->i", nrm, c) < 0
    F = F.copy()
    F[flip] = F[flip][:, ::-1]
    return V, F


def signed_mesh_volume(V: np.ndarray, F: np.ndarray) -> float:
    a, b, c = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def orient_outward(V: np.ndarray, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flip all faces when the signed volume is negative."""
    if signed_mesh_volume(V, F) < 0:
        F = F[:, ::-1].copy()
    return V, F


def check_closed_mesh(F: np.ndarray) -> None:
    """Raise :class:`DegenerateMesh` unless every edge is shared by exactly two
    faces with opposite orientation."""
    F = np.asarray(F)
    if F.ndim != 2 or F.shape[1] != 3 or len(F) < 4:
        raise DegenerateMesh("a closed surface needs at least four triangles")
    if np.any(F[:, 0] == F[:, 1]) or np.any(F[:, 1] == F[:, 2]) or np.any(F[:, 0] == F[:, 2]):
        raise DegenerateMesh("triangle with repeated vertex")
    directed = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
    uniq, counts = np.unique(directed, axis=0, return_counts=True)
    if np.any(counts != 1):
        raise DegenerateMesh("inconsistent orientation or repeated edge")
    undirected = np.sort(directed, axis=1)
    _, ucounts = np.unique(undirected, axis=0, return_counts=True)
    if np.any(ucounts != 2):
        raise DegenerateMesh("surface is not closed (boundary edges present)")


def winding_number(points: np.ndarray, V: np.ndarray, F: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Generalized winding number of a closed triangulated surface."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(len(points))
    A0, B0, C0 = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
    step = max(1, chunk * 64 // max(len(F), 1))
    for s in range(0, len(points), step):
        p = points[s:s + step, None, :]
        a, b, c = A0 - p, B0 - p, C0 - p
        la, lb, lc = (np.linalg.norm(x, axis=-1) for x in (a, b, c))
        num = np.einsum("...k,...k->...", a, np.cross(b, c))
        den = (la * lb * lc + np.einsum("...k,...k->...", a, b) * lc
               + np.einsum("...k,...k->...", a, c) * lb + np.einsum("...k,...k->...", b, c) * la)
        out[s:s + step] = 2 * np.arctan2(num, den).sum(axis=1) / (4 * np.pi)
    return out


@dataclass(frozen=True, eq=False)
class VoidShape:
    """Reference void ``theta`` containing the origin; scaled by ``eps`` in the cell.

    ``rotation`` maps body-frame coordinates to the cell frame.
    """

    kind: str
    dims: tuple = ()
    rotation: np.ndarray | None = None
    mesh_vertices: np.ndarray | None = None
    mesh_faces: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "ball":
            if len(self.dims) != 1:
                raise BadShape("ball needs (radius,)")
            _positive(self.dims, "ball radius")
        elif self.kind in ("ellipsoid", "cuboid"):
            if len(self.dims) != 3:
                raise BadShape(f"{self.kind} needs three lengths")
            _positive(self.dims, f"{self.kind} lengths")
        elif self.kind == "mesh":
            V = np.asarray(self.mesh_vertices, dtype=float)
            F = np.asarray(self.mesh_faces, dtype=np.int64)
            if V.ndim != 2 or V.shape[1] != 3 or not np.all(np.isfinite(V)):
                raise BadShape("mesh vertices must be an (n, 3) finite array")
            if F.size and (F.min() < 0 or F.max() >= len(V)):
                raise DegenerateMesh("face index out of range")
            check_closed_mesh(F)
            vol = signed_mesh_volume(V, F)
            if abs(vol) <= 1e-14 * max(1.0, np.ptp(V) ** 3):
                raise BadShape("mesh encloses no volume")
            V, F = orient_outward(V, F)
            object.__setattr__(self, "mesh_vertices", V)
            object.__setattr__(self, "mesh_faces", F)
            if winding_number(np.zeros((1, 3)), V, F)[0] < 0.5:
                raise BadShape("the origin must lie inside the void")
        else:
            raise BadShape(f"unknown void kind {self.kind!r}")
        if self.rotation is not None:
            R = np.asarray(self.rotation, dtype=float)
            if R.shape != (3, 3) or not np.allclose(R @ R.T, np.eye(3), atol=1e-10) \
                    or np.linalg.det(R) < 0:
                raise BadShape("rotation must be a proper orthogonal 3x3 matrix")
            object.__setattr__(self, "rotation", R)

    @classmethod
    def ball(cls, radius: float) -> "VoidShape":
        return cls("ball", (float(radius),))

    @classmethod
    def ellipsoid(cls, a1: float, a2: float, a3: float) -> "VoidShape":
        return cls("ellipsoid", (float(a1), float(a2), float(a3)))

    @classmethod
    def cuboid(cls, h1: float, h2: float, h3: float) -> "VoidShape":
        return cls("cuboid", (float(h1), float(h2), float(h3)))

    @classmethod
    def from_mesh(cls, vertices, faces) -> "VoidShape":
        return cls("mesh", (), None, np.asarray(vertices, dtype=float),
                   np.asarray(faces, dtype=np.int64))

    def rotated(self, R) -> "VoidShape":
        R = np.asarray(R, dtype=float)
        base = np.eye(3) if self.rotation is None else self.rotation
        return replace(self, rotation=R @ base)

    @cached_property
    def volume(self) -> float:
        if self.kind == "ball":
            return 4.0 * math.pi / 3.0 * self.dims[0] ** 3
        if self.kind == "ellipsoid":
            return 4.0 * math.pi / 3.0 * float(np.prod(self.dims))
        if self.kind == "cuboid":
            return 8.0 * float(np.prod(self.dims))
        return signed_mesh_volume(self.mesh_vertices, self.mesh_faces)

    def _to_body(self, x: np.ndarray) -> np.ndarray:
        return x if self.rotation is None else x @ self.rotation

    def _to_cell(self, x: np.ndarray) -> np.ndarray:
        return x if self.rotation is None else x @ self.rotation.T

    def contains(self, xi) -> np.ndarray:
        """Closed-set membership of points given in the (unscaled) void frame."""
        xi = np.asarray(xi, dtype=float)
        p = self._to_body(xi)
        if self.kind == "ball":
            return np.sum(p * p, axis=-1) <= self.dims[0] ** 2
        if self.kind == "ellipsoid":
            return np.sum((p / np.asarray(self.dims)) ** 2, axis=-1) <= 1.0
        if self.kind == "cuboid":
            return np.all(np.abs(p) <= np.asarray(self.dims), axis=-1)
        flat = p.reshape(-1, 3)
        lo, hi = self.mesh_vertices.min(0), self.mesh_vertices.max(0)
        out = np.zeros(len(flat), dtype=bool)
        cand = np.all((flat >= lo) & (flat <= hi), axis=1)
        if cand.any():
            out[cand] = winding_number(flat[cand], self.mesh_vertices, self.mesh_faces) > 0.5
        return out.reshape(p.shape[:-1])

    def surface_mesh(self, level: int = 3) -> tuple[np.ndarray, np.ndarray]:
        """Outward-oriented closed triangulation in the cell frame.

        Analytic kinds are meshed at the given refinement level; triangulated
        voids are midpoint-subdivided until they have at least as many faces
        as the icosphere of that level.
        """
        if self.kind in ("ball", "ellipsoid"):
            V, F = icosphere(level)
            scale = np.full(3, self.dims[0]) if self.kind == "ball" else np.asarray(self.dims)
            V = V * scale
        elif self.kind == "cuboid":
            V, F = _box_surface(np.asarray(self.dims), 2 ** level)
        else:
            V, F = self.mesh_vertices, self.mesh_faces
            while len(F) < 20 * 4 ** level:
                V, F = subdivide(V, F)
        return self._to_cell(V), F

    def surface_samples(self) -> np.ndarray:
        """Points on the void surface (cell frame) used for clearance checks."""
        V, _ = self.surface_mesh(3 if self.kind != "mesh" else 0)
        if self.kind in ("ball", "ellipsoid"):
            scale = np.full(3, self.dims[0]) if self.kind == "ball" else np.asarray(self.dims)
            axes = np.concatenate([np.diag(scale), -np.diag(scale)])
            V = np.concatenate([V, self._to_cell(axes)])
        return V

    @property
    def min_width(self) -> float:
        """Smallest width of the void (before scaling by eps)."""
        if self.kind == "ball":
            return 2 * self.dims[0]
        if self.kind in ("ellipsoid", "cuboid"):
            return 2 * min(self.dims)
        V = self._to_cell(self.mesh_vertices)
        return float(np.min(V.max(0) - V.min(0)))

    def describe(self) -> str:
        base = {"ball": "ball r={:g}", "ellipsoid": "ellipsoid ({:g}, {:g}, {:g})",
                "cuboid": "cuboid half-edges ({:g}, {:g}, {:g})"}
        if self.kind == "mesh":
            text = f"triangulated surface ({len(self.mesh_faces)} faces)"
        else:
            text = base[self.kind].format(*self.dims)
        return text + ("" if self.rotation is None else " (rotated)")


def subdivide(V: np.ndarray, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint subdivision of a triangle mesh (geometry unchanged)."""
    edges = np.sort(np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]]), axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    mids = 0.5 * (V[uniq[:, 0]] + V[uniq[:, 1]])
    n, m = len(V), len(F)
    ab, bc, ca = inv[:m] + n, inv[m:2 * m] + n, inv[2 * m:] + n
    a, b, c = F[:, 0], F[:, 1], F[:, 2]
    newF = np.concatenate([np.stack([a, ab, ca], 1), np.stack([b, bc, ab], 1),
                           np.stack([c, ca, bc], 1), np.stack([ab, bc, ca], 1)])
    return np.concatenate([V, mids]), newF


def void_measure(void: VoidShape) -> float:
    """Volume of the reference void (exact for analytic kinds, divergence
    theorem for triangulated surfaces)."""
    return void.volume


def read_triangle_soup(path) -> VoidShape:
    """Read ``v x y z`` / ``f i j k`` records (1-based indices) into a void."""
    verts, faces = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, *rest = line.split()
        try:
            if tag == "v":
                verts.append([float(t) for t in rest[:3]])
            elif tag == "f":
                faces.append([int(t.split("/")[0]) - 1 for t in rest[:3]])
            else:
                raise ValueError(tag)
        except ValueError:
            raise DegenerateMesh(f"{path}:{lineno}: cannot parse {raw!r}") from None
    return VoidShape.from_mesh(np.array(verts), np.array(faces, dtype=np.int64))


def write_triangle_soup(path, V, F) -> None:
    lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in V]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in F]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# periodicity cell
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CellGeometry:
    cross_section: CrossSection
    void: VoidShape
    center: tuple
    epsilon: float
    bc_kind: str = "neumann"
    clearance: float = math.inf

    @property
    def has_void(self) -> bool:
        return self.epsilon > 0

    def void_contains(self, x) -> np.ndarray:
        """Membership in the scaled, shifted void ``x0 + eps * theta``."""
        x = np.asarray(x, dtype=float)
        if not self.has_void:
            return np.zeros(x.shape[:-1], dtype=bool)
        return self.void.contains((x - np.asarray(self.center)) / self.epsilon)

    def unperturbed(self) -> "CellGeometry":
        return replace(self, epsilon=0.0, clearance=_cell_distance(self.cross_section, np.asarray(self.center)[None])[0])

    def with_epsilon(self, eps: float) -> "CellGeometry":
        return make_cell(self.cross_section, self.void, self.center, eps, self.bc_kind)


def _cell_distance(cs: CrossSection, p: np.ndarray) -> np.ndarray:
    return np.minimum.reduce([cs.distance_to_boundary(p[:, :2]), p[:, 2], 1.0 - p[:, 2]])


def make_cell(cs: CrossSection, void: VoidShape, center, eps: float, bc: str = "neumann",
              min_clearance: float = 0.0) -> CellGeometry:
    """Validate and build one period of the perforated waveguide.

    Raises :class:`VoidEscapesCell` unless the scaled void stays strictly
    inside ``omega x (0, 1)`` with clearance above ``min_clearance``.
    """
    bc = normalize_bc(bc)
    if not (math.isfinite(eps) and eps > 0):
        raise BadScale(f"eps must be positive, got {eps!r}")
    x0 = np.asarray(center, dtype=float)
    if x0.shape != (3,) or not np.all(np.isfinite(x0)):
        raise ValueError("center must be a finite 3-vector")
    if cs.area <= 0 or void.volume <= 0:
        raise BadShape("cross-section area and void volume must be positive")
    if not (0.0 < x0[2] < 1.0) or not cs.contains(x0[:2]) or cs.distance_to_boundary(x0[:2]) <= 0:
        raise VoidEscapesCell(f"center {tuple(x0)} is not interior to the cell")
    pts = x0 + eps * void.surface_samples()
    clearance = float(_cell_distance(cs, pts).min())
    if clearance <= max(min_clearance, 0.0):
        raise VoidEscapesCell(
            f"scaled void (eps={eps:g}) leaves the cell: clearance {clearance:.4g}"
            + (f" below required {min_clearance:.4g}" if min_clearance > 0 else ""))
    return CellGeometry(cs, void, tuple(float(c) for c in x0), float(eps), bc, clearance)
