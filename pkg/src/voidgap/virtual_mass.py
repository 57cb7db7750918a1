"""Virtual-mass tensor of a void from exterior Neumann problems.

For a unit direction ``d`` the exterior potential ``W`` solves Laplace's
equation outside the void with flux ``dW/dn = -n.d`` on the surface and
decays at infinity.  Its far field is a dipole ``-(Q d).grad Phi`` with
``Phi(xi) = 1/(4 pi |xi|)``; the columns of ``Q`` are read off from the
first moments of a single-layer density.

Discretization: piecewise-constant density on a flat-triangle surface mesh,
collocation at centroids, subdivided-triangle quadrature for near
interactions, and a diagonal fixed by the discrete Gauss identity (the
double-layer kernel integrates to ``-1/2`` against constants from the
interior side), which restores second-order convergence on curved surfaces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.special import elliprd

from .errors import IllConditioned, MeshTooCoarse, UnsupportedShape
from .geometry import VoidShape

DEFAULT_MESH_LEVEL = 3
MIN_FACES = 80
CONDITION_LIMIT = 1e10
NEAR_FACTOR = 2.0
_ROW_CHUNK = 512


@dataclass(frozen=True, eq=False)
class VirtualMassTensor:
    """Symmetric 3x3 virtual-mass tensor ``Q`` and its derived blocks.

    Attributes
    ----------
    q : ndarray
        The (symmetrized) tensor.
    q_tilde : ndarray
        ``Q + volume * I``; negative semidefinite for any void.
    volume : float
        Void volume used for ``q_tilde``.
    asymmetry : float
        ``max|Q - Q^T| / max|Q|`` before symmetrization (0 for closed forms).
    mesh_level : int or None
        Surface refinement used, ``None`` for closed forms.
    """

    q: np.ndarray
    volume: float
    asymmetry: float = 0.0
    mesh_level: int | None = None
    n_faces: int | None = None
    condition: float | None = None
    q_raw: np.ndarray | None = field(default=None, repr=False)

    @property
    def q_tilde(self) -> np.ndarray:
        return self.q + self.volume * np.eye(3)

    @property
    def upper_left_block(self) -> np.ndarray:
        return self.q[:2, :2].copy()

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.q)

    def rotated(self, R) -> "VirtualMassTensor":
        R = np.asarray(R, dtype=float)
        return VirtualMassTensor(R @ self.q @ R.T, self.volume, self.asymmetry,
                                 self.mesh_level, self.n_faces, self.condition)


@dataclass(frozen=True, eq=False)
class ExteriorSolution:
    """Single-layer density on the surface mesh and the resulting dipole
    coefficient vector ``Q d``."""

    direction: np.ndarray
    density: np.ndarray
    dipole: np.ndarray
    centroids: np.ndarray = field(repr=False)
    areas: np.ndarray = field(repr=False)


class _SingleLayerSystem:
    """Bordered collocation system ``[[-I/2 + K', a], [a^T, 0]]``."""

    def __init__(self, vertices: np.ndarray, faces: np.ndarray):
        if len(faces) < MIN_FACES:
            raise MeshTooCoarse(f"surface mesh has {len(faces)} faces, need at least {MIN_FACES}")
        P0, P1, P2 = (vertices[faces[:, i]] for i in range(3))
        cr = np.cross(P1 - P0, P2 - P0)
        area = 0.5 * np.linalg.norm(cr, axis=1)
        if np.any(area <= 0):
            raise MeshTooCoarse("surface mesh contains degenerate triangles")
        normal = cr / (2 * area[:, None])
        cent = (P0 + P1 + P2) / 3
        if np.sum(np.einsum("ij,ij->i", cent, normal) * area) < 0:
            normal = -normal
        self.area, self.normal, self.centroid = area, normal, cent
        self.P0, self.E1, self.E2 = P0, P1 - P0, P2 - P0
        n = len(faces)
        B = np.zeros((n + 1, n + 1))
        B[:n, :n] = self._kernel()
        B[:n, n] = area
        B[n, :n] = area
        anorm = np.linalg.norm(B, 1)
        self.lu, piv, info = sla.lapack.dgetrf(B)
        if info != 0:
            raise IllConditioned("boundary-integral matrix is singular")
        self.piv = piv
        rcond, _ = sla.lapack.dgecon(self.lu, anorm, norm="1")
        self.condition = math.inf if rcond == 0 else 1.0 / rcond
        if self.condition > CONDITION_LIMIT:
            raise IllConditioned(f"condition estimate {self.condition:.3g} exceeds {CONDITION_LIMIT:g}")

    def _kernel(self) -> np.ndarray:
        n = len(self.area)
        c, nrm, area = self.centroid, self.normal, self.area
        reach = NEAR_FACTOR * np.sqrt(area)
        qp, qw = _subdivided_rule(4)
        K = np.empty((n, n))
        for start in range(0, n, _ROW_CHUNK):
            rows = slice(start, min(start + _ROW_CHUNK, n))
            R = c[rows, None, :] - c[None, :, :]
            r = np.linalg.norm(R, axis=2)
            local = np.arange(rows.start, rows.stop)
            r[np.arange(len(local)), local] = 1.0
            blk = -np.einsum("ik,ijk->ij", nrm[rows], R) / (4 * np.pi * r ** 3) * area[None, :]
            near_i, near_j = np.nonzero(r < reach[None, :])
            off = local[near_i] != near_j
            near_i, near_j = near_i[off], near_j[off]
            Y = (self.P0[near_j][:, None, :] + self.E1[near_j][:, None, :] * qp[None, :, 0, None]
                 + self.E2[near_j][:, None, :] * qp[None, :, 1, None])
            D = c[local[near_i]][:, None, :] - Y
            dd = np.linalg.norm(D, axis=2)
            blk[near_i, near_j] = -(np.einsum("ik,iqk->iq", nrm[local[near_i]], D)
                                    / (4 * np.pi * dd ** 3) * qw).sum(1) * area[near_j]
            blk[np.arange(len(local)), local] = 0.0
            K[rows] = blk
        # Gauss identity sum_i a_i K'_ij = -a_j/2 fixes K'_jj; the jump adds another -1/2
        K[np.diag_indices(n)] = -1.0 - (area[:, None] * K).sum(0) / area
        return K

    def solve(self, flux: np.ndarray) -> np.ndarray:
        rhs = np.concatenate([flux, np.zeros((1,) + flux.shape[1:])])
        sol, info = sla.lapack.dgetrs(self.lu, self.piv, rhs)
        if info != 0:
            raise IllConditioned("back substitution failed")
        return sol[:-1]

    def dipoles(self, density: np.ndarray) -> np.ndarray:
        """``Q d`` for each density column (first moment with a sign flip)."""
        return -(self.centroid.T @ (density * self.area[:, None]))


def _subdivided_rule(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-weight rule on the reference triangle from the centroids of its
    ``m**2`` congruent sub-triangles."""
    pts = []
    for i in range(m):
        for j in range(m - i):
            pts.append(((i + 1 / 3) / m, (j + 1 / 3) / m))
            if i + j < m - 1:
                pts.append(((i + 2 / 3) / m, (j + 2 / 3) / m))
    pts = np.array(pts)
    return pts, np.full(len(pts), 1.0 / len(pts))


def _system_for(void: VoidShape, mesh_level: int) -> _SingleLayerSystem:
    if mesh_level < 1:
        raise MeshTooCoarse("mesh_level must be at least 1")
    V, F = void.surface_mesh(mesh_level)
    return _SingleLayerSystem(V, F)


def solve_exterior_neumann(void: VoidShape, direction, mesh_level: int = DEFAULT_MESH_LEVEL
                           ) -> ExteriorSolution:
    """Solve the exterior problem with flux ``-n.direction`` on the void surface.

    A zero direction gives the zero density without assembling anything.
    """
    d = np.asarray(direction, dtype=float).reshape(3)
    if not np.any(d):
        V, F = void.surface_mesh(mesh_level)
        nf = len(F)
        return ExteriorSolution(d, np.zeros(nf), np.zeros(3), np.zeros((nf, 3)), np.zeros(nf))
    system = _system_for(void, mesh_level)
    sigma = system.solve(-(system.normal @ d)[:, None])
    return ExteriorSolution(d, sigma[:, 0], system.dipoles(sigma)[:, 0],
                            system.centroid, system.area)


def compute_virtual_mass(void: VoidShape, mesh_level: int = DEFAULT_MESH_LEVEL) -> VirtualMassTensor:
    """Virtual-mass tensor from three exterior solves sharing one factorization.

    The returned ``q`` is ``(Q + Q^T)/2``; the relative asymmetry of the raw
    tensor is kept as a quality metric.
    """
    system = _system_for(void, mesh_level)
    sigma = system.solve(-system.normal)
    Q = system.dipoles(sigma)
    scale = np.abs(Q).max()
    asym = float(np.abs(Q - Q.T).max() / scale) if scale > 0 else 0.0
    return VirtualMassTensor(0.5 * (Q + Q.T), void.volume, asym, mesh_level,
                             len(system.area), system.condition, Q)


def depolarization_factors(semi_axes) -> np.ndarray:
    """Ellipsoid depolarization factors ``L_i`` (summing to one) via Carlson's ``R_D``."""
    a = np.asarray(semi_axes, dtype=float)
    prod = float(np.prod(a))
    return np.array([prod / 3.0 * elliprd(a[(i + 1) % 3] ** 2, a[(i + 2) % 3] ** 2, a[i] ** 2)
                     for i in range(3)])


def analytic_virtual_mass(void: VoidShape) -> VirtualMassTensor:
    """Closed-form tensor for balls and ellipsoids (rotation-aware).

    In the body frame ``Q = -volume * diag(1 + k_i)`` with the added-mass
    coefficients ``k_i = L_i / (1 - L_i)``; a ball gives ``-(3/2) volume I``.
    """
    if void.kind == "ball":
        axes = np.full(3, void.dims[0])
    elif void.kind == "ellipsoid":
        axes = np.asarray(void.dims, dtype=float)
    else:
        raise UnsupportedShape(f"no closed form for void kind {void.kind!r}")
    L = depolarization_factors(axes)
    k = L / (1.0 - L)
    Q = -void.volume * np.diag(1.0 + k)
    if void.rotation is not None:
        Q = void.rotation @ Q @ void.rotation.T
    return VirtualMassTensor(Q, void.volume)
