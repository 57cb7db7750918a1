"""Cross-section eigenpairs ``-Lap V = M V`` on ``omega`` (Neumann or Dirichlet).

The numerical solver discretizes ``omega`` with the cut-cell finite-volume
scheme of :mod:`voidgap._cutcell`; :func:`analytic_cross_modes` provides
closed-form modes of rectangles and disks, used as oracles and for the exact
path of the gap formulas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special
from scipy.spatial import cKDTree

from ._cutcell import CutCellGrid, build_grid
from ._eigen import lowest_eigenpairs
from .errors import PointOutsideDomain, ResolutionTooCoarse
from .geometry import CrossSection

MIN_CELLS_PER_SIDE = 10


def _cross_bc(bc: str) -> str:
    bc = str(bc).lower()
    if bc in ("neumann",):
        return "neumann"
    if bc in ("dirichlet", "mixed", "mixed_dirichlet_lateral"):
        return "dirichlet"
    raise ValueError(f"unknown cross-section boundary condition {bc!r}")


@dataclass(frozen=True, eq=False)
class ModeSet:
    """First eigenpairs of the cross-section problem, ascending.

    Eigenfunctions are normalized in ``L2(omega)``.  ``evaluate(q, y)``
    returns ``(V_q(y), grad V_q(y))`` for the 1-based mode index ``q``.
    """

    bc_kind: str
    eigenvalues: np.ndarray
    cross_section: CrossSection | None = None
    h: float | None = None
    error_estimate: np.ndarray | None = None
    raw_eigenvalues: np.ndarray | None = None
    residuals: np.ndarray | None = None
    grid: CutCellGrid | None = field(default=None, repr=False)
    vectors: np.ndarray | None = field(default=None, repr=False)
    _evaluator: Callable | None = field(default=None, repr=False)

    @classmethod
    def from_eigenvalues(cls, values, bc_kind: str = "neumann") -> "ModeSet":
        """Eigenvalue-only mode set (no evaluator), e.g. for lattice work."""
        return cls(_cross_bc(bc_kind), np.sort(np.asarray(values, dtype=float)))

    @property
    def count(self) -> int:
        return len(self.eigenvalues)

    def evaluate(self, q: int, y) -> tuple[float, np.ndarray]:
        if not 1 <= q <= self.count:
            raise IndexError(f"mode index {q} outside 1..{self.count}")
        if self._evaluator is None:
            raise ValueError("this mode set carries eigenvalues only")
        y = np.asarray(y, dtype=float)
        if self.cross_section is not None and not bool(self.cross_section.contains(y)):
            raise PointOutsideDomain(f"point {tuple(y)} is outside the cross-section")
        return self._evaluator(q, y)

    def gram(self) -> np.ndarray:
        """Discrete ``L2`` Gram matrix of the stored eigenvectors."""
        if self.vectors is None:
            raise ValueError("no discrete eigenvectors stored")
        V = self.vectors
        return V.conj().T @ (self.grid.kappa[:, None] * V) * self.grid.cell_volume


def eval_mode(ms: ModeSet, q: int, y) -> tuple[float, np.ndarray]:
    """Value and gradient of the ``q``-th (1-based) cross-section mode at ``y``."""
    return ms.evaluate(q, y)


def _grid_for(cs: CrossSection, h: float):
    x0, x1, y0, y1 = cs.bounds
    widths = np.array([x1 - x0, y1 - y0])
    if widths.min() / h < MIN_CELLS_PER_SIDE:
        raise ResolutionTooCoarse(
            f"h={h:g} gives fewer than {MIN_CELLS_PER_SIDE} cells across the shortest side")
    if cs.kind == "rectangle":
        shape = np.maximum(1, np.round(widths / h)).astype(int)
    else:
        shape = np.ceil(widths / h - 1e-9).astype(int)
    return np.array([x0, y0]), widths / shape, tuple(shape)


def _discrete_modes(cs: CrossSection, bc: str, count: int, h: float):
    origin, spacing, shape = _grid_for(cs, h)
    if bc == "neumann":
        grid = build_grid(origin, spacing, shape, fluid=cs.contains, subsample=8)
    else:
        grid = build_grid(origin, spacing, shape, dirichlet_inside=cs.contains)
    w, V, res = lowest_eigenpairs(grid.stiffness(), grid.mass(), count, sigma=-1.0)
    V = V / math.sqrt(grid.cell_volume)
    # deterministic signs: largest-magnitude entry positive (V_1 > 0 then)
    pivot = np.argmax(np.abs(V), axis=0)
    V = V * np.sign(V[pivot, np.arange(V.shape[1])])[None, :]
    return grid, w, V, res


class _LocalQuadraticFit:
    """Point values and gradients by weighted quadratic least squares over
    nearby cell centres (plus Dirichlet wall points carrying the value 0)."""

    def __init__(self, grid: CutCellGrid, vectors: np.ndarray, dirichlet: bool):
        self.h = float(grid.spacing.max())
        pts = grid.centers
        vals = vectors
        if dirichlet and len(grid.boundary_points):
            pts = np.concatenate([pts, grid.boundary_points])
            vals = np.concatenate([vals, np.zeros((len(grid.boundary_points), vals.shape[1]))])
        self.points = pts
        self.values = vals
        self.tree = cKDTree(pts)

    def __call__(self, q: int, y: np.ndarray):
        radius = 2.5 * self.h
        idx = self.tree.query_ball_point(y, radius)
        if len(idx) < 10:
            _, idx = self.tree.query(y, k=12)
        idx = np.asarray(idx)
        s = (self.points[idx] - y) / self.h
        design = np.column_stack([np.ones(len(s)), s[:, 0], s[:, 1],
                                  s[:, 0] ** 2, s[:, 0] * s[:, 1], s[:, 1] ** 2])
        wts = np.exp(-0.5 * np.sum(s * s, axis=1))
        coef, *_ = np.linalg.lstsq(design * wts[:, None], self.values[idx, q - 1] * wts, rcond=None)
        return float(coef[0]), np.array([coef[1], coef[2]]) / self.h


def solve_cross_modes(cs: CrossSection, bc: str, count: int, h: float,
                      extrapolate: bool = False) -> ModeSet:
    """Lowest ``count`` eigenpairs of the cross-section Laplacian.

    With ``extrapolate=True`` the problem is also solved on the grid of
    spacing ``h/2``; the returned eigenvalues are Richardson-extrapolated
    (second order) and ``error_estimate`` holds ``|M(h/2) - M(h)| / 3``.
    Eigenfunctions always come from the finest grid.
    """
    bc = _cross_bc(bc)
    if count < 2:
        raise ValueError("count must be at least 2")
    if not (h > 0):
        raise ResolutionTooCoarse("h must be positive")
    grid, w, V, res = _discrete_modes(cs, bc, count, h)
    err = raw = None
    if extrapolate:
        fine_grid, fine_w, fine_V, fine_res = _discrete_modes(cs, bc, count, h / 2)
        raw = fine_w
        err = np.abs(fine_w - w) / 3.0
        w = fine_w + (fine_w - w) / 3.0
        grid, V, res, h = fine_grid, fine_V, fine_res, h / 2
    fit = _LocalQuadraticFit(grid, V, bc == "dirichlet")
    return ModeSet(bc, w, cs, h, err, raw, res, grid, V, fit)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def analytic_cross_modes(cs: CrossSection, bc: str, count: int) -> ModeSet:
    """Exact modes of a rectangle (separation of variables) or disk (Bessel)."""
    bc = _cross_bc(bc)
    if cs.kind == "rectangle":
        entries = _rectangle_modes(cs.dims, bc, count)
    elif cs.kind == "disk":
        entries = _disk_modes(cs.dims[0], bc, count)
    else:
        raise ValueError("closed-form modes exist only for rectangles and disks")
    entries = entries[:count]
    values = np.array([e[0] for e in entries])
    funcs = [e[1] for e in entries]
    return ModeSet(bc, values, cs, None, _evaluator=lambda q, y: funcs[q - 1](y))


def _rectangle_modes(dims, bc, count):
    a, b = dims
    n = count + 2
    out = []
    start = 0 if bc == "neumann" else 1
    for p in range(start, n + 1):
        for q in range(start, n + 1):
            val = math.pi ** 2 * ((p / a) ** 2 + (q / b) ** 2)
            out.append((val, p, q))
    out.sort()
    result = []
    for val, p, q in out:
        kx, ky = p * math.pi / a, q * math.pi / b
        if bc == "neumann":
            c = math.sqrt((1 if p == 0 else 2) * (1 if q == 0 else 2) / (a * b))

            def f(y, kx=kx, ky=ky, c=c):
                return (c * math.cos(kx * y[0]) * math.cos(ky * y[1]),
                        np.array([-c * kx * math.sin(kx * y[0]) * math.cos(ky * y[1]),
                                  -c * ky * math.cos(kx * y[0]) * math.sin(ky * y[1])]))
        else:
            c = 2.0 / math.sqrt(a * b)

            def f(y, kx=kx, ky=ky, c=c):
                return (c * math.sin(kx * y[0]) * math.sin(ky * y[1]),
                        np.array([c * kx * math.cos(kx * y[0]) * math.sin(ky * y[1]),
                                  c * ky * math.sin(kx * y[0]) * math.cos(ky * y[1])]))
        result.append((val, f))
    return result


def _disk_modes(R, bc, count):
    nmax = count + 2
    out = []
    for n in range(nmax + 1):
        if bc == "dirichlet":
            roots = special.jn_zeros(n, nmax)
        else:
            roots = special.jnp_zeros(n, nmax) if n > 0 else np.concatenate([[0.0], special.jnp_zeros(0, nmax)])
        for root in roots:
            kinds = ("c",) if n == 0 else ("c", "s")
            for kind in kinds:
                out.append(((root / R) ** 2, n, kind, root))
    out.sort(key=lambda e: (e[0], e[1], e[2]))
    result = []
    for val, n, kind, root in out:
        k = root / R
        ang = 2 * math.pi if n == 0 else math.pi
        if root == 0.0:
            norm2 = math.pi * R * R
        elif bc == "dirichlet":
            norm2 = ang * R * R / 2 * special.jv(n + 1, root) ** 2
        else:
            norm2 = ang * R * R / 2 * (1 - (n / root) ** 2) * special.jv(n, root) ** 2
        c = 1.0 / math.sqrt(norm2)
        result.append((val, _bessel_mode(n, kind, k, c)))
    return result


def _bessel_mode(n, kind, k, c):
    def f(y):
        r = math.hypot(y[0], y[1])
        phi = math.atan2(y[1], y[0])
        ang, dang = (math.cos(n * phi), -n * math.sin(n * phi)) if kind == "c" else \
            (math.sin(n * phi), n * math.cos(n * phi))
        value = c * special.jv(n, k * r) * ang
        if r < 1e-14:
            if n == 1:
                return value, c * k / 2 * (np.array([1.0, 0.0]) if kind == "c" else np.array([0.0, 1.0]))
            return value, np.zeros(2)
        dr = c * k * special.jvp(n, k * r) * ang
        dphi = c * special.jv(n, k * r) * dang / r
        return value, np.array([dr * math.cos(phi) - dphi * math.sin(phi),
                                dr * math.sin(phi) + dphi * math.cos(phi)])
    return f
