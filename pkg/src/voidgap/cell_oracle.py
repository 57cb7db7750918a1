"""Direct solver for the quasi-periodic problem on one perforated period.

The cell ``omega x (0, 1)`` minus the scaled void is discretized with the
cut-cell finite-volume scheme of :mod:`voidgap._cutcell`; the Bloch phase
``exp(i eta)`` sits on the links that cross ``z = 1 -> z = 0``, so the
matrix stays Hermitian.  Eigenpairs come from LOBPCG preconditioned by
smoothed-aggregation AMG (dense solves for tiny grids).
"""
from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._cutcell import CutCellGrid, build_grid
from ._eigen import DENSE_LIMIT, amg_preconditioner, lowest_eigenpairs
from .cross_modes import ModeSet, solve_cross_modes
from .dispersion import ordered_spectrum, wrap_eta
from .errors import GeometryUnresolved, InsufficientPoints, VoidEscapesCell
from .geometry import CellGeometry

MIN_ETA_POINTS = 16
SOLVER_TOL = 1e-8
GAP_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class CellSpectrum:
    """Lowest eigenvalues of the cell problem at one Bloch parameter."""

    geometry: CellGeometry
    eta: float
    eigenvalues: np.ndarray
    h: float
    residuals: np.ndarray
    n_unknowns: int


@dataclass(frozen=True, eq=False)
class BandStructure:
    """Band segments ``[min, max]`` over an ``eta`` grid and the gaps between them."""

    epsilon: float
    eta_grid: np.ndarray
    values: np.ndarray            # (len(eta_grid), n_bands)
    h: float

    @property
    def segments(self) -> np.ndarray:
        return np.column_stack([self.values.min(axis=0), self.values.max(axis=0)])

    @property
    def gaps(self) -> list[tuple[int, float, float]]:
        """``(n, lower, upper)`` for each open interval between bands ``n`` and ``n+1`` (1-based).

        Openings below ``GAP_TOLERANCE`` relative to the band value are
        treated as touching bands (solver round-off at a crossing).
        """
        seg = self.segments
        return [(n + 1, float(seg[n, 1]), float(seg[n + 1, 0]))
                for n in range(len(seg) - 1)
                if seg[n + 1, 0] - seg[n, 1] > GAP_TOLERANCE * max(1.0, abs(seg[n, 1]))]

    def gap_after(self, n: int) -> tuple[float, float] | None:
        for k, lo, hi in self.gaps:
            if k == n:
                return lo, hi
        return None


class CellDiscretization:
    """Grid and mass matrix for one geometry and spacing, shared by all
    Bloch parameters."""

    def __init__(self, geom: CellGeometry, h: float):
        _check_resolution(geom, h)
        cs = geom.cross_section
        x0, x1, y0, y1 = cs.bounds
        widths = np.array([x1 - x0, y1 - y0, 1.0])
        shape = np.maximum(1, np.round(widths / h)).astype(int)
        if cs.kind != "rectangle":
            shape[:2] = np.ceil(widths[:2] / h - 1e-9).astype(int)
        spacing = widths / shape
        origin = np.array([x0, y0, 0.0])
        lateral_dirichlet = geom.bc_kind == "mixed"
        section_is_box = cs.kind == "rectangle"

        def fluid(p):
            inside = ~geom.void_contains(p)
            if not lateral_dirichlet and not section_is_box:
                inside &= cs.contains(p[..., :2])
            return inside

        need_fluid = geom.has_void or (not lateral_dirichlet and not section_is_box)
        dirichlet = (lambda p: cs.contains(p[..., :2])) if lateral_dirichlet else None
        self.grid: CutCellGrid = build_grid(origin, spacing, shape,
                                            fluid=fluid if need_fluid else None,
                                            dirichlet_inside=dirichlet, periodic_axis=2)
        self.geometry = geom
        self.h = float(h)
        self.mass = self.grid.mass()

    @property
    def n(self) -> int:
        return self.grid.n

    def solve(self, eta: float, count: int):
        eta = wrap_eta(eta)
        A = self.grid.stiffness(eta)
        if self.n <= DENSE_LIMIT:
            return lowest_eigenpairs(A, self.mass, count, method="dense")
        # AMG is built on the Bloch matrix itself: the phase on the wrap plane
        # changes the low end of the spectrum too much to share one hierarchy
        precond = amg_preconditioner(A + self.mass)
        return lowest_eigenpairs(A, self.mass, count, method="lobpcg",
                                 precond=precond, tol=SOLVER_TOL)


def _check_resolution(geom: CellGeometry, h: float) -> None:
    if not h > 0:
        raise GeometryUnresolved("grid spacing must be positive")
    if geom.has_void:
        span = geom.epsilon * geom.void.min_width
        if span < 3 * h:
            raise GeometryUnresolved(
                f"void width {span:.4g} spans fewer than 3 cells of size {h:.4g}")
        if geom.clearance < 2 * h:
            raise VoidEscapesCell(
                f"clearance {geom.clearance:.4g} is below two grid cells ({2 * h:.4g})")


_CACHE: dict = {}
_CACHE_LOCK = threading.Lock()
_CACHE_SIZE = 8


def _geometry_key(geom: CellGeometry, h: float):
    cs, void = geom.cross_section, geom.void
    parts = [cs.kind, tuple(cs.dims), None if cs.vertices is None else np.asarray(cs.vertices).tobytes(),
             void.kind, tuple(void.dims),
             None if void.rotation is None else void.rotation.tobytes(),
             None if void.mesh_vertices is None else void.mesh_vertices.tobytes(),
             tuple(geom.center), geom.epsilon if geom.has_void else 0.0, geom.bc_kind, float(h)]
    return tuple(parts)


def discretize(geom: CellGeometry, h: float) -> CellDiscretization:
    """Cached :class:`CellDiscretization` for ``(geom, h)``."""
    key = _geometry_key(geom, h)
    with _CACHE_LOCK:
        disc = _CACHE.get(key)
    if disc is None:
        disc = CellDiscretization(geom, h)
        with _CACHE_LOCK:
            if len(_CACHE) >= _CACHE_SIZE:
                _CACHE.pop(next(iter(_CACHE)))
            _CACHE[key] = disc
    return disc


def clear_cache() -> None:
    with _CACHE_LOCK:
        _CACHE.clear()


def solve_cell_problem(geom: CellGeometry, eta: float, count: int, h: float) -> CellSpectrum:
    """Lowest ``count`` eigenvalues of the quasi-periodic cell problem at ``eta``."""
    if not 1 <= count <= 10:
        raise ValueError("count must be between 1 and 10")
    disc = discretize(geom, h)
    w, _, res = disc.solve(eta, count)
    return CellSpectrum(geom, wrap_eta(eta), np.clip(w, 0.0, None), disc.h, res, disc.n)


def default_eta_grid(n: int = 32) -> np.ndarray:
    """``n`` equispaced points in ``[0, 2 pi)``; even ``n`` includes ``pi``."""
    return 2 * math.pi * np.arange(n) / n


def compute_bands(geom: CellGeometry, eta_grid, n_bands: int, h: float, threads: int = 1
                  ) -> BandStructure:
    """Band functions on ``eta_grid`` (at least 16 points) and their segments."""
    etas = np.asarray(eta_grid, dtype=float)
    if len(etas) < MIN_ETA_POINTS:
        raise InsufficientPoints(f"eta grid needs at least {MIN_ETA_POINTS} points")
    if np.any(etas < 0) or np.any(etas >= 2 * math.pi):
        raise ValueError("eta grid must lie in [0, 2 pi)")
    discretize(geom, h)

    def one(eta):
        return solve_cell_problem(geom, eta, n_bands, h).eigenvalues

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, etas))
    else:
        rows = [one(e) for e in etas]
    return BandStructure(geom.epsilon, etas, np.array(rows), float(h))


# ---------------------------------------------------------------------------
# epsilon sweeps
# ---------------------------------------------------------------------------

def branch_rank(ms: ModeSet, eta: float, branch: str) -> int:
    """1-based position of the first-mode branch ``+`` (label ``(1, 0)``) or
    ``-`` (label ``(1, -1)``) in the ordered unperturbed spectrum."""
    target = {"+": (1, 0), "-": (1, -1)}[branch]
    k = 1
    while True:
        rows = ordered_spectrum(ms, eta, k)
        if (rows[-1][1], rows[-1][2]) == target:
            return k
        k += 1
        if k > 10:
            raise ValueError(f"branch {branch} is not among the lowest 10 values at eta={eta:g}")


@dataclass(frozen=True, eq=False)
class EpsilonSweepRow:
    epsilon: float
    eta: float
    k: int
    lambda_coarse: float
    lambda_fine: float | None
    deviation: float
    extrapolated: bool


@dataclass(frozen=True, eq=False)
class EpsilonFit:
    """Least-squares slope of the eigenvalue shift against ``eps^3``."""

    slope: float
    residual: float
    eta: float
    branch: str
    k: int
    epsilons: np.ndarray
    deviations: np.ndarray
    rows: list = field(default_factory=list, repr=False)

    def c0_estimate(self) -> float:
        """Largest ``|deviation - slope eps^3| / eps^3.5`` over the sweep."""
        resid = np.abs(self.deviations - self.slope * self.epsilons ** 3)
        return float(np.max(resid / self.epsilons ** 3.5))


def eigenvalue_shifts(geom: CellGeometry, eps_list, eta: float, k: int, h: float,
                      extrapolate: bool = True) -> tuple[np.ndarray, list[EpsilonSweepRow]]:
    """Shift ``Lambda^eps_k(eta) - Lambda^0_k(eta)`` for each ``eps``.

    The shift is measured against the void-free problem on the same grid,
    which removes the lateral discretization error; with ``extrapolate`` the
    shifts on spacings ``h`` and ``h/2`` are combined by second-order
    Richardson extrapolation.
    """
    spacings = [h, h / 2] if extrapolate else [h]
    base = [solve_cell_problem(geom.unperturbed(), eta, k, s).eigenvalues[k - 1] for s in spacings]
    devs, rows = [], []
    for eps in eps_list:
        g = geom.with_epsilon(float(eps))
        lam = [solve_cell_problem(g, eta, k, s).eigenvalues[k - 1] for s in spacings]
        d = [lv - b for lv, b in zip(lam, base)]
        dev = d[-1] + (d[-1] - d[0]) / 3.0 if extrapolate else d[0]
        devs.append(dev)
        rows.append(EpsilonSweepRow(float(eps), float(eta), k, float(lam[0]),
                                    float(lam[1]) if extrapolate else None, float(dev), extrapolate))
    return np.array(devs), rows


def fit_epsilon_cubed(geom: CellGeometry, eps_list, eta: float = math.pi, branch: str = "-",
                      h: float = 1 / 32, *, mode_set: ModeSet | None = None,
                      extrapolate: bool = True) -> EpsilonFit:
    """Slope through the origin of the eigenvalue shift against ``eps^3``.

    ``branch`` selects the first-mode curve; at ``eta = pi`` ``"-"`` is the
    lower and ``"+"`` the upper of the two crossing values.
    """
    eps = np.asarray(sorted(float(e) for e in eps_list))
    if len(eps) < 4:
        raise InsufficientPoints("an eps^3 fit needs at least four eps values")
    if mode_set is None:
        mode_set = solve_cross_modes(geom.cross_section, geom.bc_kind, 6, h)
    k = branch_rank(mode_set, eta, branch)
    devs, rows = eigenvalue_shifts(geom, eps, eta, k, h, extrapolate)
    x = eps ** 3
    slope = float(x @ devs / (x @ x))
    resid = float(np.sqrt(np.mean((devs - slope * x) ** 2)))
    return EpsilonFit(slope, resid, wrap_eta(eta), branch, k, eps, devs, rows)


def envelope_exponent(geom: CellGeometry, eps_list, eta: float, k: int, h: float,
                      extrapolate: bool = True) -> tuple[float, np.ndarray]:
    """Log-log slope of ``|Lambda^eps_k - Lambda^0_k|`` against ``eps``."""
    eps = np.asarray(sorted(float(e) for e in eps_list))
    if len(eps) < 3:
        raise InsufficientPoints("an exponent fit needs at least three eps values")
    devs, _ = eigenvalue_shifts(geom, eps, eta, k, h, extrapolate)
    exponent = float(np.polyfit(np.log(eps), np.log(np.abs(devs)), 1)[0])
    return exponent, devs
