"""Leading-order eigenvalue corrections and the predicted first spectral gap.

The two crossing unperturbed modes near ``eta = pi`` are
``U_+ = exp(i eta z) V_1(y)`` and ``U_- = exp(i (eta - 2 pi) z) V_1(y)``.
Their coupling through a small void of scale ``eps`` enters at order
``eps^3`` via the bilinear form

    B(U, W) = grad U(x0)^T Q conj(grad W(x0)) + Lambda0 U(x0) conj(W(x0)) |theta|

with ``Q`` the virtual-mass tensor and ``|theta|`` the void volume.
``F0 = B(U_+, U_+)`` and ``F1 = B(U_-, U_+)`` at ``eta = pi``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .cross_modes import ModeSet, eval_mode
from .dispersion import gap_precondition, wrap_eta
from .errors import EtaAtCrossing, GapNotPredicted, PreconditionViolated
from .geometry import CrossSection, VoidShape, normalize_bc
from .virtual_mass import VirtualMassTensor

TWO_PI = 2.0 * math.pi
DEFAULT_EIGEN_RESOLUTION = 1e-6
VALIDITY_FRACTION = 0.1


@dataclass(frozen=True, eq=False)
class CouplingCoefficients:
    """Diagonal shift ``f0`` (real) and coupling ``f1`` (complex) at ``eta = pi``.

    The remaining fields record the inputs, so that corrections at other
    ``eta`` can be evaluated without recomputing modes or tensors.
    """

    f0: float
    f1: complex
    problem_kind: str
    q: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)), repr=False)
    m1: float = 0.0
    v1: float = 0.0
    grad_v1: np.ndarray = field(default_factory=lambda: np.zeros(2), repr=False)
    void_volume: float = 0.0
    section_area: float = 0.0
    z0: float = 0.5

    @classmethod
    def from_values(cls, f0: float, f1: complex, problem_kind: str = "neumann") -> "CouplingCoefficients":
        return cls(float(f0), complex(f1), problem_kind)

    @property
    def abs_f1(self) -> float:
        return abs(self.f1)

    def provenance(self) -> dict:
        return {
            "problem_kind": self.problem_kind,
            "Q": self.q.tolist(),
            "M1": self.m1,
            "V1(y0)": self.v1,
            "grad V1(y0)": list(map(float, self.grad_v1)),
            "meas3(theta)": self.void_volume,
            "meas2(omega)": self.section_area,
            "z0": self.z0,
        }


def _bilinear(Q, g1, g2, u1, u2, lambda0, vol) -> complex:
    return complex(g1 @ Q @ np.conj(g2) + lambda0 * u1 * np.conj(u2) * vol)


def _mode_gradient(v1: float, grad_v1, axial: float, z0: float):
    """Value and 3-gradient of ``exp(i axial z) V_1(y)`` at ``(y0, z0)``."""
    phase = cmath.exp(1j * axial * z0)
    g = np.array([grad_v1[0], grad_v1[1], 1j * axial * v1], dtype=complex) * phase
    return v1 * phase, g


def coupling_coefficients(kind: str, ms: ModeSet, Q: VirtualMassTensor, void: VoidShape,
                          center, cs: CrossSection) -> CouplingCoefficients:
    """``F0`` and ``F1`` for the Neumann or mixed (Dirichlet lateral) problem.

    For the Neumann problem ``V_1`` is the constant ``|omega|^{-1/2}``; for the
    mixed problem ``V_1`` and its gradient are evaluated at ``y0`` from ``ms``.
    """
    kind = normalize_bc(kind)
    expected = "neumann" if kind == "neumann" else "dirichlet"
    if ms.bc_kind != expected:
        raise PreconditionViolated(
            f"{kind} problem needs {expected} cross-section modes, got {ms.bc_kind}")
    center = np.asarray(center, dtype=float)
    y0, z0 = center[:2], float(center[2])
    if not bool(cs.contains(y0)):
        raise PreconditionViolated("the void centre must be interior to the cross-section")
    m1 = float(ms.eigenvalues[0])
    if kind == "neumann":
        m1 = 0.0
        v1, grad = cs.area ** -0.5, np.zeros(2)
    else:
        v1, grad = eval_mode(ms, 1, y0)
    qm = np.asarray(Q.q, dtype=float)
    vol = float(void.volume)
    lam = m1 + math.pi ** 2
    u_plus, g_plus = _mode_gradient(v1, grad, math.pi, z0)
    u_minus, g_minus = _mode_gradient(v1, grad, -math.pi, z0)
    f0 = _bilinear(qm, g_plus, g_plus, u_plus, u_plus, lam, vol).real
    f1 = _bilinear(qm, g_minus, g_plus, u_minus, u_plus, lam, vol)
    return CouplingCoefficients(f0, f1, kind, qm, m1, float(v1), np.asarray(grad, float),
                                vol, float(cs.area), z0)


def correction_away_from_pi(eta: float, branch: str, cc: CouplingCoefficients) -> float:
    """Correction ``F_+(eta)`` or ``F_-(eta)`` of a simple eigenvalue (``eta != pi``).

    ``branch`` ``"+"`` follows ``M_1 + eta^2``, ``"-"`` follows
    ``M_1 + (eta - 2 pi)^2``.
    """
    eta = wrap_eta(eta)
    if abs(eta - math.pi) < 1e-12:
        raise EtaAtCrossing("eta = pi is a double eigenvalue; use correction_near_pi")
    if branch not in ("+", "-"):
        raise ValueError("branch must be '+' or '-'")
    axial = eta if branch == "+" else eta - TWO_PI
    u, g = _mode_gradient(cc.v1, cc.grad_v1, axial, cc.z0)
    return _bilinear(cc.q, g, g, u, u, cc.m1 + axial ** 2, cc.void_volume).real


def correction_near_pi(psi: float, cc: CouplingCoefficients):
    """Corrections at ``eta = pi + psi eps^3`` from the 2x2 Hermitian system.

    Returns ``(lower, upper, vectors)`` where ``lower <= upper`` equal
    ``F0 -/+ sqrt(4 pi^2 psi^2 + |F1|^2)`` and the columns of ``vectors``
    are the matching unit eigenvectors.
    """
    radius = math.hypot(TWO_PI * psi, abs(cc.f1))
    lower, upper = cc.f0 - radius, cc.f0 + radius
    H = np.array([[cc.f0 - TWO_PI * psi, cc.f1],
                  [np.conj(cc.f1), cc.f0 + TWO_PI * psi]], dtype=complex)
    _, vecs = np.linalg.eigh(H)
    return lower, upper, vecs


def layer_monopole_coefficient(lambda0: float, u0_at_x0: complex, vol: float) -> complex:
    """Monopole coefficient ``-lambda0 * U0(x0) * vol / (4 pi)`` of the boundary layer."""
    if vol < 0:
        raise ValueError("void volume must be nonnegative")
    return -lambda0 * u0_at_x0 * vol / (4.0 * math.pi)


@dataclass(frozen=True, eq=False)
class GapReport:
    """Predicted first gap ``(a_minus, a_plus)`` and its validity flags.

    ``error_budget`` is ``c0 * eps**3.5`` with a heuristic constant ``c0``
    (the remainder constant is not known in closed form).
    """

    epsilon: float
    a_minus: float
    a_plus: float
    crossing_value: float
    contains_crossing_value: bool
    precondition_holds: bool
    precondition_margin: float
    valid: bool
    error_budget: float
    c0: float
    within_validity_range: bool
    coefficients: CouplingCoefficients = field(repr=False)

    @property
    def length(self) -> float:
        return self.a_plus - self.a_minus

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "F0": self.coefficients.f0,
            "F1_real": self.coefficients.f1.real,
            "F1_imag": self.coefficients.f1.imag,
            "abs_F1": self.coefficients.abs_f1,
            "a_minus": self.a_minus,
            "a_plus": self.a_plus,
            "length": self.length,
            "crossing_value": self.crossing_value,
            "contains_crossing_value": self.contains_crossing_value,
            "precondition_holds": self.precondition_holds,
            "precondition_margin": self.precondition_margin,
            "valid": self.valid,
            "error_budget": self.error_budget,
            "c0_heuristic": self.c0,
            "within_validity_range": self.within_validity_range,
        }


def default_c0(cc: CouplingCoefficients) -> float:
    """Heuristic remainder constant: the larger of ``|F0|`` and ``|F1|``."""
    return max(abs(cc.f0), abs(cc.f1))


def gap_interval(cc: CouplingCoefficients, ms: ModeSet, eps: float, *,
                 eigen_resolution: float = DEFAULT_EIGEN_RESOLUTION,
                 c0: float | None = None) -> GapReport:
    """Leading-order gap ``M_1 + pi^2 + (F0 -/+ |F1|) eps^3``.

    Raises
    ------
    GapNotPredicted
        If ``|F1| eps^3`` does not exceed four times ``eigen_resolution``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    holds, margin = gap_precondition(ms)
    scale = eps ** 3
    if cc.abs_f1 * scale <= 4.0 * eigen_resolution:
        raise GapNotPredicted(
            f"|F1| eps^3 = {cc.abs_f1 * scale:.3g} is below the resolution threshold "
            f"{4.0 * eigen_resolution:.3g}")
    m1 = float(cc.m1)
    base = m1 + math.pi ** 2
    lo = base + (cc.f0 - cc.abs_f1) * scale
    hi = base + (cc.f0 + cc.abs_f1) * scale
    c0 = default_c0(cc) if c0 is None else float(c0)
    # spacing to the next lattice value above the crossing
    spacing = min(float(ms.eigenvalues[1]) - m1, 8.0 * math.pi ** 2)
    shift = max(abs(cc.f0 - cc.abs_f1), abs(cc.f0 + cc.abs_f1)) * scale
    return GapReport(
        epsilon=float(eps), a_minus=lo, a_plus=hi, crossing_value=base,
        contains_crossing_value=lo < base < hi,
        precondition_holds=holds, precondition_margin=margin,
        valid=holds and cc.abs_f1 > 0,
        error_budget=c0 * eps ** 3.5, c0=c0,
        within_validity_range=shift <= VALIDITY_FRACTION * spacing,
        coefficients=cc,
    )


def rotated_f1_expression(v1: float, grad_v1, q: np.ndarray, m1: float, vol: float) -> float:
    """Real quantity ``exp(2 pi i z0) F1`` when ``Q_13 = Q_23 = 0``."""
    g = np.asarray(grad_v1, dtype=float)
    return float(g @ q[:2, :2] @ g + (-math.pi ** 2 * q[2, 2] + (m1 + math.pi ** 2) * vol) * v1 * v1)


@dataclass(frozen=True)
class ZeroLocus:
    """Points where ``F1`` changes sign; ``status`` is ``"found"`` or ``"NoSignChange"``."""

    points: np.ndarray
    status: str
    min_value: float
    max_value: float


def find_F1_zero_locus(ms: ModeSet, Q: VirtualMassTensor, cs: CrossSection, void: VoidShape,
                       n_grid: int = 41, *, symmetry_tol: float = 1e-3) -> ZeroLocus:
    """Scan void centres ``y0`` over ``omega`` for sign changes of ``exp(2 pi i z0) F1``.

    Sign changes along grid edges are refined by bisection (Brent's method).
    """
    if ms.bc_kind != "dirichlet":
        raise PreconditionViolated("the F1 zero locus is defined for the mixed problem")
    q = np.asarray(Q.q, dtype=float)
    if max(abs(q[0, 2]), abs(q[1, 2])) > symmetry_tol * np.abs(q).max():
        raise PreconditionViolated("the locus scan needs Q_13 = Q_23 = 0")
    m1, vol = float(ms.eigenvalues[0]), float(void.volume)

    def expr(y):
        v, g = eval_mode(ms, 1, y)
        return rotated_f1_expression(v, g, q, m1, vol)

    x0, x1, y0, y1 = cs.bounds
    xs = np.linspace(x0, x1, n_grid)
    ys = np.linspace(y0, y1, n_grid)
    pad = 1e-9 * max(x1 - x0, y1 - y0)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    inside = cs.distance_to_boundary(pts) > pad
    vals = np.full(X.shape, np.nan)
    for i, j in zip(*np.nonzero(inside)):
        vals[i, j] = expr(pts[i, j])
    found = []
    for di, dj in ((1, 0), (0, 1)):
        a = vals[: n_grid - di, : n_grid - dj]
        b = vals[di:, dj:]
        flips = np.nonzero(np.isfinite(a) & np.isfinite(b) & (np.sign(a) != np.sign(b)))
        for i, j in zip(*flips):
            pa, pb = pts[i, j], pts[i + di, j + dj]
            t = brentq(lambda s: expr(pa + s * (pb - pa)), 0.0, 1.0, xtol=1e-10)
            found.append(pa + t * (pb - pa))
    finite = vals[np.isfinite(vals)]
    status = "found" if found else "NoSignChange"
    return ZeroLocus(np.array(found).reshape(-1, 2), status,
                     float(finite.min()), float(finite.max()))
