"""Semiclassical steady states and the analytic two-branch ensembles.

Below the dressed-state polarization threshold (``xi < 1``,
``xi = 1 / (2 gamma_a omega)``) the semiclassical steady state splits into
two branches ``(alpha_+, beta_+)`` and ``(alpha_-, beta_-)``. For large
drive the quantum steady state is close to an equal mixture of the
product states ``|alpha_pm>|beta_pm>``; this module builds the two pure
state decompositions of that mixture (a which-branch ensemble and a
phase ensemble) and evaluates their entanglement in closed form and by
explicit construction on the truncated space.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .hilbert import (
    SystemParams,
    atomic_state,
    binary_entropy,
    coherent_state,
    entanglement_entropy,
    product_state,
)


class Branch(str, enum.Enum):
    ABOVE = "above"
    PLUS = "plus"
    MINUS = "minus"


@dataclass(frozen=True)
class FixedPoint:
    """Cavity amplitude ``alpha = omega (x + i y)`` and polarization ``beta``."""

    xi: float
    branch: Branch
    alpha: complex
    beta: complex
    x: float
    y: float


def fixed_points(params: SystemParams) -> list[FixedPoint]:
    """Semiclassical steady states: one for ``xi >= 1``, two (+, -) below."""
    if params.gamma_a_bar <= 0:
        raise DomainError("fixed points need gamma_a_bar > 0")
    xi = params.xi
    om = params.omega_bar
    if xi >= 1.0:
        return [FixedPoint(xi, Branch.ABOVE, complex(om), complex(1.0 / xi), 1.0, 0.0)]
    root = math.sqrt(1.0 - xi * xi)
    out = []
    for branch, sign in ((Branch.PLUS, 1.0), (Branch.MINUS, -1.0)):
        beta = complex(xi, sign * root)
        x, y = xi * xi, sign * xi * root
        out.append(FixedPoint(xi, branch, om * complex(x, y), beta, x, y))
    return out


def gamma_a_for_xi(xi: float, omega_bar: float) -> float:
    return 1.0 / (2.0 * xi * omega_bar)


class Regime(str, enum.Enum):
    SMALL = "small"
    LARGE = "large"


def asymptotic_lambda(params: SystemParams, regime: Regime) -> float:
    """Small eigenvalue of the atomic reduction in the weak/strong damping limits.

    ``omega^4 gamma_a^6`` for weak cavity damping and
    ``(2/gamma_a)^2 (4 omega/gamma_b)^4`` for strong damping.
    """
    regime = Regime(regime)
    om, ga, gb = params.omega_bar, params.gamma_a_bar, params.gamma_b_bar
    if regime is Regime.SMALL:
        return om**4 * ga**6
    if ga <= 0 or gb <= 0:
        raise DomainError("the strong-damping limit needs gamma_a_bar > 0 and gamma_b_bar > 0")
    return (2.0 / ga) ** 2 * (4.0 * om / gb) ** 4


def asymptotic_entanglement(params: SystemParams, regime: Regime) -> float:
    lam = asymptotic_lambda(params, regime)
    if lam > 0.5:
        raise DomainError(f"lambda={lam:.3g} > 1/2: asymptotic formula used outside its regime")
    return binary_entropy(min(max(lam, 0.0), 0.5))


def _branch_pair(params: SystemParams) -> tuple[FixedPoint, FixedPoint]:
    points = fixed_points(params)
    if len(points) != 2:
        raise DomainError(f"xi={params.xi:.4g} >= 1: only one semiclassical branch")
    return points[0], points[1]


def coherent_overlap(a1: complex, a2: complex) -> complex:
    """``<a1|a2>`` for untruncated coherent states."""
    return cmath.exp(-0.5 * abs(a1) ** 2 - 0.5 * abs(a2) ** 2 + a1.conjugate() * a2)


def overlap_terms(params: SystemParams, phi_rec: float) -> tuple[float, float, float]:
    """``(A, B, 1 + xi e^{-2 omega^2 y^2} cos[...])`` at record phase ``phi_rec``."""
    plus, _ = _branch_pair(params)
    xi, x, y, om2 = plus.xi, plus.x, plus.y, params.omega_bar**2
    damp = math.exp(-2.0 * om2 * y * y)
    arg = 2.0 * (om2 * x * y + phi_rec)
    a = math.sqrt(1.0 - xi * xi) * damp * math.sin(arg)
    b = xi + damp * math.cos(arg)
    norm_term = 1.0 + xi * damp * math.cos(arg)
    return a, b, norm_term


@dataclass(frozen=True)
class PhaseEntropy:
    """Closed-form entropy of a phase-ensemble member.

    ``lambdas`` are the two eigenvalue candidates of the formula that was
    evaluated; when they leave [0, 1] the result is flagged and
    ``entropy`` falls back to ``oracle``, the entropy of the explicitly
    constructed state.
    """

    phi: float
    entropy: float
    lambdas: tuple[float, float]
    in_range: bool
    literal: bool
    oracle: float | None = None

    @property
    def flagged(self) -> bool:
        return not self.in_range


def phase_lambdas(params: SystemParams, phi_rec: float, literal: bool = False) -> tuple[float, float]:
    """Eigenvalues ``1/2 -+ 1/2 sqrt(A^2 + B^2) / den`` of the atomic reduction.

    With ``literal=True`` the denominator is ``B`` exactly as printed,
    which leaves [0, 1] whenever ``A != 0``. The default uses
    ``den = 1 + xi e^{-2 omega^2 y^2} cos[2(omega^2 x y + phi)]``, which is
    ``1 / (2 N^2)`` and reproduces the exact reduced spectrum.
    """
    a, b, norm_term = overlap_terms(params, phi_rec)
    den = b if literal else norm_term
    r = math.hypot(a, b) / den
    return 0.5 - 0.5 * r, 0.5 + 0.5 * r


def analytic_phase_ensemble_entropy(
    params: SystemParams, phi_rec: float, literal: bool = False, tol: float = 1e-12
) -> PhaseEntropy:
    lo, hi = phase_lambdas(params, phi_rec, literal)
    in_range = -tol <= min(lo, hi) and max(lo, hi) <= 1.0 + tol
    if in_range:
        lam = min(max(min(lo, hi), 0.0), 1.0)
        return PhaseEntropy(phi_rec, binary_entropy(lam), (lo, hi), True, literal)
    oracle = phase_state_entropy(params, phi_rec)
    return PhaseEntropy(phi_rec, oracle, (lo, hi), False, literal, oracle)


class MemberKind(str, enum.Enum):
    DICHOTOMOUS = "dichotomous"
    PHASE = "phase"


@dataclass(frozen=True)
class EnsembleMember:
    kind: MemberKind
    value: float
    state: np.ndarray
    norm_constant: float = 1.0


def branch_states(params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Joint product states ``|alpha_+>|beta_+>`` and ``|alpha_->|beta_->``."""
    plus, minus = _branch_pair(params)
    return tuple(
        product_state(coherent_state(p.alpha, params.n_max), atomic_state(p.beta))
        for p in (plus, minus)
    )


def construct_ensemble_state(params: SystemParams, kind: MemberKind, value: float) -> EnsembleMember:
    """Build one member of the which-branch or the phase ensemble.

    ``kind="dichotomous"`` takes ``value`` in {0, 1} and returns the branch
    product state (1 selects the + branch). ``kind="phase"`` returns
    ``N (e^{i phi}|+> + e^{-i phi}|->)`` with ``N`` from the exact
    coherent-state and atomic overlaps.
    """
    kind = MemberKind(kind)
    plus_state, minus_state = branch_states(params)
    if kind is MemberKind.DICHOTOMOUS:
        if value not in (0, 1):
            raise DomainError("dichotomous record must be 0 or 1")
        return EnsembleMember(kind, float(value), plus_state if value == 1 else minus_state)
    plus, minus = _branch_pair(params)
    s_atom = complex(np.vdot(atomic_state(plus.beta), atomic_state(minus.beta)))
    s = coherent_overlap(plus.alpha, minus.alpha) * s_atom
    norm2 = 2.0 + 2.0 * (cmath.exp(-2j * value) * s).real
    n_const = 1.0 / math.sqrt(norm2)
    state = n_const * (cmath.exp(1j * value) * plus_state + cmath.exp(-1j * value) * minus_state)
    return EnsembleMember(kind, float(value), state, n_const)


def phase_state_entropy(params: SystemParams, phi_rec: float) -> float:
    """Entropy of the explicitly constructed phase-ensemble state."""
    member = construct_ensemble_state(params, MemberKind.PHASE, phi_rec)
    return entanglement_entropy(member.state, params.dim_a)


def phase_grid(n_phi: int) -> np.ndarray:
    """Midpoints of ``n_phi`` equal cells of [0, pi)."""
    return (np.arange(n_phi) + 0.5) * math.pi / n_phi


def phase_weights(params: SystemParams, phis: np.ndarray, weighting: str = "uniform") -> np.ndarray:
    """Quadrature weights over the phase grid, summing to 1.

    ``"uniform"`` treats the record phase as uniformly distributed.
    ``"born"`` weights each phase by the squared norm of the unnormalized
    superposition, i.e. ``1 / (2 N^2)``; only this choice makes the phase
    ensemble average exactly equal to the which-branch mixture when the
    branch states overlap.
    """
    if weighting == "uniform":
        return np.full(len(phis), 1.0 / len(phis))
    if weighting == "born":
        w = np.array([overlap_terms(params, phi)[2] for phi in phis])
        return w / w.sum()
    raise ValueError(f"unknown weighting {weighting!r}")


def averaged_phase_entanglement(params: SystemParams, n_phi: int = 64, weighting: str = "uniform") -> float:
    """Record-averaged entanglement of the phase ensemble (midpoint rule).

    Uses the explicitly constructed states; zero at or above threshold.
    """
    if n_phi < 16:
        raise DomainError("n_phi must be at least 16")
    if params.gamma_a_bar <= 0 or params.xi >= 1.0:
        return 0.0
    phis = phase_grid(n_phi)
    w = phase_weights(params, phis, weighting)
    return float(sum(wi * phase_state_entropy(params, phi) for wi, phi in zip(w, phis)))


def analytic_phase_average(params: SystemParams, n_phi: int = 64, literal: bool = False) -> float:
    """Closed-form counterpart of :func:`averaged_phase_entanglement` (uniform)."""
    if params.gamma_a_bar <= 0 or params.xi >= 1.0:
        return 0.0
    phis = phase_grid(n_phi)
    return float(np.mean([analytic_phase_ensemble_entropy(params, p, literal).entropy for p in phis]))


def dichotomous_mixture(params: SystemParams) -> np.ndarray:
    """Equal mixture of the two branch product states."""
    plus_state, minus_state = branch_states(params)
    return 0.5 * (np.outer(plus_state, plus_state.conj()) + np.outer(minus_state, minus_state.conj()))


def phase_average_density(params: SystemParams, n_phi: int = 64, weighting: str = "born") -> np.ndarray:
    """Phase-ensemble average of member projectors on the midpoint grid."""
    phis = phase_grid(n_phi)
    w = phase_weights(params, phis, weighting)
    rho = np.zeros((params.dim, params.dim), dtype=complex)
    for wi, phi in zip(w, phis):
        psi = construct_ensemble_state(params, MemberKind.PHASE, phi).state
        rho += wi * np.outer(psi, psi.conj())
    return rho
