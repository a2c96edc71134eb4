"""Truncated Hilbert space of a two-level atom (B) and a cavity mode (A).

All joint-space objects use a qubit-major basis ordering::

    index = s * (n_max + 1) + n,    s in {g=0, e=1},  n in {0, ..., n_max}

so a joint state vector reshaped to ``(2, n_max + 1)`` has the atomic
index on the first axis and the photon number on the second.

States and operators are plain complex numpy arrays. Rates are in units
of the atom-cavity coupling g and times in units of 1/g.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import xlogy

from .errors import DomainError, NumericalError, TruncationError

#: Top-of-ladder population above which an evolved state is rejected.
TOP_POPULATION_TOL = 1e-6
#: Discarded coherent-state weight above which the truncation is rejected.
COHERENT_TAIL_TOL = 1e-8


def default_n_max(omega_bar: float) -> int:
    """Fock cutoff covering the semiclassical circle plus a 4-sigma buffer."""
    return int(math.ceil((abs(omega_bar) + 4.0) ** 2))


@dataclass(frozen=True)
class SystemParams:
    """Dimensionless model parameters.

    ``omega_bar`` is the drive amplitude, ``gamma_a_bar`` and
    ``gamma_b_bar`` the cavity and atomic damping constants, all scaled by
    the coupling g. ``n_max`` is the highest retained photon number; when
    omitted it defaults to ``ceil((omega_bar + 4)**2)``.
    """

    omega_bar: float
    gamma_a_bar: float
    gamma_b_bar: float = 0.0
    n_max: int | None = field(default=None)

    def __post_init__(self):
        if not self.omega_bar > 0:
            raise DomainError(f"omega_bar must be positive, got {self.omega_bar}")
        if self.gamma_a_bar < 0 or self.gamma_b_bar < 0:
            raise DomainError("damping constants must be non-negative")
        if self.n_max is None:
            object.__setattr__(self, "n_max", default_n_max(self.omega_bar))
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise DomainError(f"n_max must be an integer >= 1, got {self.n_max}")
        object.__setattr__(self, "n_max", int(self.n_max))
        for name in ("omega_bar", "gamma_a_bar", "gamma_b_bar"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def dim_a(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)

    @property
    def xi(self) -> float:
        """Bifurcation parameter ``1 / (2 gamma_a_bar omega_bar)``."""
        if self.gamma_a_bar == 0:
            return math.inf
        return 1.0 / (2.0 * self.gamma_a_bar * self.omega_bar)

    def replace(self, **changes) -> "SystemParams":
        values = {
            "omega_bar": self.omega_bar,
            "gamma_a_bar": self.gamma_a_bar,
            "gamma_b_bar": self.gamma_b_bar,
            "n_max": self.n_max,
        }
        values.update(changes)
        return SystemParams(**values)


@dataclass(frozen=True)
class Operators:
    """Ladder operators on the joint space, plus the single-factor pieces."""

    a: np.ndarray
    adag: np.ndarray
    b: np.ndarray
    bdag: np.ndarray
    id_a: np.ndarray
    id_b: np.ndarray
    a_fock: np.ndarray
    b_qubit: np.ndarray

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.a.shape[0], dtype=complex)


def annihilation(n_max: int) -> np.ndarray:
    """Truncated annihilation operator on Fock states ``|0>..|n_max>``."""
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)


def qubit_lowering() -> np.ndarray:
    """``|g><e|`` in the basis (g, e)."""
    return np.array([[0, 1], [0, 0]], dtype=complex)


def build_operators(params: SystemParams) -> Operators:
    """Build ``a``, ``a^dag``, ``b``, ``b^dag`` on the qubit-major joint space."""
    a_f = annihilation(params.n_max)
    b_q = qubit_lowering()
    id_a = np.eye(params.dim_a, dtype=complex)
    id_b = np.eye(2, dtype=complex)
    a = np.kron(id_b, a_f)
    b = np.kron(b_q, id_a)
    return Operators(
        a=a,
        adag=a.conj().T.copy(),
        b=b,
        bdag=b.conj().T.copy(),
        id_a=id_a,
        id_b=id_b,
        a_fock=a_f,
        b_qubit=b_q,
    )


def coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    """Untruncated-normalization coherent amplitudes ``c_0..c_{n_max}``."""
    c = np.empty(n_max + 1, dtype=complex)
    c[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, n_max + 1):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    return c


def coherent_state(alpha: complex, n_max: int) -> np.ndarray:
    """Coherent state ``|alpha>`` of the cavity mode, renormalized on the cutoff.

    Raises TruncationError when the discarded weight exceeds 1e-8.
    """
    c = coherent_amplitudes(alpha, n_max)
    weight = float(np.vdot(c, c).real)
    if 1.0 - weight > COHERENT_TAIL_TOL:
        raise TruncationError(
            f"|alpha|={abs(alpha):.3g} loses weight {1 - weight:.2e} at n_max={n_max}"
        )
    return c / math.sqrt(weight)


def displacement(alpha: complex, n_max: int) -> np.ndarray:
    """``exp(alpha a^dag - alpha* a)`` on the truncated Fock space (no checks)."""
    a = annihilation(n_max)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def displacement_operator(omega_bar: float, n_max: int) -> np.ndarray:
    """Real displacement ``D = exp(omega_bar (a^dag - a))`` on the cavity factor.

    The truncated generator is anti-Hermitian, so the result is exactly
    unitary; the truncation check instead compares ``D|0>`` with the
    exact coherent amplitudes and raises TruncationError above 1e-6.
    """
    d = displacement(omega_bar, n_max)
    exact = coherent_amplitudes(omega_bar, n_max)
    lower = (3 * (n_max + 1)) // 4
    unitarity = np.abs(d.conj().T @ d - np.eye(n_max + 1))[:lower, :lower].max()
    col_err = np.abs(d[:, 0] - exact).max()
    tail = 1.0 - float(np.vdot(exact, exact).real)
    if max(unitarity, col_err, tail) > 1e-6:
        raise TruncationError(
            f"displacement by {omega_bar} inaccurate at n_max={n_max} "
            f"(column error {col_err:.2e}, tail {tail:.2e})"
        )
    return d


def atomic_state(beta: complex, tol: float = 1e-10) -> np.ndarray:
    """``(sqrt(beta)|e> + sqrt(beta*)|g>) / sqrt(2)`` in the (g, e) basis.

    Uses the principal square root; ``beta`` must have unit modulus.
    """
    beta = complex(beta)
    if abs(abs(beta) - 1.0) > tol:
        raise DomainError(f"|beta| must be 1, got {abs(beta)!r}")
    return np.array([np.sqrt(beta.conjugate()), np.sqrt(beta)], dtype=complex) / math.sqrt(2.0)


def product_state(psi_a: np.ndarray, psi_b: np.ndarray) -> np.ndarray:
    """Joint state ``|psi_a> (x) |psi_b>`` in qubit-major order."""
    return np.kron(psi_b, psi_a)


def ket_to_dm(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def partial_trace(rho: np.ndarray, keep: str, dim_a: int | None = None) -> np.ndarray:
    """Reduce a joint density matrix (or joint ket) to factor ``"A"`` or ``"B"``.

    ``dim_a`` is inferred from the joint dimension when omitted.
    """
    rho = np.asarray(rho)
    dim = rho.shape[0]
    if dim_a is None:
        dim_a = dim // 2
    if rho.ndim == 1:
        m = rho.reshape(2, dim_a)
        if keep == "B":
            return m @ m.conj().T
        if keep == "A":
            return m.T @ m.conj()
    else:
        r = rho.reshape(2, dim_a, 2, dim_a)
        if keep == "B":
            return np.einsum("injn->ij", r)
        if keep == "A":
            return np.einsum("sisj->ij", r)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def binary_entropy(lam) -> np.ndarray | float:
    """``-lam log2 lam - (1 - lam) log2(1 - lam)`` with ``0 log 0 = 0``."""
    lam = np.asarray(lam, dtype=float)
    out = -(xlogy(lam, lam) + xlogy(1.0 - lam, 1.0 - lam)) / math.log(2.0)
    return float(out) if out.ndim == 0 else out


def qubit_eigenvalues(rho: np.ndarray) -> tuple[float, float]:
    """Eigenvalues (small, large) of a 2x2 Hermitian unit-trace matrix.

    The small eigenvalue is taken as ``det / large`` which keeps relative
    accuracy when the state is close to pure.
    """
    p, q = rho[0, 0].real, rho[1, 1].real
    c = rho[0, 1]
    tr = p + q
    radius = math.sqrt((p - q) ** 2 + 4.0 * abs(c) ** 2)
    large = 0.5 * (tr + radius)
    det = p * q - abs(c) ** 2
    small = det / large if large > 0 else 0.0
    return small, large


def _check_spectrum(evals: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    if evals.min() < -tol:
        raise NumericalError(f"density matrix has eigenvalue {evals.min():.3e}")
    return np.clip(evals, 0.0, 1.0)


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Entropy ``-tr[rho log2 rho]`` in bits; eigenvalues clipped to [0, 1]."""
    rho = np.asarray(rho)
    if rho.shape == (2, 2):
        small, large = qubit_eigenvalues(rho)
        evals = _check_spectrum(np.array([small, large]))
    else:
        evals = _check_spectrum(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)))
    return float(-xlogy(evals, evals).sum() / math.log(2.0))


def entanglement_entropy(psi: np.ndarray, dim_a: int | None = None) -> float:
    """Entropy of the atomic reduction of a joint pure state."""
    psi = psi / np.linalg.norm(psi)
    return von_neumann_entropy(partial_trace(psi, "B", dim_a))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``0.5 tr|rho - sigma|`` for Hermitian arguments."""
    diff = np.asarray(rho) - np.asarray(sigma)
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


def top_population(psi_or_rho: np.ndarray, dim_a: int, levels: int = 3) -> float:
    """Population in the top ``levels`` Fock states (n >= n_max - 2 by default)."""
    x = np.asarray(psi_or_rho)
    if x.ndim == 1:
        pops = (np.abs(x.reshape(2, dim_a)) ** 2).sum(axis=0)
    else:
        pops = np.real(np.diagonal(partial_trace(x, "A", dim_a)))
    return float(pops[-levels:].sum() / pops.sum())


def check_truncation(psi_or_rho: np.ndarray, dim_a: int, tol: float = TOP_POPULATION_TOL) -> None:
    pop = top_population(psi_or_rho, dim_a)
    if pop > tol:
        raise TruncationError(
            f"population {pop:.2e} in the top Fock levels exceeds {tol:g}; raise n_max"
        )


def check_density_matrix(rho: np.ndarray, tol: float = 1e-10) -> None:
    """Raise NumericalError unless ``rho`` is Hermitian, unit-trace and PSD."""
    herm = np.abs(rho - rho.conj().T).max()
    tr = np.trace(rho).real
    if herm > tol or abs(tr - 1.0) > tol:
        raise NumericalError(f"not a density matrix (hermiticity {herm:.1e}, trace {tr})")
    _check_spectrum(np.linalg.eigvalsh(rho), tol)
