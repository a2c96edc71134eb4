"""Lindblad master equation for the driven atom coupled to a damped cavity.

The generator in scaled units (hbar = 1, rates in units of g) is::

    d rho / dt = -i [H, rho] + sum_k ( c_k rho c_k^dag - {c_k^dag c_k, rho} / 2 )

with collapse operators ``sqrt(2 gamma_a) a`` and ``sqrt(2 gamma_b) b``.
Two frames are supported. In the original frame the drive acts on the
atom, ``H = i(a^dag b - b^dag a) + i omega (b^dag - b)``. In the displaced
frame, obtained with ``rho' = D^dag rho D`` where
``D = exp(omega (a^dag - a))``, the drive moves onto the cavity,
``H' = i(a^dag b - b^dag a) + i gamma_a omega (a - a^dag)``.

Density matrices are vectorized row-major, so
``vec(A rho B) = kron(A, B.T) vec(rho)``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateSteadyState, NumericalError
from .hilbert import (
    SystemParams,
    build_operators,
    check_truncation,
    displacement_operator,
)

log = logging.getLogger(__name__)


class Frame(str, enum.Enum):
    ORIGINAL = "original"
    DISPLACED = "displaced"


def hamiltonian(params: SystemParams, frame: Frame = Frame.ORIGINAL) -> np.ndarray:
    ops = build_operators(params)
    h = 1j * (ops.adag @ ops.b - ops.bdag @ ops.a)
    if Frame(frame) is Frame.ORIGINAL:
        h = h + 1j * params.omega_bar * (ops.bdag - ops.b)
    else:
        h = h + 1j * params.gamma_a_bar * params.omega_bar * (ops.a - ops.adag)
    return h


def collapse_operators(params: SystemParams) -> dict[str, np.ndarray]:
    """Collapse operators keyed by channel; zero-rate channels are omitted."""
    ops = build_operators(params)
    out = {}
    if params.gamma_a_bar > 0:
        out["A"] = math.sqrt(2.0 * params.gamma_a_bar) * ops.a
    if params.gamma_b_bar > 0:
        out["B"] = math.sqrt(2.0 * params.gamma_b_bar) * ops.b
    return out


def frame_unitary(params: SystemParams) -> np.ndarray:
    """Joint ``D (x) 1`` with ``D = exp(omega (a^dag - a))`` on the cavity."""
    d = displacement_operator(params.omega_bar, params.n_max)
    return np.kron(np.eye(2), d)


def to_original_frame(rho_displaced: np.ndarray, params: SystemParams) -> np.ndarray:
    u = frame_unitary(params)
    if rho_displaced.ndim == 1:
        return u @ rho_displaced
    return u @ rho_displaced @ u.conj().T


def to_displaced_frame(rho_original: np.ndarray, params: SystemParams) -> np.ndarray:
    u = frame_unitary(params)
    if rho_original.ndim == 1:
        return u.conj().T @ rho_original
    return u.conj().T @ rho_original @ u


def liouvillian_matrix(h: np.ndarray, c_ops) -> sp.csr_matrix:
    """Sparse superoperator for ``-i[h, .] + sum_k D[c_k]`` (row-major vec)."""
    d = h.shape[0]
    eye = sp.identity(d, dtype=complex, format="csr")
    hs = sp.csr_matrix(h)
    lmat = -1j * (sp.kron(hs, eye) - sp.kron(eye, hs.T))
    for c in c_ops:
        cs = sp.csr_matrix(c)
        cdc = (cs.conj().T @ cs).tocsr()
        lmat = lmat + sp.kron(cs, cs.conj()) - 0.5 * sp.kron(cdc, eye) - 0.5 * sp.kron(eye, cdc.T)
    return sp.csr_matrix(lmat)


@dataclass(frozen=True)
class Liouvillian:
    """Vectorized generator with the Hamiltonian and collapse operators it came from."""

    matrix: sp.csr_matrix
    hamiltonian: np.ndarray
    c_ops: tuple
    frame: Frame | None = None
    params: SystemParams | None = None

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = self.dim
        return (self.matrix @ rho.reshape(d * d)).reshape(d, d)

    @classmethod
    def from_operators(cls, h: np.ndarray, c_ops) -> "Liouvillian":
        c_ops = tuple(c_ops)
        return cls(liouvillian_matrix(h, c_ops), h, c_ops)


def build_liouvillian(params: SystemParams, frame: Frame = Frame.ORIGINAL) -> Liouvillian:
    frame = Frame(frame)
    h = hamiltonian(params, frame)
    c_ops = tuple(collapse_operators(params).values())
    return Liouvillian(liouvillian_matrix(h, c_ops), h, c_ops, frame, params)


def _clip_state(rho: np.ndarray) -> np.ndarray:
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    evals, evecs = np.linalg.eigh(rho)
    if evals.min() < -1e-8:
        raise NumericalError(f"steady state has eigenvalue {evals.min():.3e}")
    evals = np.clip(evals, 0.0, None)
    evals /= evals.sum()
    return (evecs * evals) @ evecs.conj().T


def steady_state(
    lv: Liouvillian,
    shift: float = 1e-12,
    check_unique: bool = True,
    max_iter: int = 8,
    tol: float = 1e-8,
) -> np.ndarray:
    """Null vector of the Liouvillian as a unit-trace density matrix.

    Shifted inverse iteration on a sparse LU factorization of
    ``L - shift``. With ``check_unique`` the two eigenvalues of smallest
    modulus are computed by shift-invert Arnoldi and DegenerateSteadyState
    is raised if the second lies below 1e-10.
    """
    if lv.params is not None and lv.params.gamma_a_bar + lv.params.gamma_b_bar <= 0:
        raise DegenerateSteadyState("no damping: the steady state is not unique")
    d = lv.dim
    n = d * d
    lu = spla.splu((lv.matrix - shift * sp.identity(n, format="csr")).tocsc())
    x = np.eye(d, dtype=complex).reshape(n) / d
    for _ in range(max_iter):
        x = lu.solve(x)
        x /= np.linalg.norm(x)
        if np.linalg.norm(lv.matrix @ x) < 1e-3 * tol:
            break
    rho = _clip_state(x.reshape(d, d))
    residual = np.linalg.norm(lv.apply(rho))
    if residual > tol:
        raise NumericalError(f"steady-state residual {residual:.2e} exceeds {tol:g}")
    if check_unique:
        gap = liouvillian_gap(lv, lu)
        if gap < 1e-10:
            raise DegenerateSteadyState(f"second Liouvillian eigenvalue {gap:.2e} ~ 0")
    return rho


def liouvillian_gap(lv: Liouvillian, lu=None) -> float:
    """Modulus of the second-smallest eigenvalue of the Liouvillian."""
    n = lv.matrix.shape[0]
    if n <= 16:
        evals = np.linalg.eigvals(lv.matrix.toarray())
        return float(np.sort(np.abs(evals))[1])
    if lu is None:
        lu = spla.splu((lv.matrix - 1e-12 * sp.identity(n, format="csr")).tocsc())
    op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=complex)
    # Largest eigenvalues of (L - s)^-1 are the smallest of L.
    mu = spla.eigs(op, k=2, which="LM", return_eigenvectors=False, tol=1e-10, maxiter=5000)
    evals = 1.0 / mu + 1e-12
    return float(np.sort(np.abs(evals))[1])


def stable_time_step(lv: Liouvillian) -> float:
    """Explicit RK4 step bounded by the largest rate in the generator.

    Combines the rule ``0.2 / max(1, gamma_a, gamma_b, omega, 1/xi)`` with
    an RK4 stability bound ``2.5 / ||L||_1`` (the truncated ladder makes
    the top Fock levels decay at rate ~ 2 gamma_a n_max).
    """
    rates = [1.0]
    if lv.params is not None:
        p = lv.params
        rates += [p.gamma_a_bar, p.gamma_b_bar, p.omega_bar, 2.0 * p.gamma_a_bar * p.omega_bar]
    norm1 = spla.norm(lv.matrix, 1)
    return min(0.2 / max(rates), 2.5 / max(norm1, 1e-300))


def _rk4(lmat, x, dt):
    k1 = lmat @ x
    k2 = lmat @ (x + 0.5 * dt * k1)
    k3 = lmat @ (x + 0.5 * dt * k2)
    k4 = lmat @ (x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve(
    rho0: np.ndarray,
    lv: Liouvillian,
    t_bar: float,
    dt_bar: float | None = None,
    sample_times=None,
    monitor: bool = True,
):
    """Integrate ``d rho/dt = L rho`` with classical RK4.

    Returns the state at ``t_bar``; with ``sample_times`` (ascending,
    within ``[0, t_bar]``) returns ``(final, samples)`` where ``samples``
    stacks the states at those times.
    """
    d = lv.dim
    if dt_bar is None:
        dt_bar = stable_time_step(lv)
    n_steps = max(1, int(math.ceil(t_bar / dt_bar - 1e-9))) if t_bar > 0 else 0
    dt = t_bar / n_steps if n_steps else 0.0
    x = np.asarray(rho0, dtype=complex).reshape(d * d).copy()
    lmat = lv.matrix

    samples = []
    pending = list(sample_times) if sample_times is not None else []
    t = 0.0
    for k in range(n_steps + 1):
        while pending and pending[0] <= t + 0.5 * dt + 1e-12:
            samples.append(x.reshape(d, d).copy())
            pending.pop(0)
        if k == n_steps:
            break
        x = _rk4(lmat, x, dt)
        t = (k + 1) * dt
    rho = x.reshape(d, d)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > 1e-8:
        raise NumericalError(f"trace drifted to {tr!r}; reduce dt_bar")
    if monitor and lv.params is not None:
        check_truncation(rho, lv.params.dim_a)
    if sample_times is not None:
        return rho, np.array(samples)
    return rho


def resonance_fluorescence_steady_state(omega_bar: float, gamma_b_bar: float) -> np.ndarray:
    """Closed-form steady state of the resonantly driven, damped atom.

    Basis (g, e). Excited population ``omega^2 / (gamma_b^2 + 2 omega^2)``
    and coherence ``<e|rho|g> = omega gamma_b / (gamma_b^2 + 2 omega^2)``.
    """
    if gamma_b_bar <= 0:
        raise ValueError("gamma_b_bar must be positive")
    denom = gamma_b_bar**2 + 2.0 * omega_bar**2
    pe = omega_bar**2 / denom
    coh = omega_bar * gamma_b_bar / denom
    return np.array([[1.0 - pe, coh], [coh, pe]], dtype=complex)


def atom_liouvillian(omega_bar: float, gamma_b_bar: float) -> Liouvillian:
    """The 2x2-space generator of the driven, damped atom on its own."""
    b = np.array([[0, 1], [0, 0]], dtype=complex)
    h = 1j * omega_bar * (b.conj().T - b)
    return Liouvillian.from_operators(h, [math.sqrt(2.0 * gamma_b_bar) * b])
