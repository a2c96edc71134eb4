"""Wigner function of the reduced cavity state.

``W(alpha) = (2/pi) tr[D^dag(alpha) rho D(alpha) Pi]`` with parity
``Pi = (-1)^{a^dag a}``, normalized so that ``int W d^2 alpha = 1`` and the
vacuum gives ``(2/pi) exp(-2|alpha|^2)``.

The displaced-parity matrix elements ``<m| D Pi D^dag |n>`` are generated
by the standard Laguerre recurrence in the photon indices, which is the
untruncated value of the displaced parity and stays stable far from the
origin. :func:`displaced_parity_wigner` evaluates the same quantity with
explicit truncated displacements and serves as a reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TruncationError
from .hilbert import displacement

#: Population allowed in the top two Fock levels of the input state.
RHO_TOP_TOL = 1e-6


@dataclass(frozen=True)
class PhaseSpaceGrid:
    re: np.ndarray
    im: np.ndarray
    values: np.ndarray  # shape (len(im), len(re))

    @property
    def cell_area(self) -> float:
        dre = self.re[1] - self.re[0] if len(self.re) > 1 else 1.0
        dim = self.im[1] - self.im[0] if len(self.im) > 1 else 1.0
        return float(dre * dim)

    def integral(self) -> float:
        """Riemann sum of W over the grid."""
        return float(self.values.sum() * self.cell_area)

    def local_maxima(self, rel_threshold: float = 0.05) -> list[complex]:
        """Strict interior local maxima (8-neighbourhood) above a fraction of the peak."""
        w = self.values
        core = w[1:-1, 1:-1]
        mask = np.ones_like(core, dtype=bool)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                mask &= core > w[1 + di : w.shape[0] - 1 + di, 1 + dj : w.shape[1] - 1 + dj]
        mask &= core > rel_threshold * w.max()
        ii, jj = np.nonzero(mask)
        return [complex(self.re[j + 1], self.im[i + 1]) for i, j in zip(ii, jj)]


def default_grid(omega_bar: float, n: int = 121) -> tuple[np.ndarray, np.ndarray]:
    lim = omega_bar + 3.0
    axis = np.linspace(-lim, lim, n)
    return axis, axis.copy()


def _check_rho(rho_a: np.ndarray) -> None:
    pops = np.real(np.diagonal(rho_a))
    top = pops[-2:].sum() / pops.sum()
    if top > RHO_TOP_TOL:
        raise TruncationError(f"cavity state has {top:.2e} in its top Fock levels")


def wigner_function(rho_a: np.ndarray, re=None, im=None, omega_bar: float | None = None) -> PhaseSpaceGrid:
    """Wigner function of a cavity density matrix on a rectangular grid.

    Pass the grid axes ``re`` and ``im`` or let ``omega_bar`` choose the
    default 121 x 121 grid over ``[-omega-3, omega+3]^2``.
    """
    rho_a = np.asarray(rho_a, dtype=complex)
    _check_rho(rho_a)
    if re is None or im is None:
        if omega_bar is None:
            raise ValueError("give the grid axes or omega_bar")
        re, im = default_grid(omega_bar)
    re = np.asarray(re, dtype=float)
    im = np.asarray(im, dtype=float)
    alpha = re[None, :] + 1j * im[:, None]
    values = _wigner_recurrence(rho_a, alpha)
    return PhaseSpaceGrid(re, im, values)


def _wigner_recurrence(rho: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    # w[n] holds the displaced-parity element for the pair (m, n) of the
    # current row m; rows are built from the previous one.
    dim = rho.shape[0]
    w = [None] * dim
    w[0] = (2.0 / math.pi) * np.exp(-2.0 * np.abs(alpha) ** 2)
    total = rho[0, 0].real * w[0]
    for n in range(1, dim):
        w[n] = 2.0 * alpha * w[n - 1] / math.sqrt(n)
        total = total + 2.0 * np.real(rho[0, n] * w[n])
    for m in range(1, dim):
        prev = w[m]
        w[m] = (2.0 * np.conj(alpha) * prev - math.sqrt(m) * w[m - 1]) / math.sqrt(m)
        total = total + rho[m, m].real * np.real(w[m])
        for n in range(m + 1, dim):
            nxt = (2.0 * alpha * w[n - 1] - math.sqrt(m) * prev) / math.sqrt(n)
            prev = w[n]
            w[n] = nxt
            total = total + 2.0 * np.real(rho[m, n] * w[n])
    imag = np.abs(np.imag(total)).max() if np.iscomplexobj(total) else 0.0
    if imag > 1e-10:
        raise ArithmeticError(f"Wigner function picked up an imaginary part {imag:.1e}")
    return np.real(total)


def displaced_parity_wigner(rho_a: np.ndarray, alphas, pad: int = 0) -> np.ndarray:
    """Reference evaluation with explicit displacements on a padded Fock space."""
    n0 = rho_a.shape[0]
    dim = n0 + pad
    rho = np.zeros((dim, dim), dtype=complex)
    rho[:n0, :n0] = rho_a
    parity = (-1.0) ** np.arange(dim)
    out = []
    for a in np.ravel(alphas):
        d = displacement(a, dim - 1)
        shifted = d.conj().T @ rho @ d
        val = (2.0 / math.pi) * np.sum(parity * np.diagonal(shifted))
        if abs(val.imag) > 1e-10:
            raise ArithmeticError("displaced parity is not real")
        out.append(val.real)
    return np.reshape(out, np.shape(alphas))
