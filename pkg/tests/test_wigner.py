import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cqed_entanglement.errors import TruncationError
from cqed_entanglement.hilbert import coherent_state, displacement, ket_to_dm
from cqed_entanglement.wigner import PhaseSpaceGrid, default_grid, displaced_parity_wigner, wigner_function

AXIS = np.linspace(-4, 4, 81)


def fock_dm(n, dim):
    rho = np.zeros((dim, dim), dtype=complex)
    rho[n, n] = 1
    return rho


def test_vacuum_gaussian():
    w = wigner_function(fock_dm(0, 20), AXIS, AXIS)
    alpha = AXIS[None, :] + 1j * AXIS[:, None]
    assert np.allclose(w.values, 2 / math.pi * np.exp(-2 * abs(alpha) ** 2), atol=1e-12)


@given(st.complex_numbers(max_magnitude=1.5))
@settings(max_examples=15, deadline=None)
def test_coherent_state_gaussian(beta):
    rho = ket_to_dm(coherent_state(beta, 40))
    w = wigner_function(rho, AXIS[::4], AXIS[::4])
    alpha = w.re[None, :] + 1j * w.im[:, None]
    assert np.allclose(w.values, 2 / math.pi * np.exp(-2 * abs(alpha - beta) ** 2), atol=1e-8)


def test_fock_one_negative_at_origin():
    w = wigner_function(fock_dm(1, 10), [0.0], [0.0])
    assert w.values[0, 0] == pytest.approx(-2 / math.pi)


def test_recurrence_matches_explicit_displacement():
    rng = np.random.default_rng(2)
    m = np.zeros((12, 12), dtype=complex)
    m[:6, :6] = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    rho = m @ m.conj().T
    rho /= np.trace(rho)
    alphas = np.array([0.0, 0.7 - 0.2j, -1.1 + 0.9j, 1.8j])
    ref = displaced_parity_wigner(rho, alphas, pad=60)
    w = wigner_function(rho, alphas.real, alphas.imag)
    assert np.allclose(np.diag(w.values), ref, atol=1e-9)


def test_displacement_covariance():
    # W of D(b) rho D(b)^dag is W of rho shifted by b.
    b = 0.6 + 0.4j
    rho = ket_to_dm(coherent_state(0.3, 40) + coherent_state(-0.5j, 40))
    rho /= np.trace(rho)
    d = displacement(b, 40)
    shifted = d @ rho @ d.conj().T
    pts = np.array([0.2 + 0.1j, -0.5 + 0.3j, 1.0 - 0.4j])
    w1 = wigner_function(shifted, pts.real, pts.imag)
    w0 = wigner_function(rho, (pts - b).real, (pts - b).imag)
    assert np.allclose(np.diag(w1.values), np.diag(w0.values), atol=1e-8)


def test_normalization_and_two_peaks():
    dim = 60
    cat = 0.5 * (ket_to_dm(coherent_state(1.5 + 1.5j, dim - 1)) + ket_to_dm(coherent_state(1.5 - 1.5j, dim - 1)))
    re, im = default_grid(3.0)
    grid = wigner_function(cat, re, im)
    assert grid.integral() == pytest.approx(1.0, abs=1e-6)
    peaks = sorted(grid.local_maxima(), key=lambda z: z.imag)
    assert len(peaks) == 2
    assert peaks[0] == pytest.approx(1.5 - 1.5j, abs=0.1)
    assert peaks[1] == pytest.approx(1.5 + 1.5j, abs=0.1)


def test_default_grid_from_omega():
    grid = wigner_function(fock_dm(0, 8), omega_bar=1.0)
    assert grid.values.shape == (121, 121)
    assert grid.re[0] == -4.0 and grid.re[-1] == 4.0
    with pytest.raises(ValueError):
        wigner_function(fock_dm(0, 8))


def test_truncated_input_rejected():
    with pytest.raises(TruncationError):
        wigner_function(fock_dm(7, 8), AXIS, AXIS)


def test_local_maxima_threshold():
    values = np.zeros((5, 5))
    values[2, 2] = 1.0
    grid = PhaseSpaceGrid(np.arange(5.0), np.arange(5.0), values)
    assert grid.local_maxima() == [complex(2, 2)]
    assert grid.cell_area == 1.0
