import math

import numpy as np
import pytest

from cqed_entanglement.errors import DegenerateSteadyState
from cqed_entanglement.hilbert import (
    SystemParams,
    build_operators,
    coherent_state,
    ket_to_dm,
    partial_trace,
    product_state,
    trace_distance,
)
from cqed_entanglement.master import (
    Frame,
    atom_liouvillian,
    build_liouvillian,
    collapse_operators,
    evolve,
    hamiltonian,
    liouvillian_gap,
    resonance_fluorescence_steady_state,
    steady_state,
    to_displaced_frame,
    to_original_frame,
)


def random_dm(rng, d):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


def lindblad_rhs(h, c_ops, rho):
    out = -1j * (h @ rho - rho @ h)
    for c in c_ops:
        cd = c.conj().T
        out += c @ rho @ cd - 0.5 * (cd @ c @ rho + rho @ cd @ c)
    return out


@pytest.mark.parametrize("frame", list(Frame))
def test_hamiltonian_hermitian(frame):
    h = hamiltonian(SystemParams(1.0, 0.7, 0.3, n_max=8), frame)
    assert np.allclose(h, h.conj().T)


def test_hamiltonian_form():
    p = SystemParams(1.3, 0.7, 0.3, n_max=6)
    ops = build_operators(p)
    h = hamiltonian(p)
    expected = 1j * (ops.adag @ ops.b - ops.bdag @ ops.a) + 1j * p.omega_bar * (ops.bdag - ops.b)
    assert np.allclose(h, expected)
    c = collapse_operators(p)
    assert np.allclose(c["A"], math.sqrt(1.4) * ops.a)
    assert np.allclose(c["B"], math.sqrt(0.6) * ops.b)


def test_liouvillian_matches_direct_formula():
    p = SystemParams(1.0, 0.7, 0.3, n_max=5)
    lv = build_liouvillian(p)
    rho = random_dm(np.random.default_rng(0), p.dim)
    direct = lindblad_rhs(hamiltonian(p), list(collapse_operators(p).values()), rho)
    assert np.allclose(lv.apply(rho), direct)
    assert abs(np.trace(lv.apply(rho))) < 1e-12


def test_resonance_fluorescence_oracle():
    # The 2x2 generator's null vector against the closed form.
    for om, gb in [(1.0, 0.5), (0.3, 2.0), (2.0, 1.0)]:
        lv = atom_liouvillian(om, gb)
        rho = steady_state(lv)
        exact = resonance_fluorescence_steady_state(om, gb)
        assert np.allclose(rho, exact, atol=1e-10)
        assert np.abs(lv.apply(exact)).max() < 1e-12


def test_frames_give_same_physical_state():
    p = SystemParams(1.0, 1.0, 0.5)
    orig = steady_state(build_liouvillian(p, Frame.ORIGINAL))
    disp = steady_state(build_liouvillian(p, Frame.DISPLACED))
    assert trace_distance(orig, to_original_frame(disp, p)) < 1e-6
    assert trace_distance(to_displaced_frame(orig, p), disp) < 1e-6


def test_dark_state_is_steady():
    p = SystemParams(1.0, 0.0, 0.5)
    rho = steady_state(build_liouvillian(p))
    dark = product_state(coherent_state(1.0, p.n_max), np.array([1.0, 0.0]))
    assert trace_distance(rho, ket_to_dm(dark)) < 1e-6


def test_no_damping_is_degenerate():
    with pytest.raises(DegenerateSteadyState):
        steady_state(build_liouvillian(SystemParams(1.0, 0.0, 0.0, n_max=4)))


def test_strong_cavity_damping_limit():
    # Gamma_a >> 1: cavity near vacuum, atom near resonance fluorescence.
    p = SystemParams(1.0, 20.0, 0.5)
    rho = steady_state(build_liouvillian(p))
    atom = partial_trace(rho, "B", p.dim_a)
    cav = partial_trace(rho, "A", p.dim_a)
    assert trace_distance(atom, resonance_fluorescence_steady_state(1.0, 0.5)) < 0.05
    assert 1 - cav[0, 0].real < 0.05


def test_gap_positive():
    lv = build_liouvillian(SystemParams(1.0, 2.0, 0.5))
    assert liouvillian_gap(lv) > 1e-3


def test_evolve_relaxes_to_steady_state():
    p = SystemParams(1.0, 2.0, 0.5, n_max=12)
    lv = build_liouvillian(p)
    rho_ss = steady_state(lv)
    rho0 = np.zeros((p.dim, p.dim), dtype=complex)
    rho0[0, 0] = 1
    rho = evolve(rho0, lv, 80.0)
    assert trace_distance(rho, rho_ss) < 1e-4


def test_evolve_step_convergence_and_samples():
    p = SystemParams(1.0, 1.0, 0.5, n_max=10)
    lv = build_liouvillian(p)
    rho0 = np.zeros((p.dim, p.dim), dtype=complex)
    rho0[0, 0] = 1
    coarse = evolve(rho0, lv, 2.0, dt_bar=0.01)
    fine = evolve(rho0, lv, 2.0, dt_bar=0.005)
    assert np.abs(coarse - fine).max() < 1e-8
    final, samples = evolve(rho0, lv, 2.0, dt_bar=0.01, sample_times=[0.0, 1.0, 2.0])
    assert samples.shape == (3, p.dim, p.dim)
    assert np.allclose(samples[0], rho0)
    assert np.allclose(samples[-1], final)
    assert np.allclose(samples[1], evolve(rho0, lv, 1.0, dt_bar=0.01))
