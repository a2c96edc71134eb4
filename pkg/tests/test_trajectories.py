import math

import numpy as np
import pytest

from cqed_entanglement.errors import DomainError, InsufficientData, StepSizeError, TruncationError
from cqed_entanglement.hilbert import SystemParams, build_operators, coherent_state, product_state
from cqed_entanglement.master import Frame, build_liouvillian, steady_state
from cqed_entanglement.trajectories import (
    SweepPoint,
    Unraveling,
    UnravelingConfig,
    average_entanglement,
    integrated_autocorrelation_time,
    run_point,
    simulate,
    simulate_direct,
    simulate_homodyne,
    sweep_entanglement,
)

SHORT = UnravelingConfig(t_transient=1.0, t_total=20.0)


def test_config_validation():
    with pytest.raises(DomainError):
        UnravelingConfig(t_transient=10.0, t_total=5.0)
    with pytest.raises(DomainError):
        UnravelingConfig(dt_bar=1.0, sample_interval=0.1)
    cfg = UnravelingConfig(kind="homodyne", frame="displaced")
    assert cfg.kind is Unraveling.HOMODYNE and cfg.frame is Frame.DISPLACED
    assert cfg.to_dict()["kind"] == "homodyne"


@pytest.mark.parametrize("kind", ["direct", "homodyne"])
def test_same_seed_same_trajectory(small_params, kind):
    cfg = SHORT.replace(kind=kind)
    t1 = simulate(small_params, cfg, (7, 1))
    t2 = simulate(small_params, cfg, (7, 1))
    t3 = simulate(small_params, cfg, (7, 2))
    assert np.array_equal(t1.entropy, t2.entropy)
    assert np.array_equal(t1.record.jump_times, t2.record.jump_times)
    assert np.array_equal(t1.record.charges, t2.record.charges)
    assert not np.array_equal(t1.entropy, t3.entropy)


def test_sampling_grid(small_params):
    traj = simulate(small_params, SHORT, 0)
    assert traj.times[0] == pytest.approx(1.0)
    assert traj.times[-1] == pytest.approx(20.0)
    assert np.allclose(np.diff(traj.times), 0.1)
    assert np.all((traj.entropy >= 0) & (traj.entropy <= 1))
    entropy, record, state = traj
    assert np.linalg.norm(state) == pytest.approx(1.0)


def test_dark_state_has_no_jumps():
    p = SystemParams(1.0, 0.0, 0.5)
    dark = product_state(coherent_state(1.0, p.n_max), np.array([1.0, 0.0]))
    traj = simulate_direct(p, UnravelingConfig(t_transient=0.0, t_total=200.0), 3, psi0=dark)
    assert len(traj.record.jump_times) == 0
    assert traj.entropy.max() < 1e-10


def test_jump_rates_match_master_equation(small_params):
    # Oracle: mean counting rates 2 gamma <c^dag c> in the steady state.
    p = small_params
    rho = steady_state(build_liouvillian(p))
    ops = build_operators(p)
    rate_a = 2 * p.gamma_a_bar * np.trace(rho @ ops.adag @ ops.a).real
    rate_b = 2 * p.gamma_b_bar * np.trace(rho @ ops.bdag @ ops.b).real
    cfg = UnravelingConfig(t_transient=20.0, t_total=1020.0)
    rec = simulate_direct(p, cfg, 11).record
    late = rec.jump_times > 20.0
    n_a = np.sum(late & (rec.jump_channels == "A"))
    n_b = np.sum(late & (rec.jump_channels == "B"))
    assert n_a == pytest.approx(1000 * rate_a, rel=0.1)
    assert n_b == pytest.approx(1000 * rate_b, rel=0.1)


def test_homodyne_record_mean_matches_quadrature(small_params):
    p = small_params
    theta = 0.3
    rho = steady_state(build_liouvillian(p))
    ops = build_operators(p)
    x_theta = 0.5 * np.trace(rho @ (np.exp(-1j * theta) * ops.a + np.exp(1j * theta) * ops.adag)).real
    cfg = UnravelingConfig(kind="homodyne", theta=theta, t_transient=20.0, t_total=620.0)
    rec = simulate_homodyne(p, cfg, 5).record
    rate = rec.charges.sum() / (len(rec.charges) * rec.charge_interval)
    assert rate == pytest.approx(2 * math.sqrt(2 * p.gamma_a_bar) * x_theta, abs=0.15)
    assert rec.hybrid


def test_homodyne_needs_cavity_damping():
    with pytest.raises(DomainError):
        simulate_homodyne(SystemParams(1.0, 0.0, 0.5), SHORT.replace(kind="homodyne"), 0)


def test_step_too_large():
    cfg = SHORT.replace(dt_bar=0.1)
    with pytest.raises(StepSizeError):
        simulate_direct(SystemParams(1.0, 20.0, 0.5), cfg, 0)


def test_truncation_detected():
    with pytest.raises(TruncationError):
        simulate(SystemParams(3.0, 0.2, 0.0, n_max=10), SHORT, 0)


def test_displaced_frame_same_statistics(small_params):
    cfg = UnravelingConfig(t_transient=20.0, t_total=420.0)
    orig = [simulate(small_params, cfg, (1, j)).entropy for j in range(2)]
    disp = [simulate(small_params, cfg.replace(frame="displaced"), (1, j)).entropy for j in range(2)]
    e1, e2 = average_entanglement(orig), average_entanglement(disp)
    assert abs(e1.mean - e2.mean) < 4 * math.hypot(e1.stderr, e2.stderr)


def test_autocorrelation_time_ar1():
    rng = np.random.default_rng(0)
    phi = 0.9
    x = np.empty(200_000)
    x[0] = 0
    noise = rng.normal(size=x.size)
    for i in range(1, x.size):
        x[i] = phi * x[i - 1] + noise[i]
    expected = 0.5 * (1 + phi) / (1 - phi)
    assert integrated_autocorrelation_time(x) == pytest.approx(expected, rel=0.15)


def test_average_entanglement_trivial_cases():
    est = average_entanglement([np.full(1000, 0.25)])
    assert est.mean == 0.25 and est.stderr == 0.0
    with pytest.raises(InsufficientData):
        average_entanglement([np.arange(10.0)])
    with pytest.raises(InsufficientData):
        average_entanglement([])


def test_average_entanglement_white_noise_stderr():
    rng = np.random.default_rng(4)
    runs = [rng.normal(0.5, 0.1, 20_000) for _ in range(2)]
    est = average_entanglement(runs)
    assert est.stderr == pytest.approx(0.1 / math.sqrt(40_000), rel=0.3)
    assert abs(est.mean - 0.5) < 4 * est.stderr


def test_sweep_order_and_worker_independent():
    cfg = UnravelingConfig(t_transient=5.0, t_total=105.0)
    pts = [SweepPoint(1.0, g, 0.5) for g in (2.0, 8.0)]
    serial = sweep_entanglement(pts, cfg, seed=3, n_traj=1)
    reversed_ = sweep_entanglement(pts[::-1], cfg, seed=3, n_traj=1)[::-1]
    pooled = sweep_entanglement(pts, cfg, seed=3, n_traj=1, jobs=2)
    for a, b, c in zip(serial, reversed_, pooled):
        assert a.ok and a.mean == b.mean == c.mean and a.stderr == b.stderr == c.stderr


def test_run_point_records_failure():
    row = run_point(SweepPoint(1.0, 2.0, 0.5), UnravelingConfig(t_transient=1.0, t_total=3.0), 0, 1)
    assert not row.ok and row.error.startswith("InsufficientData")
    assert math.isnan(row.mean)


def test_stderr_shrinks_with_more_trajectories():
    cfg = UnravelingConfig(t_transient=20.0, t_total=320.0)
    point = SweepPoint(1.0, 2.0, 0.5)
    r4 = run_point(point, cfg, 0, 4)
    r8 = run_point(point, cfg, 0, 8)
    assert r8.stderr / r4.stderr == pytest.approx(1 / math.sqrt(2), rel=0.3)
