"""Acceptance criteria at their stated tolerances.

Each test records one ``criterion N PASS|FAIL`` line (echoed in the
pytest terminal summary) and then asserts. Run standalone with
``python3 tests/test_acceptance.py``.
"""

import math

import numpy as np
import pytest

from cqed_entanglement.experiments import (
    DEFAULTS,
    check_dark_state,
    oracle_agreement,
    scaling_report,
    unraveling_mean_distance,
    wigner_steady_state,
)
from cqed_entanglement.hilbert import (
    SystemParams,
    atomic_state,
    displacement,
    entanglement_entropy,
    ket_to_dm,
    partial_trace,
    trace_distance,
    von_neumann_entropy,
)
from cqed_entanglement.semiclassical import (
    MemberKind,
    averaged_phase_entanglement,
    construct_ensemble_state,
    dichotomous_mixture,
    fixed_points,
    gamma_a_for_xi,
    phase_average_density,
)
from cqed_entanglement.trajectories import SweepPoint, UnravelingConfig, run_point

RESULTS = []
SEED = 0
N_TRAJ = DEFAULTS["n_traj"]


def record(number, title, passed, detail):
    RESULTS.append(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
    print(RESULTS[-1])
    return passed


def gap_sigma(r1, r2):
    return 2.0 * math.hypot(r1.stderr, r2.stderr)


def test_criterion_01_dark_state():
    chk = check_dark_state(1.0, 0.5, 2000.0, SEED)
    d = chk["details"]
    ok = d["trace_distance"] < 1e-6 and d["n_jumps"] == 0 and d["max_entropy"] == pytest.approx(0.0, abs=1e-12)
    assert record(1, "dark state", ok,
                  f"trace distance {d['trace_distance']:.1e}, {d['n_jumps']} jumps in t=2000, "
                  f"max entropy {d['max_entropy']:.1e}")


def test_criterion_02_unraveling_mean():
    params = SystemParams(1.0, 2.0, 0.5)
    bound = 3.0 / math.sqrt(500)
    direct = unraveling_mean_distance(params, "direct", 500, 30.0, SEED)
    homodyne = unraveling_mean_distance(params, "homodyne", 500, 30.0, SEED)
    ok = direct <= bound and homodyne <= bound
    assert record(2, "unraveling-mean consistency", ok,
                  f"M=500 trace distances direct {direct:.4f}, homodyne {homodyne:.4f} (bound {bound:.4f})")


def test_unraveling_mean_detects_wrong_jump_normalization():
    # Mutation check: doubling the cavity jump operator changes the master
    # equation the ensemble solves, so the same test must now fail.
    params = SystemParams(1.0, 2.0, 0.5)
    mutated = unraveling_mean_distance(params, "direct", 500, 30.0, SEED, jump_scale_a=2.0)
    RESULTS.append(f"   mutation check: jump operator x2 gives trace distance {mutated:.4f}")
    assert mutated > 3.0 / math.sqrt(500)


def test_criterion_03_direct_detection_peak():
    cfg = UnravelingConfig()
    rows = {g: run_point(SweepPoint(1.0, g, 0.5), cfg, SEED, N_TRAJ) for g in (0.3, 2.0, 20.0)}
    assert all(r.ok for r in rows.values()), [r.error for r in rows.values()]
    lo = rows[2.0].mean - rows[0.3].mean
    hi = rows[2.0].mean - rows[20.0].mean
    ok = lo > gap_sigma(rows[2.0], rows[0.3]) and hi > gap_sigma(rows[2.0], rows[20.0])
    detail = ", ".join(f"E({g})={r.mean:.4f}+-{r.stderr:.4f}" for g, r in rows.items())
    assert record(3, "direct-detection peak", ok, detail)


def test_criterion_04_atomic_damping_monotonic():
    cfg = UnravelingConfig()
    rows = [run_point(SweepPoint(1.0, 2.0, g), cfg, SEED, N_TRAJ) for g in (0.25, 0.5, 1.0, 2.0)]
    assert all(r.ok for r in rows), [r.error for r in rows]
    ok = all(b.mean <= a.mean + gap_sigma(a, b) for a, b in zip(rows, rows[1:]))
    detail = ", ".join(f"E(gb={r.point.gamma_b_bar})={r.mean:.4f}+-{r.stderr:.4f}" for r in rows)
    assert record(4, "monotonic in atomic damping", ok, detail)


def test_criterion_05_semiclassical_algebra():
    worst = 0.0
    circle = 0.0
    overlap = 0.0
    for xi in (2.0, 1.0, 1 / math.sqrt(2), 0.1):
        params = SystemParams(1.0, gamma_a_for_xi(xi, 1.0), 0.0, n_max=4)
        points = fixed_points(params)
        if xi >= 1:
            expected = [(1.0 + 0j, complex(1 / xi))]
        else:
            root = math.sqrt(1 - xi * xi)
            expected = [(complex(xi * xi, s * xi * root), complex(xi, s * root)) for s in (1, -1)]
            circle = max(circle, *(abs(abs(p.alpha - 0.5) - 0.5) for p in points))
            overlap = max(overlap, abs(np.vdot(atomic_state(points[0].beta), atomic_state(points[1].beta)) - xi))
        for p, (alpha, beta) in zip(points, expected, strict=True):
            worst = max(worst, abs(p.alpha - alpha), abs(p.beta - beta))
    ok = worst <= 1e-12 and circle <= 1e-12 and overlap <= 1e-10
    assert record(5, "semiclassical algebra", ok,
                  f"branch error {worst:.1e}, circle {circle:.1e}, atomic overlap {overlap:.1e}")


def test_criterion_06_ensemble_oracle():
    om = 3.0
    corrected, literal, n_literal = oracle_agreement(om)
    params = SystemParams(om, gamma_a_for_xi(1 / math.sqrt(2), om), 0.0)
    equivalence = trace_distance(dichotomous_mixture(params), phase_average_density(params, 64, "born"))
    members = max(entanglement_entropy(construct_ensemble_state(params, MemberKind.DICHOTOMOUS, v).state,
                                       params.dim_a) for v in (0, 1))
    ok_literal = n_literal > 0 and literal <= 5e-2
    ok = ok_literal and equivalence <= 1e-6 and members <= 1e-12
    detail = (f"printed formula vs constructed states: max deviation {literal:.3f} over {n_literal} "
              f"in-range phases (corrected denominator: {corrected:.1e}); mixture vs phase average "
              f"{equivalence:.1e}; which-branch members entropy {members:.1e}")
    # The printed closed form is only inside [0, 1] where A = 0, and there it
    # returns 0 while the constructed states carry ~0.6 bits. See the ledger.
    assert record(6, "ensemble oracle", ok, detail)


def test_criterion_07_homodyne_ordering():
    om = 3.0
    grid = (0.3, 0.45, 0.6, 0.8, 1.2)
    thetas = (0.0, math.pi / 40, math.pi / 10, math.pi / 2)
    cfg = UnravelingConfig(kind="homodyne")
    curves = [[run_point(SweepPoint(om, g, 0.0, th), cfg, SEED, N_TRAJ) for g in grid] for th in thetas]
    assert all(r.ok for c in curves for r in c), [r.error for c in curves for r in c if not r.ok]
    ordered = all(lower.mean <= upper.mean + gap_sigma(upper, lower)
                  for c_hi, c_lo in zip(curves, curves[1:]) for upper, lower in zip(c_hi, c_lo))
    top = curves[0]
    k = int(np.argmax([r.mean for r in top]))
    near = range(max(0, k - 1), min(len(grid), k + 2))
    analytic = {i: averaged_phase_entanglement(SystemParams(om, grid[i], 0.0), 64) for i in near}
    worst = max(abs(top[i].mean - analytic[i]) for i in near)
    positive = all(r.mean > 2 * r.stderr for r in curves[-1])
    ok = ordered and worst <= 0.1 and positive
    rows = "; ".join(f"ga={g}: " + "/".join(f"{c[i].mean:.3f}" for c in curves) for i, g in enumerate(grid))
    assert record(7, "homodyne ordering", ok,
                  f"{rows}; theta=0 vs phase average near peak max diff {worst:.3f}; pi/2 curve positive {positive}")


def test_criterion_08_wigner_double_peak():
    grid, params = wigner_steady_state(3.0)
    peaks = grid.local_maxima()
    targets = (1.5 + 1.5j, 1.5 - 1.5j)
    near = len(peaks) == 2 and all(min(abs(p - t) for p in peaks) <= 0.5 for t in targets)
    integral = grid.integral()
    ok = near and abs(integral - 1) <= 2e-2
    assert record(8, "Wigner double peak", ok,
                  f"maxima {[f'{p:.2f}' for p in peaks]}, integral {integral:.12f}")


def test_criterion_09_entropy_suite():
    rng = np.random.default_rng(SEED)
    dim_a, occupied, pad = 20, 10, 40

    def low_fock_ket(shape):
        v = np.zeros(shape, dtype=complex)
        v[..., :occupied] = rng.normal(size=shape[:-1] + (occupied,)) + 1j * rng.normal(size=shape[:-1] + (occupied,))
        return v / np.linalg.norm(v)

    product = np.kron(np.array([0.6, 0.8]), low_fock_ket((dim_a,)))
    pure = von_neumann_entropy(ket_to_dm(product))
    mixed = von_neumann_entropy(np.eye(2) / 2)
    psi = low_fock_ket((2, dim_a)).ravel()
    schmidt = abs(von_neumann_entropy(partial_trace(psi, "A", dim_a))
                  - von_neumann_entropy(partial_trace(psi, "B", dim_a)))
    # A cavity displacement is local, so it cannot change the entanglement.
    big = dim_a + pad
    padded = np.zeros((2, big), dtype=complex)
    padded[:, :dim_a] = psi.reshape(2, dim_a)
    shifted = np.kron(np.eye(2), displacement(1.0, big - 1)) @ padded.ravel()
    invariance = abs(entanglement_entropy(shifted, big) - entanglement_entropy(psi, dim_a))
    ok = abs(pure) <= 1e-8 and abs(mixed - 1) <= 1e-8 and schmidt <= 1e-8 and invariance <= 1e-8
    assert record(9, "entropy suite", ok,
                  f"pure {pure:.1e}, I/2 {mixed:.12f}, Schmidt asymmetry {schmidt:.1e}, "
                  f"displacement change {invariance:.1e}")


def test_criterion_10_scaling_report():
    sc = DEFAULTS["fig1_direct"]["scaling"]
    cfg = UnravelingConfig(t_transient=sc["t_transient"], t_total=sc["t_total"])
    report = scaling_report(1.0, 0.5, sc["small_gamma_a"], sc["large_gamma_a"], cfg, seed=SEED, n_traj=N_TRAJ)
    keys = ("exponent", "exponent_stderr", "r_value", "printed_exponent", "exponent_deviation")
    ok = all(all(k in report["regimes"][r] for k in keys) for r in ("small", "large"))
    detail = "; ".join(
        f"{name}: fitted {e.get('exponent', float('nan')):.2f}+-{e.get('exponent_stderr', float('nan')):.2f} "
        f"vs printed {e['printed_exponent']:g}, prefactor ratio {e.get('printed_prefactor_ratio', float('nan')):.2g}"
        for name, e in report["regimes"].items())
    assert record(10, "asymptotic scaling report", ok, detail)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
