"""Conditioned pure-state trajectories and record-averaged entanglement.

Two unravelings of the master equation are provided:

* direct photodetection of both output channels (cavity A and atom B),
  integrated with the waiting-time method, and
* homodyne detection of the cavity output at local-oscillator phase
  ``theta``; with atomic damping the atom is still unraveled by jumps.

The entanglement of a record is the von Neumann entropy of the atomic
reduction of the conditioned state, sampled along the trajectory after a
transient and pooled over trajectories.
"""

from __future__ import annotations

import enum
import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .errors import CQEDError, DomainError, InsufficientData, StepSizeError, TruncationError
from .hilbert import (
    TOP_POPULATION_TOL,
    SystemParams,
    build_operators,
    product_state,
)
from .master import Frame, frame_unitary, hamiltonian

log = logging.getLogger(__name__)

_CHUNK_STEPS = 20_000
_UNIFORM_BUFFER = 4096
_JUMP_BUFFER = 4096
_TOP_LEVELS = 3


class Unraveling(str, enum.Enum):
    DIRECT = "direct"
    HOMODYNE = "homodyne"


@dataclass(frozen=True)
class UnravelingConfig:
    """How the environment is read and how long a trajectory runs.

    ``dt_bar=None`` picks a default: ``1e-3 min(1, 1/gamma_a)`` for
    homodyne, and for direct detection ``0.01`` capped by the RK4
    stability limit of the non-Hermitian generator. ``jump_scale_a``
    multiplies the cavity collapse operator and exists only as a
    mutation-test hook; it must stay 1 for physical runs.
    """

    kind: Unraveling = Unraveling.DIRECT
    theta: float = 0.0
    frame: Frame = Frame.ORIGINAL
    dt_bar: float | None = None
    t_transient: float = 20.0
    t_total: float = 2000.0
    sample_interval: float = 0.1
    jump_scale_a: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Unraveling(self.kind))
        object.__setattr__(self, "frame", Frame(self.frame))
        if not 0 <= self.t_transient < self.t_total:
            raise DomainError("need 0 <= t_transient < t_total")
        if self.sample_interval <= 0:
            raise DomainError("sample_interval must be positive")
        if self.dt_bar is not None and not 0 < self.dt_bar <= self.sample_interval:
            raise DomainError("need 0 < dt_bar <= sample_interval")

    def replace(self, **changes) -> "UnravelingConfig":
        values = asdict(self)
        values.update(changes)
        return UnravelingConfig(**values)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kind"] = self.kind.value
        out["frame"] = self.frame.value
        return out


@dataclass
class TrajectoryRecord:
    """The classical measurement record of one trajectory.

    Direct detection fills ``jump_times`` and ``jump_channels`` (``"A"`` or
    ``"B"``). Homodyne fills ``charges`` with the charge ``dq_theta``
    integrated over each sampling interval, and ``jump_times`` with the
    atomic jumps of a hybrid run.
    """

    kind: Unraveling
    seed: tuple
    jump_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_channels: np.ndarray = field(default_factory=lambda: np.empty(0, dtype="<U1"))
    charges: np.ndarray = field(default_factory=lambda: np.empty(0))
    charge_interval: float = 0.0
    hybrid: bool = False


@dataclass
class Trajectory:
    times: np.ndarray
    entropy: np.ndarray
    record: TrajectoryRecord
    state: np.ndarray
    dt_bar: float
    max_top_population: float

    def __iter__(self):
        # Unpacks as (entropy series, record, final state).
        return iter((self.entropy, self.record, self.state))


@dataclass(frozen=True)
class EntanglementEstimate:
    mean: float
    stderr: float
    series: np.ndarray
    correlation_time: float = 0.0
    block_length: int = 0
    n_blocks: int = 0


def seed_sequence(seed) -> np.random.SeedSequence:
    """Seed sequence from an int, a ``(master, *keys)`` tuple, or a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (tuple, list)):
        master, *keys = seed
        return np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return np.random.SeedSequence(int(seed))


def trajectory_rng(seed) -> np.random.Generator:
    """Counter-based (Philox) stream keyed by the seed tuple."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed)))


def _seed_tuple(seed) -> tuple:
    ss = seed_sequence(seed)
    return (int(ss.entropy),) + tuple(ss.spawn_key)


def ground_state(params: SystemParams) -> np.ndarray:
    """``|0>|g>`` on the joint space."""
    fock = np.zeros(params.dim_a, dtype=complex)
    fock[0] = 1.0
    return product_state(fock, np.array([1.0, 0.0], dtype=complex))


@dataclass(frozen=True)
class _Model:
    generator: sp.csr_matrix  # -i H_eff
    channels: tuple  # (label, collapse operator) pairs, sparse
    psi0: np.ndarray


def _model(params: SystemParams, cfg: UnravelingConfig, psi0=None) -> _Model:
    """Effective generator and collapse operators in the configured frame.

    The displaced frame is a change of representation of the same
    physical unraveling: every operator (including the collapse
    operators) is conjugated by the frame unitary.
    """
    ops = build_operators(params)
    h = hamiltonian(params, Frame.ORIGINAL)
    channels = []
    if params.gamma_a_bar > 0:
        c = cfg.jump_scale_a * math.sqrt(2.0 * params.gamma_a_bar) * ops.a
        if cfg.kind is Unraveling.HOMODYNE:
            c = np.exp(-1j * cfg.theta) * c
        channels.append(("A", c))
    if params.gamma_b_bar > 0:
        channels.append(("B", math.sqrt(2.0 * params.gamma_b_bar) * ops.b))
    h_eff = h - 0.5j * sum((c.conj().T @ c for _, c in channels), np.zeros_like(h))
    psi = ground_state(params) if psi0 is None else np.asarray(psi0, dtype=complex).copy()
    if cfg.frame is Frame.DISPLACED:
        u = frame_unitary(params)
        h_eff = u.conj().T @ h_eff @ u
        channels = [(k, u.conj().T @ c @ u) for k, c in channels]
        if psi0 is None:
            psi = u.conj().T @ psi
    gen = sp.csr_matrix(-1j * h_eff)
    gen.eliminate_zeros()
    sparse_channels = []
    for k, c in channels:
        cs = sp.csr_matrix(c)
        cs.eliminate_zeros()
        sparse_channels.append((k, cs))
    return _Model(gen, tuple(sparse_channels), psi / np.linalg.norm(psi))


def _grid(cfg: UnravelingConfig, dt: float):
    """Snap the step so that sampling and run lengths are whole step counts."""
    per_sample = max(1, int(math.ceil(cfg.sample_interval / dt - 1e-9)))
    dt = cfg.sample_interval / per_sample
    n_steps = int(round(cfg.t_total / dt))
    first = int(round(cfg.t_transient / dt))
    # The first sample is taken at t_transient (or one interval in if zero).
    first = max(first, per_sample)
    return dt, per_sample, n_steps, first


def default_direct_dt(model: _Model) -> float:
    norm1 = spla.norm(model.generator, 1)
    return min(0.01, 1.0 / max(norm1, 1.0))


def default_homodyne_dt(params: SystemParams) -> float:
    return 1e-3 * min(1.0, 1.0 / params.gamma_a_bar)


def _stack_csr(mats, dim):
    nnz = max(1, max(m.nnz for m in mats))
    indptr = np.zeros((len(mats), dim + 1), dtype=np.int64)
    indices = np.zeros((len(mats), nnz), dtype=np.int64)
    data = np.zeros((len(mats), nnz), dtype=np.complex128)
    for i, m in enumerate(mats):
        indptr[i] = m.indptr
        indices[i, : m.nnz] = m.indices
        data[i, : m.nnz] = m.data
    return indptr, indices, data


def _csr_arrays(m):
    return (
        np.ascontiguousarray(m.indptr, dtype=np.int64),
        np.ascontiguousarray(m.indices, dtype=np.int64),
        np.ascontiguousarray(m.data, dtype=np.complex128),
    )


def _check_top(top: float, params: SystemParams) -> None:
    if top > TOP_POPULATION_TOL:
        raise TruncationError(
            f"conditioned state put {top:.2e} in the top Fock levels; raise n_max "
            f"(currently {params.n_max})"
        )


def simulate_direct(params: SystemParams, cfg: UnravelingConfig, seed, psi0=None) -> Trajectory:
    """One quantum-jump trajectory under direct photodetection.

    Jump times use the norm-threshold method: the unnormalized state is
    propagated with RK4 until its squared norm drops below a uniform
    threshold, the crossing is bisected to ``1e-3 dt``, and the channel is
    drawn with probability proportional to ``||c_k psi||^2``.
    """
    if cfg.kind is not Unraveling.DIRECT:
        raise DomainError("simulate_direct needs a direct-detection config")
    if params.gamma_a_bar + params.gamma_b_bar <= 0:
        raise DomainError("direct detection needs a damped channel")
    model = _model(params, cfg, psi0)
    dt = cfg.dt_bar if cfg.dt_bar is not None else default_direct_dt(model)
    dt, per_sample, n_steps, first = _grid(cfg, dt)
    n_samples_total = max(0, (n_steps - first) // per_sample + 1)

    labels = [k for k, _ in model.channels]
    g = _csr_arrays(model.generator)
    c = _stack_csr([m for _, m in model.channels], params.dim)
    rng = trajectory_rng(seed)
    psi = model.psi0.copy()
    uniforms = rng.random(_UNIFORM_BUFFER)
    state = np.array([uniforms[0], 0.0])
    u_pos = 1
    samples = np.empty(n_samples_total)
    jump_times = np.empty(_JUMP_BUFFER)
    jump_channels = np.empty(_JUMP_BUFFER, dtype=np.int64)
    all_times, all_channels = [], []
    n_samples = 0
    step = 0
    while step < n_steps:
        chunk = min(_CHUNK_STEPS, n_steps - step)
        status, done, u_pos, n_samples, n_jumps = _kernels.direct_chunk(
            *g, *c, psi, state, uniforms, u_pos,
            dt, chunk, step, per_sample, first,
            params.dim_a, _TOP_LEVELS,
            samples, n_samples, jump_times, jump_channels, 0,
        )
        all_times.append(jump_times[:n_jumps].copy())
        all_channels.append(jump_channels[:n_jumps].copy())
        step += done
        if status == _kernels.STEP_TOO_LARGE:
            raise StepSizeError(f"norm loss above 10% in one step of {dt:g}; reduce dt_bar")
        if status == _kernels.NEED_RANDOM:
            uniforms = np.concatenate([uniforms[u_pos:], rng.random(_UNIFORM_BUFFER)])
            u_pos = 0
    _check_top(state[1], params)

    times = np.concatenate(all_times) if all_times else np.empty(0)
    chans = np.concatenate(all_channels) if all_channels else np.empty(0, dtype=np.int64)
    record = TrajectoryRecord(
        kind=Unraveling.DIRECT,
        seed=_seed_tuple(seed),
        jump_times=times,
        jump_channels=np.array([labels[i] for i in chans], dtype="<U1"),
    )
    sample_times = (first + per_sample * np.arange(n_samples)) * dt
    return Trajectory(
        times=sample_times,
        entropy=samples[:n_samples],
        record=record,
        state=psi / np.linalg.norm(psi),
        dt_bar=dt,
        max_top_population=float(state[1]),
    )


def simulate_homodyne(params: SystemParams, cfg: UnravelingConfig, seed, psi0=None) -> Trajectory:
    """One diffusive trajectory under homodyne detection of the cavity output.

    Each step applies the linear stochastic Schroedinger update
    ``psi += (-i H_eff psi) dt + c psi dq`` with ``c = e^{-i theta}
    sqrt(2 gamma_a) a`` and the record increment
    ``dq = <c + c^dag> dt + dW``, then renormalizes (strong order 1/2).
    ``<c + c^dag>`` is ``2 sqrt(2 gamma_a) <X_theta>`` with the quadrature
    ``X_theta = (e^{i theta} a^dag + e^{-i theta} a) / 2``.
    """
    if cfg.kind is not Unraveling.HOMODYNE:
        raise DomainError("simulate_homodyne needs a homodyne config")
    if params.gamma_a_bar <= 0:
        raise DomainError("homodyne detection of the cavity output needs gamma_a_bar > 0")
    model = _model(params, cfg, psi0)
    dt = cfg.dt_bar if cfg.dt_bar is not None else default_homodyne_dt(params)
    dt, per_sample, n_steps, first = _grid(cfg, dt)
    n_samples_total = max(0, (n_steps - first) // per_sample + 1)

    channels = dict(model.channels)
    hybrid = "B" in channels
    g = _csr_arrays(model.generator)
    c = _csr_arrays(channels["A"])
    b = _csr_arrays(channels["B"] if hybrid else sp.csr_matrix((params.dim, params.dim), dtype=complex))
    rng = trajectory_rng(seed)
    psi = model.psi0.copy()
    state = np.zeros(2)
    samples = np.empty(n_samples_total)
    charges = np.empty(n_samples_total)
    jump_times = np.empty(_JUMP_BUFFER)
    all_jumps = []
    n_samples = 0
    step = 0
    while step < n_steps:
        chunk = min(_CHUNK_STEPS, n_steps - step)
        gauss = rng.standard_normal(chunk)
        uniforms = rng.random(chunk) if hybrid else gauss
        status, n_samples, n_jumps = _kernels.homodyne_chunk(
            *g, *c, *b, hybrid,
            psi, state, gauss, uniforms,
            dt, chunk, step, per_sample, first,
            params.dim_a, _TOP_LEVELS,
            samples, charges, n_samples, jump_times, 0,
        )
        if status == _kernels.STEP_TOO_LARGE:
            raise StepSizeError(f"stochastic step {dt:g} destabilized the norm; reduce dt_bar")
        if n_jumps > _JUMP_BUFFER:
            raise StepSizeError("atomic jump buffer overflow; shorten the chunk")
        all_jumps.append(jump_times[:n_jumps].copy())
        step += chunk
    _check_top(state[1], params)

    record = TrajectoryRecord(
        kind=Unraveling.HOMODYNE,
        seed=_seed_tuple(seed),
        jump_times=np.concatenate(all_jumps) if all_jumps else np.empty(0),
        jump_channels=np.full(sum(len(j) for j in all_jumps), "B", dtype="<U1"),
        charges=charges[:n_samples].copy(),
        charge_interval=per_sample * dt,
        hybrid=hybrid,
    )
    sample_times = (first + per_sample * np.arange(n_samples)) * dt
    return Trajectory(
        times=sample_times,
        entropy=samples[:n_samples],
        record=record,
        state=psi / np.linalg.norm(psi),
        dt_bar=dt,
        max_top_population=float(state[1]),
    )


def simulate(params: SystemParams, cfg: UnravelingConfig, seed, psi0=None) -> Trajectory:
    if cfg.kind is Unraveling.DIRECT:
        return simulate_direct(params, cfg, seed, psi0)
    return simulate_homodyne(params, cfg, seed, psi0)


def integrated_autocorrelation_time(series: np.ndarray, c: float = 5.0) -> float:
    """Integrated autocorrelation time in samples, with Sokal's window.

    ``tau = 1/2 + sum_{k>=1} rho(k)``, summed up to the smallest window
    ``M >= c tau(M)``. Equals the decay time for exponential correlations.
    Accepts a single series or a 2D stack (autocovariances are averaged).
    """
    x = np.atleast_2d(np.asarray(series, dtype=float))
    n = x.shape[1]
    x = x - x.mean(axis=1, keepdims=True)
    var = (x**2).mean()
    if n < 2 or var <= 1e-300:
        return 0.5
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, n=size, axis=1)
    acov = np.fft.irfft(f * np.conj(f), n=size, axis=1)[:, :n].mean(axis=0) / n
    rho = acov / acov[0]
    tau = 0.5
    for m in range(1, n):
        tau += rho[m]
        if m >= c * tau:
            break
    return max(float(tau), 0.5)


def average_entanglement(runs, min_blocks: int = 20, block_factor: float = 10.0) -> EntanglementEstimate:
    """Pooled time-and-ensemble average of entropy series with a block error.

    Blocks are ``block_factor`` correlation times long; the standard error
    is the spread of block means over ``sqrt(n_blocks)``. Raises
    InsufficientData below ``min_blocks`` blocks.
    """
    runs = [np.asarray(r, dtype=float) for r in runs]
    if not runs or any(r.ndim != 1 for r in runs):
        raise InsufficientData("need at least one one-dimensional series")
    length = len(runs[0])
    if any(len(r) != length for r in runs):
        raise ValueError("all series must share the sampling grid")
    stack = np.vstack(runs)
    tau = integrated_autocorrelation_time(stack)
    block = max(1, int(math.ceil(block_factor * tau)))
    per_run = length // block
    n_blocks = per_run * len(runs)
    if n_blocks < min_blocks:
        raise InsufficientData(
            f"{n_blocks} blocks of {block} samples (tau={tau:.1f}); need {min_blocks}"
        )
    means = stack[:, : per_run * block].reshape(len(runs), per_run, block).mean(axis=2).ravel()
    mean = float(stack.mean())
    stderr = float(means.std(ddof=1) / math.sqrt(n_blocks))
    return EntanglementEstimate(
        mean=mean,
        stderr=stderr,
        series=stack.ravel(),
        correlation_time=tau,
        block_length=block,
        n_blocks=n_blocks,
    )


@dataclass(frozen=True)
class SweepPoint:
    omega_bar: float
    gamma_a_bar: float
    gamma_b_bar: float
    theta: float = 0.0
    n_max: int | None = None

    def params(self) -> SystemParams:
        return SystemParams(self.omega_bar, self.gamma_a_bar, self.gamma_b_bar, self.n_max)

    def key(self) -> int:
        """Stable 32-bit key so a point's seeds do not depend on grid order."""
        text = "|".join(repr(float(v)) for v in (self.omega_bar, self.gamma_a_bar, self.gamma_b_bar, self.theta))
        return zlib.crc32(text.encode())


@dataclass
class SweepRow:
    point: SweepPoint
    mean: float = math.nan
    stderr: float = math.nan
    n_samples: int = 0
    correlation_time: float = math.nan
    error: str | None = None
    hybrid: bool = False

    @property
    def ok(self) -> bool:
        return self.error is None


def run_point(point: SweepPoint, cfg: UnravelingConfig, seed: int, n_traj: int) -> SweepRow:
    """Entanglement estimate at one grid point; failures are captured."""
    row = SweepRow(point)
    try:
        params = point.params()
        cfg_p = cfg.replace(theta=point.theta)
        runs = []
        for j in range(n_traj):
            traj = simulate(params, cfg_p, (seed, point.key(), j))
            runs.append(traj.entropy)
            row.hybrid = row.hybrid or traj.record.hybrid
        est = average_entanglement(runs)
        row.mean, row.stderr = est.mean, est.stderr
        row.correlation_time = est.correlation_time
        row.n_samples = len(est.series)
    except CQEDError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        log.warning("sweep point %s failed: %s", point, row.error)
    return row


def sweep_entanglement(points, cfg: UnravelingConfig, seed: int = 0, n_traj: int = 4, jobs: int = 1):
    """Entanglement at each grid point; returns rows in input order.

    Points are independent: each draws its trajectory seeds from
    ``(seed, point.key(), j)``, so results do not depend on grid order or
    on the number of workers.
    """
    points = list(points)
    if not points:
        raise ValueError("empty sweep grid")
    if jobs <= 1 or len(points) == 1:
        return [run_point(p, cfg, seed, n_traj) for p in points]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_point, p, cfg, seed, n_traj) for p in points]
        return [f.result() for f in futures]


def ensemble_states(params: SystemParams, cfg: UnravelingConfig, seed: int, n_traj: int, psi0=None, jobs: int = 1):
    """Final conditioned states of ``n_traj`` independent trajectories."""
    seeds = [(seed, j) for j in range(n_traj)]
    if jobs <= 1:
        return np.array([simulate(params, cfg, s, psi0).state for s in seeds])
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(simulate, params, cfg, s, psi0) for s in seeds]
        return np.array([f.result().state for f in futures])


def ensemble_mean(states: np.ndarray) -> np.ndarray:
    """Mean projector of a stack of normalized kets."""
    states = np.asarray(states)
    return states.T @ states.conj() / len(states)
