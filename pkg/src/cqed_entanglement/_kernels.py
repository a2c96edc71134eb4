"""Compiled inner loops for the trajectory integrators.

The kernels work on unnormalized (direct) or normalized (homodyne) joint
kets with the qubit-major layout, take all randomness as pre-drawn arrays
and return after a fixed chunk of steps so the caller can refill the
random buffers. Generators are stored in CSR form.
"""

import math

import numpy as np
from numba import njit

# Status codes returned by the kernels.
OK = 0
NEED_RANDOM = 1
STEP_TOO_LARGE = 2

# More jumps than this inside one step means the step is far too long.
MAX_STEP_JUMPS = 4


@njit(cache=True)
def csr_matvec(indptr, indices, data, x, out):
    n = indptr.shape[0] - 1
    for i in range(n):
        s = 0j
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * x[indices[k]]
        out[i] = s


@njit(cache=True)
def norm2(x):
    s = 0.0
    for i in range(x.shape[0]):
        s += x[i].real * x[i].real + x[i].imag * x[i].imag
    return s


@njit(cache=True)
def rk4_step(indptr, indices, data, psi, h, out, k1, k2, k3, tmp):
    """One RK4 step of ``d psi/dt = G psi``; ``out`` may not alias ``psi``."""
    n = psi.shape[0]
    csr_matvec(indptr, indices, data, psi, k1)
    for i in range(n):
        tmp[i] = psi[i] + 0.5 * h * k1[i]
    csr_matvec(indptr, indices, data, tmp, k2)
    for i in range(n):
        tmp[i] = psi[i] + 0.5 * h * k2[i]
    csr_matvec(indptr, indices, data, tmp, k3)
    for i in range(n):
        tmp[i] = psi[i] + h * k3[i]
    csr_matvec(indptr, indices, data, tmp, out)
    for i in range(n):
        out[i] = psi[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + out[i])


@njit(cache=True)
def reduced_qubit(psi, dim_a):
    """Return (rho_gg, rho_ee, rho_ge) of the normalized atomic reduction."""
    pg = 0.0
    pe = 0.0
    c = 0j
    for n in range(dim_a):
        g = psi[n]
        e = psi[dim_a + n]
        pg += g.real * g.real + g.imag * g.imag
        pe += e.real * e.real + e.imag * e.imag
        c += g * np.conj(e)
    tot = pg + pe
    return pg / tot, pe / tot, c / tot


@njit(cache=True)
def qubit_entropy(psi, dim_a):
    pg, pe, c = reduced_qubit(psi, dim_a)
    cc = c.real * c.real + c.imag * c.imag
    radius = math.sqrt((pg - pe) ** 2 + 4.0 * cc)
    large = 0.5 * (1.0 + radius)
    small = (pg * pe - cc) / large
    if small <= 0.0:
        return 0.0
    if small > 0.5:
        small = 0.5
    large = 1.0 - small
    return -(small * math.log(small) + large * math.log(large)) / math.log(2.0)


@njit(cache=True)
def top_population(psi, dim_a, levels):
    top = 0.0
    for s in range(2):
        for n in range(dim_a - levels, dim_a):
            z = psi[s * dim_a + n]
            top += z.real * z.real + z.imag * z.imag
    return top / norm2(psi)


@njit(cache=True)
def direct_chunk(
    g_indptr, g_indices, g_data,
    c_indptr, c_indices, c_data,
    psi, state, uniforms, u_pos,
    dt, n_steps, step0, sample_every, first_sample_step,
    dim_a, top_levels,
    samples, n_samples, jump_times, jump_channels, n_jumps,
):
    """Advance a quantum-jump trajectory by up to ``n_steps`` steps.

    ``state`` holds ``[threshold, max_top_population]``. ``c_*`` are
    stacked CSR arrays, one row-block of ``indptr`` per channel. Returns
    ``(status, steps_done, u_pos, n_samples, n_jumps)``.
    """
    d = psi.shape[0]
    n_ch = c_indptr.shape[0]
    trial = np.empty(d, dtype=np.complex128)
    k1 = np.empty(d, dtype=np.complex128)
    k2 = np.empty(d, dtype=np.complex128)
    k3 = np.empty(d, dtype=np.complex128)
    tmp = np.empty(d, dtype=np.complex128)
    jumped = np.empty(d, dtype=np.complex128)
    weights = np.empty(n_ch, dtype=np.float64)
    tol = 1e-3 * dt
    for k in range(n_steps):
        step = step0 + k
        # Each jump consumes two uniforms; keep headroom for MAX_STEP_JUMPS.
        if u_pos + 2 * MAX_STEP_JUMPS > uniforms.shape[0] or n_jumps + MAX_STEP_JUMPS > jump_times.shape[0]:
            return NEED_RANDOM, k, u_pos, n_samples, n_jumps
        t0 = step * dt
        rem = dt
        elapsed = 0.0
        step_jumps = 0
        while True:
            p0 = norm2(psi)
            rk4_step(g_indptr, g_indices, g_data, psi, rem, trial, k1, k2, k3, tmp)
            p1 = norm2(trial)
            if p1 < 0.9 * p0 or step_jumps == MAX_STEP_JUMPS:
                return STEP_TOO_LARGE, k, u_pos, n_samples, n_jumps
            if p1 > state[0]:
                psi[:] = trial
                break
            lo = 0.0
            hi = rem
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                rk4_step(g_indptr, g_indices, g_data, psi, mid, trial, k1, k2, k3, tmp)
                if norm2(trial) > state[0]:
                    lo = mid
                else:
                    hi = mid
            rk4_step(g_indptr, g_indices, g_data, psi, hi, trial, k1, k2, k3, tmp)
            total = 0.0
            for ch in range(n_ch):
                csr_matvec(c_indptr[ch], c_indices[ch], c_data[ch], trial, jumped)
                weights[ch] = norm2(jumped)
                total += weights[ch]
            r = uniforms[u_pos] * total
            u_pos += 1
            chosen = n_ch - 1
            acc = 0.0
            for ch in range(n_ch):
                acc += weights[ch]
                if r < acc:
                    chosen = ch
                    break
            csr_matvec(c_indptr[chosen], c_indices[chosen], c_data[chosen], trial, jumped)
            scale = 1.0 / math.sqrt(norm2(jumped))
            for i in range(d):
                psi[i] = jumped[i] * scale
            elapsed += hi
            jump_times[n_jumps] = t0 + elapsed
            jump_channels[n_jumps] = chosen
            n_jumps += 1
            step_jumps += 1
            state[0] = uniforms[u_pos]
            u_pos += 1
            rem = dt - elapsed
            if rem <= 1e-12 * dt:
                break
        done = step + 1
        if done >= first_sample_step and (done - first_sample_step) % sample_every == 0:
            samples[n_samples] = qubit_entropy(psi, dim_a)
            n_samples += 1
            top = top_population(psi, dim_a, top_levels)
            if top > state[1]:
                state[1] = top
    return OK, n_steps, u_pos, n_samples, n_jumps


@njit(cache=True)
def homodyne_chunk(
    g_indptr, g_indices, g_data,
    c_indptr, c_indices, c_data,
    b_indptr, b_indices, b_data, has_b,
    psi, state, gauss, uniforms,
    dt, n_steps, step0, sample_every, first_sample_step,
    dim_a, top_levels,
    samples, charges, n_samples, jump_times, n_jumps,
):
    """Advance a diffusive (optionally hybrid) trajectory by ``n_steps``.

    Each step uses ``gauss[k]`` for the Wiener increment and, with
    ``has_b``, ``uniforms[k]`` for the atomic jump decision. ``state`` is
    ``[charge_accumulator, max_top_population]``. Returns
    ``(status, n_samples, n_jumps)``.
    """
    d = psi.shape[0]
    gpsi = np.empty(d, dtype=np.complex128)
    cpsi = np.empty(d, dtype=np.complex128)
    sqdt = math.sqrt(dt)
    for k in range(n_steps):
        step = step0 + k
        jumped = False
        if has_b:
            csr_matvec(b_indptr, b_indices, b_data, psi, cpsi)
            p_jump = norm2(cpsi) * dt
            if uniforms[k] < p_jump:
                scale = 1.0 / math.sqrt(norm2(cpsi))
                for i in range(d):
                    psi[i] = cpsi[i] * scale
                if n_jumps < jump_times.shape[0]:
                    jump_times[n_jumps] = (step + 1) * dt
                n_jumps += 1
                jumped = True
        if not jumped:
            csr_matvec(g_indptr, g_indices, g_data, psi, gpsi)
            csr_matvec(c_indptr, c_indices, c_data, psi, cpsi)
            # <c + c^dag> for the normalized state
            x = 0.0
            for i in range(d):
                x += 2.0 * (np.conj(psi[i]) * cpsi[i]).real
            dq = x * dt + sqdt * gauss[k]
            if step + 1 > first_sample_step - sample_every:
                state[0] += dq
            for i in range(d):
                psi[i] = psi[i] + dt * gpsi[i] + dq * cpsi[i]
            p = norm2(psi)
            if not (p > 0.5 and p < 2.0):
                return STEP_TOO_LARGE, n_samples, n_jumps
            scale = 1.0 / math.sqrt(p)
            for i in range(d):
                psi[i] *= scale
        done = step + 1
        if done >= first_sample_step and (done - first_sample_step) % sample_every == 0:
            samples[n_samples] = qubit_entropy(psi, dim_a)
            charges[n_samples] = state[0]
            state[0] = 0.0
            n_samples += 1
            top = top_population(psi, dim_a, top_levels)
            if top > state[1]:
                state[1] = top
    return OK, n_samples, n_jumps
