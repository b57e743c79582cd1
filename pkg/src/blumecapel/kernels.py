"""Hot inner loop of the Metropolis chain.

One kernel source is compiled two ways: through numba's @njit (default) and
as plain Python over numpy arrays (fallback).  Both consume identical
pre-drawn random arrays, so trajectories are bit-identical across backends.
Set the environment variable BLUMECAPEL_NO_NUMBA=1 (or call
``set_backend("python")``) to select the fallback.

The kernel works on a flat int8 spin array with a precomputed neighbor index
table (-1 marks an out-of-box neighbor, which contributes spin 0) and
precomputed per-neighborhood acceptance/energy tables, so the loop is pure
table lookups.
"""

from __future__ import annotations

import math
import os

import numpy as np

# chunk size of the pre-drawn random blocks; part of the determinism contract
CHUNK_STEPS = 16384

# kernel return reasons
EXHAUSTED = 0
TARGET_HIT = 1
SUPERCRIT_PAUSE = 2

# target bitmask
TARGET_PLUS = 1
TARGET_MINUS = 2
TARGET_ZERO = 4
TARGET_MANIFOLD = 8

_ENV_FLAG = "BLUMECAPEL_NO_NUMBA"

try:  # pragma: no cover - exercised when numba is absent
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def _chunk_loop(
    spins,
    nbr,
    acc,
    dh,
    alt,
    sites,
    choices,
    uniforms,
    n_steps,
    counts,
    energy,
    target_mask,
    manifold_n,
    supercrit_thr,
    armed,
    step0,
    next_trace,
    stride,
    trace_step,
    trace_energy,
    trace_np,
    trace_n0,
    trace_nm,
):
    n_sites = spins.shape[0]
    n_trace = 0
    reason = EXHAUSTED
    done = 0
    for t in range(n_steps):
        site = sites[t]
        cur = spins[site]
        new = alt[cur + 1, choices[t]]
        total = 0
        base = 4 * site
        for k in range(4):
            j = nbr[base + k]
            if j >= 0:
                total += spins[j]
        if uniforms[t] < acc[cur + 1, new + 1, total + 4]:
            spins[site] = new
            counts[cur + 1] -= 1
            counts[new + 1] += 1
            energy += dh[cur + 1, new + 1, total + 4]
        done = t + 1
        step = step0 + done
        if stride > 0 and step == next_trace:
            trace_step[n_trace] = step
            trace_energy[n_trace] = energy
            trace_np[n_trace] = counts[2]
            trace_n0[n_trace] = counts[1]
            trace_nm[n_trace] = counts[0]
            n_trace += 1
            next_trace += stride
        if target_mask != 0:
            if target_mask & TARGET_PLUS and counts[2] == n_sites:
                reason = TARGET_HIT
                break
            if target_mask & TARGET_MINUS and counts[0] == n_sites:
                reason = TARGET_HIT
                break
            if target_mask & TARGET_ZERO and counts[1] == n_sites:
                reason = TARGET_HIT
                break
            if target_mask & TARGET_MANIFOLD and counts[2] == manifold_n:
                reason = TARGET_HIT
                break
        if supercrit_thr > 0:
            if armed == 1:
                if counts[2] >= supercrit_thr:
                    reason = SUPERCRIT_PAUSE
                    break
            elif counts[2] < supercrit_thr:
                armed = 1
    return done, reason, energy, armed, next_trace, n_trace


_chunk_loop_python = _chunk_loop
_chunk_loop_numba = njit(cache=True)(_chunk_loop) if HAVE_NUMBA else _chunk_loop

_backend = "python"
if HAVE_NUMBA and not os.environ.get(_ENV_FLAG):
    _backend = "numba"


def set_backend(name: str) -> None:
    """Select "numba" or "python" for subsequent chunk runs."""
    global _backend
    if name not in ("numba", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise ValueError("numba is not available")
    _backend = name


def get_backend() -> str:
    return _backend


def run_chunk(*args):
    fn = _chunk_loop_numba if _backend == "numba" else _chunk_loop_python
    return fn(*args)


def neighbor_table(L: int, periodic: bool) -> np.ndarray:
    """Flat (L*L*4,) int32 table of neighbor flat-indices; -1 marks out-of-box.

    Site (x, y) maps to flat index (x-1)*L + (y-1).
    """
    nbr = np.full((L * L, 4), -1, dtype=np.int32)
    for x in range(1, L + 1):
        for y in range(1, L + 1):
            i = (x - 1) * L + (y - 1)
            steps = ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))
            for k, (nx, ny) in enumerate(steps):
                if periodic:
                    nx = (nx - 1) % L + 1
                    ny = (ny - 1) % L + 1
                    nbr[i, k] = (nx - 1) * L + (ny - 1)
                elif 1 <= nx <= L and 1 <= ny <= L:
                    nbr[i, k] = (nx - 1) * L + (ny - 1)
    return nbr.ravel()


def alternative_table() -> np.ndarray:
    """alt[s+1, c] = the c-th spin value different from s, in ascending order."""
    alt = np.zeros((3, 2), dtype=np.int8)
    alt[0] = (0, 1)  # from -1
    alt[1] = (-1, 1)  # from 0
    alt[2] = (-1, 0)  # from +1
    return alt


def flip_tables(J: float, lam: float, h: float, beta: float):
    """(acceptance, delta-H) tables indexed [s+1, s'+1, nbr_sum+4]."""
    dh = np.zeros((3, 3, 9), dtype=np.float64)
    acc = np.ones((3, 3, 9), dtype=np.float64)
    for s in (-1, 0, 1):
        for s_new in (-1, 0, 1):
            if s_new == s:
                continue
            for total in range(-4, 5):
                ds2 = float(s_new * s_new - s * s)
                ds = float(s_new - s)
                d = J * (4.0 * ds2 - 2.0 * ds * total) - lam * ds2 - h * ds
                dh[s + 1, s_new + 1, total + 4] = d
                acc[s + 1, s_new + 1, total + 4] = math.exp(-beta * d) if d > 0 else 1.0
    return acc, dh
