"""Pure-Python kernels; same contracts and random-stream order as the compiled ones."""
from __future__ import annotations

import numpy as np

CHUNK = 1 << 16


def cheeger_scan(w: np.ndarray, pi: np.ndarray) -> tuple[float, int]:
    """Minimum of ``w(A, A^c) / pi(A)`` over non-empty ``A`` with ``pi(A) <= 1/2``.

    Returns the value and the bitmask of a minimizing set.
    """
    n = pi.shape[0]
    total = 1 << n
    shifts = np.arange(n, dtype=np.int64)
    best = np.inf
    best_mask = 0
    for start in range(1, total, CHUNK):
        masks = np.arange(start, min(start + CHUNK, total), dtype=np.int64)
        bits = ((masks[:, None] >> shifts) & 1).astype(np.float64)
        mass = bits @ pi
        flow = ((bits @ w) * (1.0 - bits)).sum(axis=1)
        ok = mass <= 0.5 + 1e-12
        if not ok.any():
            continue
        ratio = np.where(ok, flow / np.where(ok, mass, 1.0), np.inf)
        k = int(np.argmin(ratio))
        if ratio[k] < best:
            best = float(ratio[k])
            best_mask = int(masks[k])
    return best, best_mask


def _draw(cdf, u):
    # first index with cdf[k] > u
    lo, hi = 0, len(cdf) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cdf[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


def sampler_chunk(state, u, cdf0, p0cdf, acc_level, acc_swap, counts, traj):
    """Advance the resample-then-swap sampler by ``len(u)`` steps in place.

    Each row of ``u`` holds the uniforms ``(resample, move, index, proposal,
    accept)``.  ``counts[i, x]`` tallies visits of coordinate ``i`` to ``x``;
    ``traj`` receives the states when it has ``len(u)`` rows.
    """
    d = len(state)
    x = [int(v) for v in state]
    cdf0 = cdf0.tolist()
    p0cdf = p0cdf.tolist()
    acc_level = acc_level.tolist()
    acc_swap = acc_swap.tolist()
    tally = np.zeros_like(counts)
    record = len(traj) > 0
    for step, (u0, u1, u2, u3, u4) in enumerate(u.tolist()):
        x[0] = _draw(cdf0, u0)
        if u1 < 0.5:
            i = min(int(u2 * d), d - 1)
            y = _draw(p0cdf[x[i]], u3)
            if u4 < acc_level[i][x[i]][y]:
                x[i] = y
        else:
            i = min(int(u2 * (d - 1)), d - 2)
            if u4 < acc_swap[i][x[i]][x[i + 1]]:
                x[i], x[i + 1] = x[i + 1], x[i]
        for c in range(d):
            tally[c, x[c]] += 1
        if record:
            traj[step] = x
    counts += tally
    state[:] = x
