"""Reference implementations of the numeric hot-path kernels.

These run inside the innermost loops of parameter fitting and candidate
checking (one call per monitored signal per objective evaluation), which is
where virtually all compute time goes. The compiled twin in ``_native.pyx``
mirrors every branch and the exact order of floating-point operations so
that both backends return bit-identical doubles; any change here must be
mirrored there (tests/test_kernels.py asserts the parity).
"""

from __future__ import annotations

import math

__all__ = [
    "evac_pressure",
    "evac_crossing_time",
    "nrmse",
    "event_deviation",
]


def evac_pressure(p_cap: float, tau: float, t_since: float) -> float:
    """Relative vacuum level reached ``t_since`` seconds into evacuation."""
    if t_since <= 0.0:
        return 0.0
    return p_cap * (1.0 - math.exp(-t_since / tau))


def evac_crossing_time(p_cap: float, tau: float, p_target: float) -> float:
    """Time for the evacuation curve to reach ``p_target``; inf if unreachable."""
    if p_target <= 0.0:
        return 0.0
    if p_cap <= p_target:
        return math.inf
    return -tau * math.log1p(-p_target / p_cap)


def nrmse(meas_t, meas_v, sim_t, sim_v) -> float:
    """Range-normalized RMSE of a simulated series against a measured one.

    The simulated series is linearly interpolated onto the measured
    timestamps (held constant beyond its ends). The RMSE is divided by the
    measured value range; for near-constant signals (range < 1e-9) the
    divisor falls back to max(|measured|, 1). A series present on only one
    side scores the maximum deviation 1.0; two empty series score 0.0.
    """
    n = len(meas_t)
    m = len(sim_t)
    if n == 0 and m == 0:
        return 0.0
    if n == 0 or m == 0:
        return 1.0
    acc = 0.0
    vmin = math.inf
    vmax = -math.inf
    amax = 0.0
    j = 0
    for i in range(n):
        t = meas_t[i]
        v = meas_v[i]
        if v < vmin:
            vmin = v
        if v > vmax:
            vmax = v
        av = -v if v < 0.0 else v
        if av > amax:
            amax = av
        while j + 1 < m and sim_t[j + 1] <= t:
            j += 1
        if t <= sim_t[0]:
            sv = sim_v[0]
        elif j + 1 >= m:
            sv = sim_v[m - 1]
        else:
            t0 = sim_t[j]
            t1 = sim_t[j + 1]
            sv = sim_v[j] + (sim_v[j + 1] - sim_v[j]) * ((t - t0) / (t1 - t0))
        d = sv - v
        acc += d * d
    rmse = math.sqrt(acc / n)
    rng = vmax - vmin
    if rng < 1e-9:
        rng = amax if amax > 1.0 else 1.0
    return rmse / rng


def event_deviation(a_times, b_times, window_len: float) -> float:
    """Deviation between two event-time lists over a window.

    Events are matched greedily in time order (k-th earliest with k-th
    earliest); the score is mean |dt| of matched pairs normalized by the
    window length, plus the unmatched fraction of all events. Two empty
    lists score 0.0.
    """
    na = len(a_times)
    nb = len(b_times)
    if na == 0 and nb == 0:
        return 0.0
    nm = na if na < nb else nb
    dev = 0.0
    if nm > 0:
        acc = 0.0
        for i in range(nm):
            d = a_times[i] - b_times[i]
            acc += -d if d < 0.0 else d
        dev = (acc / nm) / window_len
    return dev + (na + nb - 2 * nm) / (na + nb)
