# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=False
"""Compiled kernels, branch-for-branch identical to kernels/pure.py.

Plain C doubles with libm exp/log1p/sqrt reproduce CPython float math
bit-for-bit as long as the operation order matches, which is why the loop
bodies below are literal transcriptions of the pure versions. cdivision
stays off; all divisors are nonzero by construction anyway.
"""

from libc.math cimport exp, log1p, sqrt, INFINITY

from cpython cimport array
import array

cdef array.array _DBL_TEMPLATE = array.array("d", [])


cdef array.array _as_darr(object seq):
    if isinstance(seq, array.array) and (<array.array> seq).ob_descr.typecode == b"d":
        return <array.array> seq
    return array.array("d", seq)


def evac_pressure(double p_cap, double tau, double t_since):
    if t_since <= 0.0:
        return 0.0
    return p_cap * (1.0 - exp(-t_since / tau))


def evac_crossing_time(double p_cap, double tau, double p_target):
    if p_target <= 0.0:
        return 0.0
    if p_cap <= p_target:
        return INFINITY
    return -tau * log1p(-p_target / p_cap)


def nrmse(object meas_t_o, object meas_v_o, object sim_t_o, object sim_v_o):
    cdef Py_ssize_t n = len(meas_t_o)
    cdef Py_ssize_t m = len(sim_t_o)
    if n == 0 and m == 0:
        return 0.0
    if n == 0 or m == 0:
        return 1.0
    cdef array.array meas_t = _as_darr(meas_t_o)
    cdef array.array meas_v = _as_darr(meas_v_o)
    cdef array.array sim_t = _as_darr(sim_t_o)
    cdef array.array sim_v = _as_darr(sim_v_o)
    cdef double[:] mt = meas_t
    cdef double[:] mv = meas_v
    cdef double[:] st = sim_t
    cdef double[:] sv_ = sim_v
    cdef double acc = 0.0
    cdef double vmin = INFINITY
    cdef double vmax = -INFINITY
    cdef double amax = 0.0
    cdef Py_ssize_t j = 0
    cdef Py_ssize_t i
    cdef double t, v, av, sv, t0, t1, d, rmse, rng
    for i in range(n):
        t = mt[i]
        v = mv[i]
        if v < vmin:
            vmin = v
        if v > vmax:
            vmax = v
        av = -v if v < 0.0 else v
        if av > amax:
            amax = av
        while j + 1 < m and st[j + 1] <= t:
            j += 1
        if t <= st[0]:
            sv = sv_[0]
        elif j + 1 >= m:
            sv = sv_[m - 1]
        else:
            t0 = st[j]
            t1 = st[j + 1]
            sv = sv_[j] + (sv_[j + 1] - sv_[j]) * ((t - t0) / (t1 - t0))
        d = sv - v
        acc += d * d
    rmse = sqrt(acc / n)
    rng = vmax - vmin
    if rng < 1e-9:
        rng = amax if amax > 1.0 else 1.0
    return rmse / rng


def event_deviation(object a_times_o, object b_times_o, double window_len):
    cdef Py_ssize_t na = len(a_times_o)
    cdef Py_ssize_t nb = len(b_times_o)
    if na == 0 and nb == 0:
        return 0.0
    cdef Py_ssize_t nm = na if na < nb else nb
    cdef double dev = 0.0
    cdef double acc = 0.0
    cdef Py_ssize_t i
    cdef double d
    cdef array.array a_arr
    cdef array.array b_arr
    cdef double[:] a
    cdef double[:] b
    if nm > 0:
        a_arr = _as_darr(a_times_o)
        b_arr = _as_darr(b_times_o)
        a = a_arr
        b = b_arr
        for i in range(nm):
            d = a[i] - b[i]
            acc += -d if d < 0.0 else d
        dev = (acc / nm) / window_len
    return dev + <double> (na + nb - 2 * nm) / <double> (na + nb)
