# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled hot kernels: event-driven branching simulation, barrier census
with bridge-corrected path monitoring, and reflected first-passage paths.

Draw-order contract is identical to brbm._kernels_py (see its module
docstring); with the same Generator state both backends return bit-identical
results.
"""

from libc.math cimport sqrt, exp, log, ceil, fabs

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid

import numpy as np

cimport numpy as cnp
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_exponential,
    random_standard_normal,
    random_standard_uniform,
)

from .errors import ResourceGuardError

cnp.import_array()

BRIDGE_EXP_CUTOFF = 40.0

cdef double _CUTOFF = 40.0
cdef double _LOG_COEFF = 3.0 / (2.0 * sqrt(2.0))


cdef bitgen_t *_bitgen(object gen) except NULL:
    capsule = gen.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("generator does not expose a BitGenerator capsule")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _curve_L(double s, double t) noexcept nogil:
    cdef double c = _LOG_COEFF
    cdef double s0 = 0.5 * t - 1.0
    cdef double s1 = 0.5 * t + 1.0
    cdef double v, m, xi, rem
    if s <= s0:
        return c * log(s + 1.0)
    if s >= s1:
        rem = t - s + 1.0
        if rem < 1e-300:
            rem = 1e-300
        return c * log(rem)
    v = c * log(0.5 * t)
    m = 2.0 * c / t
    xi = s - s0
    return v + m * xi - 0.5 * m * xi * xi


def barrier_curve(s, t):
    """Scalar/array wrapper over the C barrier profile (parity helper)."""
    arr = np.asarray(s, dtype=np.float64)
    flat_in = np.ascontiguousarray(arr.ravel())
    flat_out = np.empty(flat_in.shape[0])
    cdef double[::1] vi = flat_in
    cdef double[::1] vo = flat_out
    cdef Py_ssize_t i
    cdef double tt = t
    for i in range(vi.shape[0]):
        vo[i] = _curve_L(vi[i], tt)
    if arr.ndim == 0:
        return float(flat_out[0])
    return flat_out.reshape(arr.shape)


def simulate_waves(object gen, roots_birth_time, roots_birth_pos, double horizon, long long guard):
    """See brbm._kernels_py.simulate_waves."""
    bt_arr = np.ascontiguousarray(roots_birth_time, dtype=np.float64)
    bp_arr = np.ascontiguousarray(roots_birth_pos, dtype=np.float64)
    if bt_arr.shape[0] == 0:
        raise ValueError("at least one root particle required")
    if np.any(bt_arr > horizon):
        raise ValueError("root birth time beyond horizon")

    cdef bitgen_t *rng = _bitgen(gen)
    lock = gen.bit_generator.lock

    parents = [np.full(bt_arr.shape[0], -1, dtype=np.int64)]
    births, positions, splits, ends, leaves = [], [], [], [], []

    wave_ids_arr = np.arange(bt_arr.shape[0], dtype=np.int64)
    prev_split_ids = None

    cdef long long total = 0
    cdef Py_ssize_t k, i, j, nsplit
    cdef bint first = True
    cdef double sr
    cdef double[::1] bt, bp, life, z, split, eff, end, nbt, nbp
    cdef unsigned char[::1] leaf
    cdef long long[::1] ids, split_ids

    while bt_arr.shape[0]:
        k = bt_arr.shape[0]
        total += k
        if total > guard:
            raise ResourceGuardError(f"population guard exceeded: {total} > {guard}")
        bt = bt_arr
        bp = bp_arr
        life_arr = np.empty(k)
        z_arr = np.empty(k)
        life = life_arr
        z = z_arr
        with lock:
            for i in range(k):
                life[i] = random_standard_exponential(rng)
            for i in range(k):
                z[i] = random_standard_normal(rng)

        split_arr = np.empty(k)
        eff_arr = np.empty(k)
        end_arr = np.empty(k)
        leaf_arr = np.empty(k, dtype=np.uint8)
        split = split_arr
        eff = eff_arr
        end = end_arr
        leaf = leaf_arr
        nsplit = 0
        for i in range(k):
            sr = bt[i] + life[i]
            split[i] = sr
            if sr >= horizon:
                leaf[i] = 1
                eff[i] = horizon
            else:
                leaf[i] = 0
                eff[i] = sr
                nsplit += 1
            end[i] = bp[i] + z[i] * sqrt(eff[i] - bt[i])

        births.append(bt_arr)
        positions.append(bp_arr)
        splits.append(eff_arr)
        ends.append(end_arr)
        leaves.append(leaf_arr)
        if not first:
            parents.append(np.repeat(prev_split_ids, 2))
        first = False

        ids = wave_ids_arr
        split_ids_arr = np.empty(nsplit, dtype=np.int64)
        split_ids = split_ids_arr
        nbt_arr = np.empty(2 * nsplit)
        nbp_arr = np.empty(2 * nsplit)
        nbt = nbt_arr
        nbp = nbp_arr
        j = 0
        for i in range(k):
            if not leaf[i]:
                split_ids[j] = ids[i]
                nbt[2 * j] = split[i]
                nbt[2 * j + 1] = split[i]
                nbp[2 * j] = end[i]
                nbp[2 * j + 1] = end[i]
                j += 1
        prev_split_ids = split_ids_arr
        wave_ids_arr = np.arange(total, total + 2 * nsplit, dtype=np.int64)
        bt_arr = nbt_arr
        bp_arr = nbp_arr

    return (
        np.concatenate(parents),
        np.concatenate(births),
        np.concatenate(positions),
        np.concatenate(splits),
        np.concatenate(ends),
        np.concatenate(leaves),
    )


def census_waves(
    object gen,
    double horizon,
    double dt_path,
    slopes,
    offsets,
    curved,
    box_lo,
    box_hi,
    bint reflected,
    long long guard,
):
    """See brbm._kernels_py.census_waves."""
    slopes_a = np.ascontiguousarray(slopes, dtype=np.float64)
    offsets_a = np.ascontiguousarray(offsets, dtype=np.float64)
    curved_a = np.ascontiguousarray(curved, dtype=np.uint8)
    boxlo_a = np.ascontiguousarray(box_lo, dtype=np.float64)
    boxhi_a = np.ascontiguousarray(box_hi, dtype=np.float64)
    cdef Py_ssize_t K = slopes_a.shape[0]
    if K > 63:
        raise ValueError("at most 63 barriers per census pass")
    cdef double[::1] slp = slopes_a
    cdef double[::1] off = offsets_a
    cdef unsigned char[::1] crv = curved_a
    cdef double[::1] blo = boxlo_a
    cdef double[::1] bhi = boxhi_a
    cdef unsigned long long full_mask = ((<unsigned long long> 1) << K) - 1

    cdef bitgen_t *rng = _bitgen(gen)
    lock = gen.bit_generator.lock

    counts_arr = np.zeros(K, dtype=np.int64)
    cdef long long[::1] counts = counts_arr
    cdef long long n_leaves = 0
    cdef int n_sides = 2 if reflected else 1
    cdef bint any_curved = bool(np.any(curved_a))

    bt_arr = np.zeros(1)
    bp_arr = np.zeros(1)
    dead_arr = np.zeros(1, dtype=np.uint64)

    cdef unsigned long long mask0 = 0
    cdef Py_ssize_t kk
    cdef double b0r
    for kk in range(K):
        b0r = off[kk] + (_curve_L(0.0, horizon) if crv[kk] else 0.0)
        if 0.0 >= b0r or (reflected and 0.0 <= -b0r):
            mask0 |= (<unsigned long long> 1) << kk
    dead_arr[0] = mask0

    cdef long long total = 0, M
    cdef Py_ssize_t k, i, j, mi, base
    cdef double sr, elapsed, h_sub, s0, s1v, x0, x1, bv0, bv1, d0, d1, e0, e1, q
    cdef double L0, L1, endpos, pos
    cdef double[::1] bt, bp, life, z, u, split, eff, endv, nbt, nbp
    cdef unsigned long long[::1] dead, ndead, ndead2
    cdef long long[::1] m_view, off_view
    cdef unsigned long long dmask, bit

    while bt_arr.shape[0]:
        k = bt_arr.shape[0]
        total += k
        if total > guard:
            raise ResourceGuardError(f"population guard exceeded: {total} > {guard}")
        bt = bt_arr
        bp = bp_arr
        dead = dead_arr

        life_arr = np.empty(k)
        life = life_arr
        with lock:
            for i in range(k):
                life[i] = random_standard_exponential(rng)

        split_arr = np.empty(k)
        eff_arr = np.empty(k)
        m_arr = np.empty(k, dtype=np.int64)
        off_arr = np.empty(k, dtype=np.int64)
        split = split_arr
        eff = eff_arr
        m_view = m_arr
        off_view = off_arr
        M = 0
        for i in range(k):
            sr = bt[i] + life[i]
            split[i] = sr
            eff[i] = horizon if sr >= horizon else sr
            elapsed = eff[i] - bt[i]
            mi = <Py_ssize_t> ceil(elapsed / dt_path)
            if mi < 0:
                mi = 0
            if mi > 0 and elapsed - (mi - 1) * dt_path <= 0.0:
                mi -= 1
            m_view[i] = mi
            off_view[i] = M
            M += mi

        z_arr = np.empty(M)
        u_arr = np.empty(M * n_sides)
        z = z_arr
        u = u_arr
        with lock:
            for i in range(M):
                z[i] = random_standard_normal(rng)
            for i in range(M * n_sides):
                u[i] = random_standard_uniform(rng)

        end_arr = np.empty(k)
        ndead_arr = np.empty(k, dtype=np.uint64)
        endv = end_arr
        ndead = ndead_arr

        for i in range(k):
            mi = m_view[i]
            base = off_view[i]
            x0 = bp[i]
            s0 = bt[i]
            dmask = dead[i]
            L0 = _curve_L(s0, horizon) if any_curved else 0.0
            for j in range(mi):
                if j == mi - 1:
                    s1v = eff[i]
                else:
                    s1v = bt[i] + (j + 1) * dt_path
                h_sub = s1v - s0
                x1 = x0 + z[base + j] * sqrt(h_sub)
                L1 = _curve_L(s1v, horizon) if any_curved else 0.0
                if dmask != full_mask:
                    for kk in range(K):
                        bit = (<unsigned long long> 1) << kk
                        if dmask & bit:
                            continue
                        bv0 = slp[kk] * s0 + off[kk]
                        bv1 = slp[kk] * s1v + off[kk]
                        if crv[kk]:
                            bv0 += L0
                            bv1 += L1
                        d0 = bv0 - x0
                        d1 = bv1 - x1
                        if d1 <= 0.0 or d0 <= 0.0:
                            dmask |= bit
                            continue
                        q = 2.0 * d0 * d1 / h_sub
                        if q < _CUTOFF and u[(base + j) * n_sides] < exp(-q):
                            dmask |= bit
                            continue
                        if reflected:
                            e0 = x0 + bv0
                            e1 = x1 + bv1
                            if e1 <= 0.0 or e0 <= 0.0:
                                dmask |= bit
                                continue
                            q = 2.0 * e0 * e1 / h_sub
                            if q < _CUTOFF and u[(base + j) * n_sides + 1] < exp(-q):
                                dmask |= bit
                x0 = x1
                s0 = s1v
                L0 = L1
            endv[i] = x0
            ndead[i] = dmask

        for i in range(k):
            if split[i] >= horizon:
                n_leaves += 1
                endpos = endv[i]
                pos = fabs(endpos) if reflected else endpos
                dmask = ndead[i]
                for kk in range(K):
                    if not (dmask & ((<unsigned long long> 1) << kk)):
                        if blo[kk] <= pos <= bhi[kk]:
                            counts[kk] += 1

        j = 0
        for i in range(k):
            if split[i] < horizon:
                j += 1
        nbt_arr = np.empty(2 * j)
        nbp_arr = np.empty(2 * j)
        ndead2_arr = np.empty(2 * j, dtype=np.uint64)
        nbt = nbt_arr
        nbp = nbp_arr
        ndead2 = ndead2_arr
        j = 0
        for i in range(k):
            if split[i] < horizon:
                nbt[2 * j] = split[i]
                nbt[2 * j + 1] = split[i]
                nbp[2 * j] = endv[i]
                nbp[2 * j + 1] = endv[i]
                ndead2[2 * j] = ndead[i]
                ndead2[2 * j + 1] = ndead[i]
                j += 1
        bt_arr = nbt_arr
        bp_arr = nbp_arr
        dead_arr = ndead2_arr

    return counts_arr, int(n_leaves)


def fpt_paths(object gen, double intercept, double slope, double t, double dt, Py_ssize_t n_paths):
    """See brbm._kernels_py.fpt_paths."""
    cdef bitgen_t *rng = _bitgen(gen)
    lock = gen.bit_generator.lock

    cdef Py_ssize_t n_steps = <Py_ssize_t> ceil(t / dt)
    if t - (n_steps - 1) * dt <= 0.0:
        n_steps -= 1

    x_arr = np.zeros(n_paths)
    w_arr = np.ones(n_paths)
    z_arr = np.empty(n_paths)
    cdef double[::1] x = x_arr
    cdef double[::1] w = w_arr
    cdef double[::1] z = z_arr
    if intercept <= 0.0:
        w_arr[:] = 0.0

    cdef Py_ssize_t step, i
    cdef double s0 = 0.0, s1, h, sq, b0, b1, x1, d0, d1, e0, e1, q_up, q_dn, p_up, p_dn

    for step in range(n_steps):
        h = dt if step < n_steps - 1 else t - (n_steps - 1) * dt
        s1 = s0 + h
        with lock:
            for i in range(n_paths):
                z[i] = random_standard_normal(rng)
        sq = sqrt(h)
        b0 = intercept + slope * s0
        b1 = intercept + slope * s1
        for i in range(n_paths):
            x1 = x[i] + z[i] * sq
            if w[i] != 0.0:
                d0 = b0 - x[i]
                d1 = b1 - x1
                e0 = x[i] + b0
                e1 = x1 + b1
                if d1 <= 0.0 or e1 <= 0.0:
                    w[i] = 0.0
                else:
                    q_up = 2.0 * d0 * d1 / h
                    q_dn = 2.0 * e0 * e1 / h
                    p_up = exp(-q_up) if q_up < _CUTOFF else 0.0
                    p_dn = exp(-q_dn) if q_dn < _CUTOFF else 0.0
                    w[i] *= (1.0 - p_up) * (1.0 - p_dn)
            x[i] = x1
        s0 = s1
    return x_arr, w_arr
