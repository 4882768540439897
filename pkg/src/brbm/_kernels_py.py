"""Pure-NumPy implementations of the hot Monte Carlo kernels.

The compiled extension (brbm._kernels) implements exactly the same draw-order
contract, so a given Generator state produces bit-identical output on either
backend:

* ``simulate_waves``: per generation, one batch of Exp(1) lifetimes (wave
  order) followed by one batch of standard normals (wave order); children are
  appended in wave order, two per split.
* ``census_waves``: per generation, lifetimes batch, then one batch of
  standard normals for all path sub-steps (node-major), then one batch of
  uniforms for all (sub-step, side) crossing checks (node-major, sub-step
  order, upper side before lower side).
* ``fpt_paths``: one batch of standard normals per time step (path order);
  no uniforms (survival is tracked as a product of bridge weights).
"""

import numpy as np

from .errors import ResourceGuardError

# Bridge crossing probabilities below exp(-40) are treated as zero: at that
# level a crossing can essentially never win against a 53-bit uniform.
BRIDGE_EXP_CUTOFF = 40.0

_LOG_COEFF = 3.0 / (2.0 * np.sqrt(2.0))


def barrier_curve(s, t):
    """Sub-linear barrier profile: logarithmic rise, parabolic blend across
    the mid window [t/2-1, t/2+1], logarithmic fall, C^1 throughout with
    curvature -3/(sqrt(2) t) on the blend."""
    s = np.asarray(s, dtype=np.float64)
    c = _LOG_COEFF
    s0 = 0.5 * t - 1.0
    s1 = 0.5 * t + 1.0
    v = c * np.log(0.5 * t)
    m = 2.0 * c / t
    xi = s - s0
    blend = v + m * xi - 0.5 * m * xi * xi
    out = np.where(
        s <= s0,
        c * np.log(s + 1.0),
        np.where(s >= s1, c * np.log(np.maximum(t - s + 1.0, 1e-300)), blend),
    )
    return out if out.ndim else float(out)


def simulate_waves(gen, roots_birth_time, roots_birth_pos, horizon, guard):
    """Event-driven binary branching at rate 1 with Brownian displacements,
    evaluated only at branch times and the horizon (no path discretization).

    Returns (parent, birth_time, birth_pos, split_time, end_pos, is_leaf);
    parent is -1 for the injected roots, a local node index otherwise, and
    split_time is min(branch time, horizon).
    """
    bt = np.ascontiguousarray(roots_birth_time, dtype=np.float64)
    bp = np.ascontiguousarray(roots_birth_pos, dtype=np.float64)
    if bt.size == 0:
        raise ValueError("at least one root particle required")
    if np.any(bt > horizon):
        raise ValueError("root birth time beyond horizon")

    parents = [np.full(bt.size, -1, dtype=np.int64)]
    births, positions, splits, ends, leaves = [], [], [], [], []
    wave_parent_ids = np.arange(bt.size, dtype=np.int64)  # ids of current wave
    total = 0
    first = True
    while bt.size:
        k = bt.size
        total += k
        if total > guard:
            raise ResourceGuardError(f"population guard exceeded: {total} > {guard}")
        life = gen.standard_exponential(k)
        z = gen.standard_normal(k)
        split_raw = bt + life
        leaf = split_raw >= horizon
        eff = np.where(leaf, horizon, split_raw)
        end = bp + z * np.sqrt(eff - bt)

        births.append(bt)
        positions.append(bp)
        splits.append(eff)
        ends.append(end)
        leaves.append(leaf.astype(np.uint8))
        if not first:
            parents.append(np.repeat(prev_split_ids, 2))
        first = False

        splitters = ~leaf
        prev_split_ids = wave_parent_ids[splitters]
        wave_parent_ids = np.arange(total, total + 2 * prev_split_ids.size, dtype=np.int64)
        bt = np.repeat(split_raw[splitters], 2)
        bp = np.repeat(end[splitters], 2)

    return (
        np.concatenate(parents),
        np.concatenate(births),
        np.concatenate(positions),
        np.concatenate(splits),
        np.concatenate(ends),
        np.concatenate(leaves),
    )


def _substep_layout(bt, eff, dt_path):
    """Per-node sub-step counts and flat segment offsets."""
    elapsed = eff - bt
    m = np.ceil(elapsed / dt_path).astype(np.int64)
    m = np.maximum(m, 0)
    # guard against ceil landing one too high in floating point
    over = (m > 0) & (elapsed - (m - 1) * dt_path <= 0.0)
    m[over] -= 1
    return m


def census_waves(
    gen,
    horizon,
    dt_path,
    slopes,
    offsets,
    curved,
    box_lo,
    box_hi,
    reflected,
    guard,
):
    """One replicate of the barrier census.

    Each lineage is monitored at step ``dt_path`` against K upper barriers
    slope_k * s + offset_k (+ the log curve when curved_k), with the exact
    linear-boundary bridge probability applied on every sub-segment; the
    reflected variant monitors the signed path against the mirrored pair of
    boundaries.  Counts particles alive at the horizon that never crossed
    barrier k and land in [box_lo_k, box_hi_k].
    """
    slopes = np.asarray(slopes, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.float64)
    curved = np.asarray(curved, dtype=bool)
    box_lo = np.asarray(box_lo, dtype=np.float64)
    box_hi = np.asarray(box_hi, dtype=np.float64)
    K = slopes.size
    n_sides = 2 if reflected else 1

    counts = np.zeros(K, dtype=np.int64)
    n_leaves = 0

    bt = np.array([0.0])
    bp = np.array([0.0])
    dead = np.zeros((1, K), dtype=bool)
    # initial check at s = 0 (root at the origin)
    b0_root = offsets + np.where(curved, barrier_curve(0.0, horizon), 0.0)
    dead[0] |= 0.0 >= b0_root
    if reflected:
        dead[0] |= 0.0 <= -b0_root

    total = 0
    while bt.size:
        k = bt.size
        total += k
        if total > guard:
            raise ResourceGuardError(f"population guard exceeded: {total} > {guard}")
        life = gen.standard_exponential(k)
        split_raw = bt + life
        leaf = split_raw >= horizon
        eff = np.where(leaf, horizon, split_raw)

        m = _substep_layout(bt, eff, dt_path)
        M = int(m.sum())
        z = gen.standard_normal(M)
        u = gen.random(M * n_sides).reshape(M, n_sides) if M else np.empty((0, n_sides))

        node_of = np.repeat(np.arange(k), m)
        offs = np.zeros(k, dtype=np.int64)
        np.cumsum(m[:-1], out=offs[1:])
        j = np.arange(M) - offs[node_of]  # sub-step index within node

        h = np.full(M, dt_path)
        last = j == m[node_of] - 1
        h[last] = (eff - bt)[node_of[last]] - (m[node_of[last]] - 1) * dt_path

        s1 = bt[node_of] + j * dt_path + h
        s0 = bt[node_of] + j * dt_path

        has = m > 0
        incr = z * np.sqrt(h)
        cs = np.cumsum(incr)
        seg_base = np.zeros(k)
        if M:
            # cumulative sum just before each segment start
            seg_base[has] = cs[offs[has]] - incr[offs[has]]
        x1 = bp[node_of] + (cs - seg_base[node_of])
        x0 = np.empty(M)
        if M:
            x0[offs[has]] = bp[has]
            rest = np.ones(M, dtype=bool)
            rest[offs[has]] = False
            x0[rest] = x1[np.flatnonzero(rest) - 1]

        end = bp.copy()
        if M:
            end[has] = x1[offs[has] + m[has] - 1]

        new_dead = dead.copy()
        with np.errstate(over="ignore"):
            for kk in range(K):
                b_s0 = slopes[kk] * s0 + offsets[kk]
                b_s1 = slopes[kk] * s1 + offsets[kk]
                if curved[kk]:
                    b_s0 = b_s0 + barrier_curve(s0, horizon)
                    b_s1 = b_s1 + barrier_curve(s1, horizon)
                d0 = b_s0 - x0
                d1 = b_s1 - x1
                q = 2.0 * d0 * d1 / h
                p = np.where(q < BRIDGE_EXP_CUTOFF, np.exp(-np.minimum(q, BRIDGE_EXP_CUTOFF)), 0.0)
                event = (d1 <= 0.0) | (d0 <= 0.0) | (u[:, 0] < p)
                if reflected:
                    e0 = x0 + b_s0
                    e1 = x1 + b_s1
                    qm = 2.0 * e0 * e1 / h
                    pm = np.where(
                        qm < BRIDGE_EXP_CUTOFF, np.exp(-np.minimum(qm, BRIDGE_EXP_CUTOFF)), 0.0
                    )
                    event |= (e1 <= 0.0) | (e0 <= 0.0) | (u[:, 1] < pm)
                node_hit = np.zeros(k, dtype=bool)
                if M:
                    # reduceat needs in-range indices; zero-length segments are
                    # masked out right after
                    hit = np.add.reduceat(event.astype(np.int64), np.minimum(offs, M - 1)) > 0
                    hit[m == 0] = False
                    node_hit = hit
                new_dead[:, kk] |= node_hit

        if leaf.any():
            pos = np.abs(end[leaf]) if reflected else end[leaf]
            alive = ~new_dead[leaf]
            n_leaves += int(leaf.sum())
            for kk in range(K):
                counts[kk] += int(
                    np.count_nonzero(alive[:, kk] & (pos >= box_lo[kk]) & (pos <= box_hi[kk]))
                )

        splitters = ~leaf
        bt = np.repeat(split_raw[splitters], 2)
        bp = np.repeat(end[splitters], 2)
        dead = np.repeat(new_dead[splitters], 2, axis=0)

    return counts, n_leaves


def fpt_paths(gen, intercept, slope, t, dt, n_paths):
    """Reflected-path survival below the affine boundary intercept + slope*s.

    Simulates signed Brownian paths on a dt grid; the returned weight is the
    product over sub-segments of (1 - bridge crossing probability) for the
    +/- boundary pair, zeroed on a hard crossing.  E[weight * f(|end|)]
    estimates E[f(|B_t|); tau > t] without discretization bias at O(dt^2)
    residual (double crossings within one step).
    """
    n_steps = int(np.ceil(t / dt))
    if t - (n_steps - 1) * dt <= 0.0:
        n_steps -= 1
    x = np.zeros(n_paths)
    w = np.ones(n_paths)
    if intercept <= 0.0:
        w[:] = 0.0
    s0 = 0.0
    with np.errstate(over="ignore"):
        for step in range(n_steps):
            h = dt if step < n_steps - 1 else t - (n_steps - 1) * dt
            s1 = s0 + h
            z = gen.standard_normal(n_paths)
            x1 = x + z * np.sqrt(h)
            b0 = intercept + slope * s0
            b1 = intercept + slope * s1
            d0 = b0 - x
            d1 = b1 - x1
            e0 = x + b0
            e1 = x1 + b1
            hard = (d1 <= 0.0) | (e1 <= 0.0)
            q_up = 2.0 * d0 * d1 / h
            q_dn = 2.0 * e0 * e1 / h
            p_up = np.where(
                q_up < BRIDGE_EXP_CUTOFF, np.exp(-np.minimum(q_up, BRIDGE_EXP_CUTOFF)), 0.0
            )
            p_dn = np.where(
                q_dn < BRIDGE_EXP_CUTOFF, np.exp(-np.minimum(q_dn, BRIDGE_EXP_CUTOFF)), 0.0
            )
            w *= np.where(hard, 0.0, (1.0 - p_up) * (1.0 - p_dn))
            x = x1
            s0 = s1
    return x, w
