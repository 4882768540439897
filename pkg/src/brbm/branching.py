"""Event-driven binary branching Brownian motion at rate 1, its reflected
counterpart (absolute values of all particles), genealogy queries, and the
barrier census behind the frontier moment bounds.

Endpoint statistics use the exact embedded chain: particle positions are
sampled only at branch times and horizons, so extremes, clusters and MRCA
carry no path-discretization bias.  Only the barrier census monitors paths
on a grid, and there every sub-segment is corrected with the exact
linear-boundary bridge crossing probability.
"""

import csv
import warnings
from dataclasses import dataclass
from math import log, sqrt
from typing import Callable

import numpy as np

from ._backend import kernels
from ._kernels_py import barrier_curve
from .errors import ResourceGuardError  # noqa: F401  (re-export for callers)

__all__ = [
    "DEFAULT_GUARD",
    "LineageNode",
    "PopulationSnapshot",
    "BarrierSpec",
    "simulate_bbm",
    "simulate_bbm_nested",
    "reflect_population",
    "extremes",
    "mrca_time",
    "cluster_members",
    "barrier_census",
    "barrier_census_multi",
    "export_snapshots",
    "barrier_curve",
]

DEFAULT_GUARD = 5_000_000

SQRT2 = sqrt(2.0)
LOG_COEFF = 3.0 / (2.0 * SQRT2)


@dataclass(frozen=True)
class LineageNode:
    """One particle lifetime: born at (birth_time, birth_position), ends at
    split_time (a branch event, or the horizon for alive particles) at
    endpoint_position."""

    id: int
    parent: int  # -1 for the root
    birth_time: float
    birth_position: float
    split_time: float
    endpoint_position: float


@dataclass
class PopulationSnapshot:
    """Branching system observed at a horizon, with its full genealogy.

    Leaves (is_leaf) are the particles alive at the horizon; their
    endpoint_position entries are the positions X_v(t).  Positions are signed
    unless ``reflected`` is set (see :func:`reflect_population`).
    """

    horizon: float
    reflected: bool
    parent: np.ndarray
    birth_time: np.ndarray
    birth_position: np.ndarray
    split_time: np.ndarray
    endpoint_position: np.ndarray
    is_leaf: np.ndarray

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("snapshot must contain at least one alive particle")

    @property
    def n_particles(self) -> int:
        return int(np.count_nonzero(self.is_leaf))

    @property
    def particle_ids(self) -> np.ndarray:
        return np.flatnonzero(self.is_leaf)

    @property
    def positions(self) -> np.ndarray:
        """Positions of the particles alive at the horizon."""
        return self.endpoint_position[self.is_leaf]

    def node(self, node_id) -> LineageNode:
        i = int(node_id)
        if not 0 <= i < self.parent.size:
            raise KeyError(f"unknown node id {node_id}")
        return LineageNode(
            id=i,
            parent=int(self.parent[i]),
            birth_time=float(self.birth_time[i]),
            birth_position=float(self.birth_position[i]),
            split_time=float(self.split_time[i]),
            endpoint_position=float(self.endpoint_position[i]),
        )


def _snapshot_from_arrays(horizon, arrays, reflected=False):
    parent, bt, bp, st, ep, leaf = arrays
    return PopulationSnapshot(
        horizon=float(horizon),
        reflected=reflected,
        parent=parent,
        birth_time=bt,
        birth_position=bp,
        split_time=st,
        endpoint_position=ep,
        is_leaf=leaf.astype(bool),
    )


def simulate_bbm(t, stream, guard=DEFAULT_GUARD, start=0.0):
    """Simulate signed branching Brownian motion to horizon t.

    Exact event-driven construction: each particle lives Exp(1), its
    displacement over a lifetime is Gaussian with variance equal to the
    elapsed time.  E[#particles alive at t] = e^t; exceeding ``guard`` raises
    ResourceGuardError rather than truncating.
    """
    if t < 0:
        raise ValueError(f"horizon must be >= 0, got {t}")
    if guard <= 0:
        raise ValueError(f"guard must be > 0, got {guard}")
    arrays = kernels.simulate_waves(
        stream.generator, np.array([0.0]), np.array([float(start)]), float(t), int(guard)
    )
    return _snapshot_from_arrays(t, arrays)


def simulate_bbm_nested(horizons, stream, guard=DEFAULT_GUARD, start=0.0):
    """Observe one branching Brownian motion at several horizons.

    Returns a snapshot per horizon, all sharing one genealogy table; the
    continuation of an alive particle past a horizon appears as a fresh node
    whose parent is the particle's node in the previous segment (Exp(1)
    lifetimes are memoryless, so restarting the clocks is exact).
    """
    horizons = [float(h) for h in horizons]
    if not horizons:
        raise ValueError("need at least one horizon")
    if sorted(horizons) != horizons:
        raise ValueError("horizons must be sorted ascending")
    if horizons[0] < 0:
        raise ValueError("horizons must be >= 0")

    snapshots = []
    parent_parts, bt_parts, bp_parts, st_parts, ep_parts = [], [], [], [], []
    total = 0
    roots_bt = np.array([0.0])
    roots_bp = np.array([float(start)])
    roots_parent = np.array([-1], dtype=np.int64)

    for t in horizons:
        arrays = kernels.simulate_waves(
            stream.generator, roots_bt, roots_bp, t, int(guard) - total
        )
        parent, bt, bp, st, ep, leaf = arrays
        n_roots = roots_parent.size
        parent = parent.copy()
        parent[:n_roots] = roots_parent
        parent[n_roots:] += total

        parent_parts.append(parent)
        bt_parts.append(bt)
        bp_parts.append(bp)
        st_parts.append(st)
        ep_parts.append(ep)
        seg_leaf = leaf.astype(bool)

        total += parent.size
        full_leaf = np.zeros(total, dtype=bool)
        full_leaf[total - parent.size :] = seg_leaf
        snapshots.append(
            PopulationSnapshot(
                horizon=t,
                reflected=False,
                parent=np.concatenate(parent_parts),
                birth_time=np.concatenate(bt_parts),
                birth_position=np.concatenate(bp_parts),
                split_time=np.concatenate(st_parts),
                endpoint_position=np.concatenate(ep_parts),
                is_leaf=full_leaf,
            )
        )

        leaf_idx = np.flatnonzero(seg_leaf)
        roots_parent = leaf_idx + (total - parent.size)
        roots_bt = np.full(leaf_idx.size, t)
        roots_bp = ep[leaf_idx]

    return snapshots


def reflect_population(snap):
    """Absolute values of every stored position; genealogy unchanged."""
    if snap.reflected:
        raise ValueError("snapshot is already reflected")
    return PopulationSnapshot(
        horizon=snap.horizon,
        reflected=True,
        parent=snap.parent,
        birth_time=snap.birth_time,
        birth_position=np.abs(snap.birth_position),
        split_time=snap.split_time,
        endpoint_position=np.abs(snap.endpoint_position),
        is_leaf=snap.is_leaf,
    )


def extremes(snap):
    """(max, min) displacement over the particles alive at the horizon."""
    pos = snap.positions
    return float(pos.max()), float(pos.min())


def mrca_time(snap, u, v):
    """Most recent common ancestor time of alive particles u and v: the
    branch time at which their ancestral paths separate.  Returns the
    horizon for u == v (degenerate case, by convention)."""
    u = int(u)
    v = int(v)
    for w in (u, v):
        if not 0 <= w < snap.parent.size:
            raise KeyError(f"unknown node id {w}")
        if not snap.is_leaf[w]:
            raise ValueError(f"node {w} is not alive at the horizon")
    if u == v:
        return float(snap.horizon)
    ancestors = {}
    node = u
    while node != -1:
        ancestors[node] = True
        node = int(snap.parent[node])
    node = v
    while node != -1:
        if node in ancestors:
            return float(snap.split_time[node])
        node = int(snap.parent[node])
    raise ValueError(f"particles {u} and {v} share no ancestor")


def cluster_members(snap, a, f: Callable[[float], float]):
    """Alive particles with position in [a t - f(t), a t + f(t)].

    Windows around speed |a| < sqrt(2) are eventually populated; at the
    critical speed the width must be at least (log t)/(2 sqrt 2) for the
    window to stay non-empty, so narrower critical windows are rejected.
    """
    t = snap.horizon
    width = float(f(t))
    if width < 0:
        raise ValueError(f"window width must be >= 0, got {width}")
    if abs(a) > SQRT2 + 1e-12:
        raise ValueError(f"cluster speed must satisfy |a| <= sqrt(2), got {a}")
    if abs(abs(a) - SQRT2) <= 1e-12 and t > 1.0 and width < log(t) / (2.0 * SQRT2):
        raise ValueError(
            f"critical-speed window needs f(t) >= log(t)/(2 sqrt 2) = {log(t) / (2.0 * SQRT2):.6g}"
        )
    ids = snap.particle_ids
    pos = snap.positions
    keep = np.abs(pos - a * t) <= width
    return set(int(i) for i in ids[keep])


@dataclass(frozen=True)
class BarrierSpec:
    """Barrier geometry for the census at horizon t with offset y.

    slope:      sqrt(2) - (3/(2 sqrt 2)) (log t)/t + y/t
    straight:   slope*s + 1                     (endpoint box [slope*t - 1, slope*t])
    curved:     slope*s + curve(s) + y + 1      (endpoint box [slope*t - 1, slope*t + y])

    curve() rises like (3/(2 sqrt 2)) log(s+1), falls symmetrically toward the
    horizon, and blends across [t/2-1, t/2+1] with curvature in [-10/t, 0].
    """

    t: float
    y: float

    def __post_init__(self):
        if self.t < 1.0:
            raise ValueError(f"census horizon must be >= 1, got {self.t}")
        if self.y < 0.0:
            raise ValueError(f"offset must be >= 0, got {self.y}")
        if self.y > sqrt(self.t):
            warnings.warn(
                f"offset y={self.y} exceeds sqrt(t)={sqrt(self.t):.4g}; outside the "
                "stated envelope range, computing anyway",
                stacklevel=2,
            )

    @property
    def slope(self) -> float:
        return SQRT2 - LOG_COEFF * log(self.t) / self.t + self.y / self.t

    def curve(self, s):
        return barrier_curve(s, self.t)

    def straight_value(self, s):
        return self.slope * np.asarray(s) + 1.0

    def curved_value(self, s):
        return self.slope * np.asarray(s) + self.curve(s) + self.y + 1.0

    @property
    def box(self):
        return (self.slope * self.t - 1.0, self.slope * self.t + self.y)


def barrier_census_multi(
    t, y_values, stream, dt_path=1e-2, reflected=True, guard=DEFAULT_GUARD
):
    """One replicate, monitored simultaneously against the straight and the
    curved barrier for every offset in y_values (shared particle paths).

    Returns (h_counts, gamma_counts, n_particles) with one entry per offset.
    """
    if dt_path <= 0:
        raise ValueError(f"dt_path must be > 0, got {dt_path}")
    specs = [BarrierSpec(float(t), float(y)) for y in y_values]
    slopes, offsets, curved, box_lo, box_hi = [], [], [], [], []
    for spec in specs:
        lo, hi = spec.box
        slopes += [spec.slope, spec.slope]
        offsets += [1.0, spec.y + 1.0]
        curved += [0, 1]
        box_lo += [lo, lo]
        box_hi += [lo + 1.0, hi]
    counts, n_leaves = kernels.census_waves(
        stream.generator,
        float(t),
        float(dt_path),
        np.array(slopes),
        np.array(offsets),
        np.array(curved, dtype=np.uint8),
        np.array(box_lo),
        np.array(box_hi),
        bool(reflected),
        int(guard),
    )
    return counts[0::2].copy(), counts[1::2].copy(), n_leaves


def barrier_census(t, y, stream, dt_path=1e-2, reflected=True, guard=DEFAULT_GUARD):
    """Counting statistics (H, Gamma) of one replicate: particles that stayed
    below the straight (resp. curved) barrier for their whole ancestry and
    end in the corresponding box."""
    h, g, _ = barrier_census_multi(t, [y], stream, dt_path, reflected, guard)
    return int(h[0]), int(g[0])


def pair_covariance_sample(snap, n_pairs, stream, deep_fraction=0.5):
    """Sampled distinct alive pairs (u, v): returns the arrays
    (mrca times Q(u, v), endpoint products X_u X_v).

    Pairs are selected from the genealogy alone, so conditionally on the tree
    the product has expectation exactly Q whatever the sampling design;
    ``deep_fraction`` of the pairs couple a uniform particle with a particle
    from its parent's other clade (late ancestors), which widens the spread
    of Q and sharpens the covariance regression at no cost in bias.
    """
    ids = snap.particle_ids
    n = ids.size
    if n < 2:
        raise ValueError("need at least 2 alive particles to sample pairs")
    gen = stream.generator
    n_deep = int(round(n_pairs * deep_fraction))

    first_child = {}
    second_child = {}
    for node in range(snap.parent.size):
        p = int(snap.parent[node])
        if p < 0:
            continue
        if p not in first_child:
            first_child[p] = node
        else:
            second_child[p] = node

    def leftmost_leaf(node):
        while not snap.is_leaf[node]:
            node = first_child[node]
        return node

    qs = np.empty(n_pairs)
    prods = np.empty(n_pairs)
    pos = snap.positions
    pos_of = {int(i): p for i, p in zip(ids, pos)}
    made = 0
    for _ in range(n_deep):
        u = int(ids[int(gen.integers(0, n))])
        # climb to the nearest ancestor with two children (continuation
        # nodes from nested horizons have one)
        node = u
        p = int(snap.parent[node])
        while p >= 0 and p not in second_child:
            node = p
            p = int(snap.parent[node])
        if p < 0:
            continue  # no branching ancestor: u spans the whole root segment
        sibling = second_child[p] if first_child[p] == node else first_child[p]
        v = leftmost_leaf(sibling)
        qs[made] = snap.split_time[p]
        prods[made] = pos_of[u] * pos_of[v]
        made += 1
    while made < n_pairs:
        i = int(gen.integers(0, n))
        j = int(gen.integers(0, n - 1))
        if j >= i:
            j += 1
        qs[made] = mrca_time(snap, ids[i], ids[j])
        prods[made] = pos[i] * pos[j]
        made += 1
    return qs[:made], prods[:made]


def export_snapshots(snapshots, path):
    """Write genealogies as columnar CSV records.

    ``snapshots`` is an iterable of (replicate_id, PopulationSnapshot);
    columns: replicate_id, particle_id, parent_id, birth_time, split_time,
    endpoint_position.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "replicate_id",
                "particle_id",
                "parent_id",
                "birth_time",
                "split_time",
                "endpoint_position",
            ]
        )
        for rep_id, snap in snapshots:
            for i in range(snap.parent.size):
                writer.writerow(
                    [
                        rep_id,
                        i,
                        int(snap.parent[i]),
                        repr(float(snap.birth_time[i])),
                        repr(float(snap.split_time[i])),
                        repr(float(snap.endpoint_position[i])),
                    ]
                )
