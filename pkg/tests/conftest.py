"""Session fixtures for the acceptance suite: the heavy Monte Carlo runs are
shared across criteria.  All seeds are fixed constants; every number the
acceptance tests check is a deterministic function of them."""

import numpy as np
import pytest

from brbm.stochastic import RngStream
from brbm import branching as br


@pytest.fixture(scope="session")
def frontier_data():
    """500 replicates per horizon in {6, 8, 10, 12}, one stream per
    (horizon, replicate) cell: per-replicate (max, min) for both systems."""
    import time

    t0 = time.perf_counter()
    seed = 42
    horizons = [6.0, 8.0, 10.0, 12.0]
    reps = 500
    out = {}
    for pi, t in enumerate(horizons):
        mx = np.empty(reps)
        mn = np.empty(reps)
        for r in range(reps):
            snap = br.simulate_bbm(t, RngStream(seed, pi * reps + r))
            mx[r], mn[r] = br.extremes(snap)
        out[t] = (mx, mn)
    out["elapsed"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def dominance_data():
    """Coupled signed/reflected extremes: 10^4 replicates at t=6 plus 800 at
    t=12 for the gap comparison."""
    data = {}
    for t, reps, seed in ((6.0, 10_000, 246), (12.0, 800, 357)):
        mx = np.empty(reps)
        mn = np.empty(reps)
        rmx = np.empty(reps)
        for r in range(reps):
            snap = br.simulate_bbm(t, RngStream(seed, r))
            mx[r], mn[r] = br.extremes(snap)
            rmx[r], _ = br.extremes(br.reflect_population(snap))
        data[t] = (mx, mn, rmx)
    return data


@pytest.fixture(scope="session")
def dependence_data():
    out = {}
    for t, seed in ((4.0, 1042), (10.0, 2042)):
        pairs = np.empty((2000, 2))
        for r in range(2000):
            snap = br.simulate_bbm(t, RngStream(seed, r))
            pairs[r] = br.extremes(snap)
        out[t] = pairs
    return out


@pytest.fixture(scope="session")
def census_data():
    """2000 census replicates at t=8 monitoring y in {0,1,2,3} on shared
    paths; provides both the straight-barrier and curved-barrier counts."""
    reps = 2000
    y_values = [0.0, 1.0, 2.0, 3.0]
    H = np.empty((reps, 4))
    G = np.empty((reps, 4))
    with pytest.warns(UserWarning):  # y=3 exceeds sqrt(8), computed anyway
        for r in range(reps):
            h, g, _ = br.barrier_census_multi(8.0, y_values, RngStream(579, r))
            H[r] = h
            G[r] = g
    return np.asarray(y_values), H, G


@pytest.fixture(scope="session")
def population_counts():
    """10^5 replicate population sizes at t=1 plus means at t in {2, 4}."""
    counts1 = np.empty(100_000, dtype=np.int64)
    for r in range(100_000):
        counts1[r] = br.simulate_bbm(1.0, RngStream(808, r)).n_particles
    others = {}
    for t, reps, seed in ((2.0, 3000, 812), (4.0, 1500, 814)):
        c = np.empty(reps)
        for r in range(reps):
            c[r] = br.simulate_bbm(t, RngStream(seed, r)).n_particles
        others[t] = c
    return counts1, others
