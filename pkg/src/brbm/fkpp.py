"""Finite-difference solvers for the reaction-diffusion system behind the
frontier laws: u_t = (1/2) u_xx + u^2 - u on the line with a Heaviside jump
(the cumulative law of the signed maximum), and the half-line variant in the
starting point with a Neumann wall at the origin (the reflected system's
cumulative law).  Includes front tracking, the renewal-equation residual and
the centered-profile comparison probe.

Stepping is semi-implicit: diffusion by backward Euler (one tridiagonal solve
per step, unconditionally stable), reaction explicit.  For dt <= 1 the
explicit reaction map keeps [0, 1] invariant, so the solution stays a CDF in
space without any clamping; the solver checks this instead of forcing it.
"""

import csv
from dataclasses import dataclass
from math import exp, sqrt

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import solve_banded

from .errors import NumericalError
from .stochastic import gaussian_cdf

__all__ = [
    "Grid1D",
    "FieldState",
    "FieldHistory",
    "HalflineFamily",
    "solve_fkpp_line",
    "solve_fkpp_halfline",
    "solve_halfline_family",
    "front_position",
    "front_trajectory",
    "export_fields",
    "export_front_trajectory",
    "renewal_residuals",
    "renewal_residual",
    "profile_convergence",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform space-time grid; dt <= 1 is the stability contract of the
    explicit reaction step (the map u -> u + dt (u^2 - u) preserves [0,1]
    exactly when dt <= 1)."""

    lo: float
    hi: float
    dx: float
    dt: float
    T: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"need hi > lo, got [{self.lo}, {self.hi}]")
        if self.dx <= 0:
            raise ValueError(f"dx must be > 0, got {self.dx}")
        if self.T <= 0:
            raise ValueError(f"T must be > 0, got {self.T}")
        if not 0 < self.dt <= 1.0:
            raise ValueError(
                f"dt must lie in (0, 1] for the explicit reaction step, got {self.dt}"
            )

    @property
    def n_nodes(self) -> int:
        return int(round((self.hi - self.lo) / self.dx)) + 1

    def nodes(self) -> np.ndarray:
        return self.lo + self.dx * np.arange(self.n_nodes)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass(frozen=True)
class FieldState:
    """Solution values on the grid nodes at one time."""

    time: float
    values: np.ndarray
    grid: Grid1D
    variant: str  # "line" | "halfline"
    x_shift: float = 0.0


@dataclass(frozen=True)
class FieldHistory:
    """Fields stored every ``store_dt`` time units (plus t = 0 and t = T)."""

    grid: Grid1D
    variant: str
    x_shift: float
    times: np.ndarray
    values: np.ndarray  # (n_times, n_nodes)

    def state(self, t) -> FieldState:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise ValueError(f"time {t} not stored (nearest is {self.times[i]})")
        return FieldState(
            time=float(self.times[i]),
            values=self.values[i],
            grid=self.grid,
            variant=self.variant,
            x_shift=self.x_shift,
        )

    @property
    def final(self) -> FieldState:
        return FieldState(
            time=float(self.times[-1]),
            values=self.values[-1],
            grid=self.grid,
            variant=self.variant,
            x_shift=self.x_shift,
        )


def _implicit_bands(n_interior, c, neumann_left=False):
    ab = np.zeros((3, n_interior))
    ab[0, 1:] = -c
    ab[1, :] = 1.0 + 2.0 * c
    ab[2, :-1] = -c
    if neumann_left:
        ab[0, 1] = -2.0 * c  # ghost-node closure: mirror node folds into the superdiagonal
    return ab

def _check_range(u, t):
    lo = u.min()
    hi = u.max()
    if lo < -1e-12 or hi > 1.0 + 1e-12:
        raise NumericalError(f"solution left [0, 1] at t={t:.6g}: min={lo:.3e}, max={hi:.3e}")


def _store_stride(grid, store_dt):
    if store_dt is None:
        return grid.n_steps  # store only t=0 and t=T
    stride = max(1, int(round(store_dt / grid.dt)))
    return stride


def solve_fkpp_line(grid: Grid1D, jump_position=0.0, store_dt=None, initial=None) -> FieldHistory:
    """Heaviside data with the jump on a node, cell-averaged: u = 1 above the
    jump node, 0.5 on it, 0 below.  The average places the effective jump at
    the node itself for every dx, so refining the grid does not translate the
    front (a value-1 jump node would shift it by dx/2).

    ``initial`` overrides the data with explicit node values (used for the
    constant-equilibria checks).  The Dirichlet pins at lo/hi carry the
    initial end values; the solver raises when the front gets close enough
    to either edge to feel it.
    """
    x = grid.nodes()
    n = x.size
    if initial is not None:
        u = np.asarray(initial, dtype=float).copy()
        if u.shape != (n,):
            raise ValueError(f"initial must have {n} node values")
    else:
        j = int(np.argmin(np.abs(x - jump_position)))
        u = np.zeros(n)
        u[j] = 0.5
        u[j + 1 :] = 1.0
        if u[0] != 0.0 or u[-1] != 1.0:
            raise ValueError("grid does not bracket the initial jump")
    heaviside_data = initial is None

    c = 0.5 * grid.dt / (grid.dx * grid.dx)
    ab = _implicit_bands(n - 2, c)
    stride = _store_stride(grid, store_dt)

    times = [0.0]
    stored = [u.copy()]
    for step in range(grid.n_steps):
        rhs = u[1:-1] + grid.dt * (u[1:-1] ** 2 - u[1:-1])
        rhs[0] += c * u[0]
        rhs[-1] += c * u[-1]
        u[1:-1] = solve_banded((1, 1), ab, rhs)
        t = (step + 1) * grid.dt
        _check_range(u, t)
        if heaviside_data and (u[5] > 1e-2 or u[-6] < 1.0 - 1e-2):
            raise NumericalError(
                f"front reached the domain edge at t={t:.6g} "
                f"(u[lo+5dx]={u[5]:.3e}, u[hi-5dx]={u[-6]:.6f}); enlarge the grid"
            )
        if (step + 1) % stride == 0 or step == grid.n_steps - 1:
            times.append(t)
            stored.append(u.copy())

    return FieldHistory(
        grid=grid,
        variant="line",
        x_shift=0.0,
        times=np.asarray(times),
        values=np.asarray(stored),
    )


def solve_fkpp_halfline(grid: Grid1D, x_shift, store_dt=None) -> FieldHistory:
    """Reflected-system field in the starting point y on [0, hi]: data
    H(x_shift - y), Neumann wall at y = 0, far Dirichlet at hi.

    The far pin equals the initial far value (1 when x_shift >= hi, else 0),
    so both constant equilibria are reproduced exactly.
    """
    if grid.lo != 0.0:
        raise ValueError(f"half-line grid must start at 0, got lo={grid.lo}")
    if x_shift < 0:
        raise ValueError(f"x_shift must be >= 0, got {x_shift}")
    history = solve_halfline_family(grid, [x_shift], store_dt=store_dt)
    return FieldHistory(
        grid=grid,
        variant="halfline",
        x_shift=float(x_shift),
        times=history.times,
        values=history.values[:, 0, :],
    )


@dataclass(frozen=True)
class HalflineFamily:
    """Half-line solves for a family of threshold values x (shared grid and
    matrix; one tridiagonal factorization serves every x per step)."""

    grid: Grid1D
    x_shifts: np.ndarray
    times: np.ndarray
    values: np.ndarray  # (n_times, n_x_shifts, n_nodes)

    def at_time(self, t):
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise ValueError(f"time {t} not stored (nearest is {self.times[i]})")
        return self.values[i]

    def threshold_profile(self, t, y):
        """u^R(t, x, y) over the x family at starting point y (grid node)."""
        j = int(round(y / self.grid.dx))
        if not 0 <= j < self.grid.n_nodes or abs(self.grid.nodes()[j] - y) > 1e-9:
            raise ValueError(f"y={y} is not a grid node")
        return self.at_time(t)[:, j]


def solve_halfline_family(grid: Grid1D, x_shifts, store_dt=None) -> HalflineFamily:
    if grid.lo != 0.0:
        raise ValueError(f"half-line grid must start at 0, got lo={grid.lo}")
    y = grid.nodes()
    n = y.size
    xs = np.asarray(x_shifts, dtype=float)
    if np.any(xs < 0):
        raise ValueError("x_shift values must be >= 0")

    # initial data H(x - y) per column with the cell-averaged jump node (see
    # solve_fkpp_line); x below half a cell means the a.e.-zero data, so the
    # zero equilibrium is exact; far pin = initial far value
    U = (y[None, :] < xs[:, None] - 1e-12).astype(float)
    on_jump = (np.abs(y[None, :] - xs[:, None]) <= 1e-12) & (xs[:, None] >= 0.5 * grid.dx)
    U[on_jump] = 0.5
    far = U[:, -1].copy()

    c = 0.5 * grid.dt / (grid.dx * grid.dx)
    ab = _implicit_bands(n - 1, c, neumann_left=True)
    stride = _store_stride(grid, store_dt)

    times = [0.0]
    stored = [U.copy()]
    for step in range(grid.n_steps):
        inner = U[:, :-1]
        rhs = inner + grid.dt * (inner**2 - inner)
        rhs[:, -1] += c * far
        U[:, :-1] = solve_banded((1, 1), ab, rhs.T).T
        t = (step + 1) * grid.dt
        _check_range(U, t)
        moving = (far == 0.0) & (U[:, -6] > 1e-2)
        if np.any(moving):
            raise NumericalError(
                f"half-line field reached the far edge at t={t:.6g} for "
                f"x_shift={xs[moving][0]:.6g}; enlarge the grid"
            )
        if (step + 1) % stride == 0 or step == grid.n_steps - 1:
            times.append(t)
            stored.append(U.copy())

    return HalflineFamily(
        grid=grid,
        x_shifts=xs,
        times=np.asarray(times),
        values=np.asarray(stored),
    )


def front_position(field: FieldState, level=0.5):
    """Unique level crossing of a spatially monotone field, by linear
    interpolation between the bracketing nodes."""
    u = field.values
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    increasing = u[-1] >= u[0]
    v = u if increasing else u[::-1]
    if not (v.min() < level < v.max()):
        raise ValueError(f"level {level} not bracketed by the field")
    i = int(np.searchsorted(v, level))
    x = field.grid.nodes()
    if not increasing:
        frac = (level - v[i - 1]) / (v[i] - v[i - 1])
        pos_rev = (i - 1) + frac
        return float(x[-1] - field.grid.dx * pos_rev)
    frac = (level - v[i - 1]) / (v[i] - v[i - 1])
    return float(x[i - 1] + field.grid.dx * frac)


def export_fields(history: FieldHistory, path, stride=1):
    """Write stored fields as columnar (t, x, u) CSV records; ``stride``
    thins the stored times (the final field is always included)."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    x = history.grid.nodes()
    keep = sorted(set(range(0, history.times.size, stride)) | {history.times.size - 1})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "u"])
        for i in keep:
            t = history.times[i]
            for xv, uv in zip(x, history.values[i]):
                writer.writerow([repr(float(t)), repr(float(xv)), repr(float(uv))])


def export_front_trajectory(history: FieldHistory, path, level=0.5):
    """Write the level-crossing trajectory as (t, front) CSV records."""
    ts, fs = front_trajectory(history, level)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "front"])
        for t, f in zip(ts, fs):
            writer.writerow([repr(float(t)), repr(float(f))])


def front_trajectory(history: FieldHistory, level=0.5, t_min=None, t_max=None):
    """(times, front positions) over the stored fields straddling the level."""
    ts, fs = [], []
    for i, t in enumerate(history.times):
        if t_min is not None and t < t_min - 1e-9:
            continue
        if t_max is not None and t > t_max + 1e-9:
            continue
        state = FieldState(
            time=float(t),
            values=history.values[i],
            grid=history.grid,
            variant=history.variant,
            x_shift=history.x_shift,
        )
        try:
            fs.append(front_position(state, level))
        except ValueError:
            continue
        ts.append(float(t))
    return np.asarray(ts), np.asarray(fs)


def _reflected_kernel_row(y, s, z):
    """p^R(0, y; s, z) on the z grid (vectorized image-method kernel)."""
    return (
        np.exp(-((z - y) ** 2) / (2.0 * s)) + np.exp(-((z + y) ** 2) / (2.0 * s))
    ) / sqrt(2.0 * np.pi * s)


def renewal_residuals(history: FieldHistory, sample_points):
    """Mismatch between the stored half-line solution and its renewal form

        u(t, x, y) = e^{-t} Int p^R(0,y;t,z) H(x-z) dz
                   + Int_0^t e^{-s} Int p^R(0,y;s,z) u(t-s, x, z)^2 dz ds

    evaluated by trapezoid quadrature over the stored time grid (the s -> 0
    endpoint is the pointwise limit u(t, x, y)^2).  Sample points must lie on
    the stored time grid and the spatial grid.
    """
    if history.variant != "halfline":
        raise ValueError("renewal residual is defined for half-line histories")
    grid = history.grid
    z = grid.nodes()
    x = history.x_shift
    out = []
    for (t, xq, yq) in sample_points:
        if abs(xq - x) > 1e-9:
            raise ValueError(f"sample x={xq} does not match history x_shift={x}")
        it = int(np.argmin(np.abs(history.times - t)))
        if abs(history.times[it] - t) > 1e-9:
            raise ValueError(f"sample time {t} not stored")
        jy = int(round(yq / grid.dx))
        if not 0 <= jy < grid.n_nodes or abs(z[jy] - yq) > 1e-9:
            raise ValueError(f"sample y={yq} is not a grid node")
        t = float(history.times[it])
        spacings = np.diff(history.times[: it + 1])
        if spacings.size and not np.allclose(spacings, spacings[0], rtol=0, atol=1e-9):
            raise ValueError("stored time grid must be uniform up to the sample time")

        free = exp(-t) * (
            gaussian_cdf((x - yq) / sqrt(t)) + gaussian_cdf((x + yq) / sqrt(t)) - 1.0
        )

        s_times = history.times[: it + 1]
        integrand = np.empty(s_times.size)
        for k, s in enumerate(s_times):
            if s == 0.0:
                integrand[k] = history.values[it, jy] ** 2
                continue
            iu = it - k  # u(t - s) on the shared uniform store grid
            usq = history.values[iu] ** 2
            kernel = _reflected_kernel_row(yq, s, z)
            integrand[k] = exp(-s) * np.trapezoid(kernel * usq, dx=grid.dx)
        nonlinear = (
            float(simpson(integrand, x=s_times)) if s_times.size >= 3 else np.trapezoid(integrand, s_times)
        )

        out.append(abs(history.values[it, jy] - (free + nonlinear)))
    return np.asarray(out)


def renewal_residual(history: FieldHistory, sample_points):
    """Max renewal mismatch over the sample points."""
    return float(renewal_residuals(history, sample_points).max())


def profile_convergence(family: HalflineFamily, y_pair, times, delta=0.5, xi_half_width=4.0):
    """Sup distance between delta-front-centered threshold profiles for two
    starting points, at each requested time.

    Profiles x -> u^R(t, x, y) are centered at their own delta-front and
    compared on a common window; entries are NaN while a front has not yet
    formed (level not bracketed).
    """
    y0, y1 = y_pair
    dxs = family.x_shifts[1] - family.x_shifts[0]
    out = []
    for t in times:
        fronts = []
        ok = True
        for yy in (y0, y1):
            prof = family.threshold_profile(t, yy)
            if not (prof.min() < delta < prof.max()):
                ok = False
                break
            fronts.append(float(np.interp(delta, prof, family.x_shifts)))
        if ok:
            # compare on the widest window both centered profiles cover
            xi_lo = max(-xi_half_width, family.x_shifts[0] - min(fronts))
            xi_hi = min(xi_half_width, family.x_shifts[-1] - max(fronts))
            ok = xi_hi - xi_lo >= 1.0
        if not ok:
            out.append((float(t), float("nan")))
            continue
        xi = np.arange(xi_lo, xi_hi + 1e-9, dxs)
        profiles = [
            np.interp(q + xi, family.x_shifts, family.threshold_profile(t, yy))
            for q, yy in zip(fronts, (y0, y1))
        ]
        dist = float(np.max(np.abs(profiles[0] - profiles[1])))
        out.append((float(t), dist))
    return out
