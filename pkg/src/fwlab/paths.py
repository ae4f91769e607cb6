"""Discrete path containers and path surgery.

Paths live on uniform time grids and are interpreted as piecewise-linear
interpolants of their nodes, the computational stand-in for the absolutely
continuous finite-action class.  The operations here are the building blocks
the variational and Monte Carlo layers share: periodization with its single
wrap jump, cyclic translation, mollification by a compactly supported bump,
the continuity modulus, and affine bridges.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

Array = np.ndarray


def _frozen(arr: Array) -> Array:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, horizon] with n_steps steps (n_steps + 1 nodes)."""

    horizon: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 2:
            raise InvalidArgumentError("a time grid needs at least 2 steps")
        if not (self.horizon > 0 and np.isfinite(self.horizon)):
            raise InvalidArgumentError("horizon must be positive and finite")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def times(self) -> Array:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)


@dataclass(frozen=True)
class DiscretePath:
    """Nodes X_0 .. X_N of a path on a uniform grid, shape (N + 1, n)."""

    grid: TimeGrid
    nodes: Array

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, np.newaxis]
        if nodes.shape[0] != self.grid.n_steps + 1:
            raise InvalidArgumentError(
                f"expected {self.grid.n_steps + 1} nodes, got {nodes.shape[0]}"
            )
        if not np.all(np.isfinite(nodes)):
            raise InvalidArgumentError("path nodes must be finite")
        object.__setattr__(self, "nodes", _frozen(nodes))

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def times(self) -> Array:
        return self.grid.times()

    @classmethod
    def from_function(cls, grid: TimeGrid, fn) -> "DiscretePath":
        t = grid.times()
        vals = np.asarray([fn(ti) for ti in t], dtype=float)
        return cls(grid=grid, nodes=vals)


@dataclass(frozen=True)
class PeriodicPath:
    """A closed path of period S; node N coincides with node 0 exactly.

    ``nodes`` stores the open representation (N rows); ``closed_nodes``
    appends the repeated first row.
    """

    period: float
    nodes: Array

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, np.newaxis]
        if nodes.shape[0] < 2:
            raise InvalidArgumentError("a periodic path needs at least 2 nodes")
        if not (self.period > 0 and np.isfinite(self.period)):
            raise InvalidArgumentError("period must be positive and finite")
        if not np.all(np.isfinite(nodes)):
            raise InvalidArgumentError("path nodes must be finite")
        object.__setattr__(self, "nodes", _frozen(nodes))

    @property
    def n_steps(self) -> int:
        return self.nodes.shape[0]

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def dt(self) -> float:
        return self.period / self.n_steps

    @property
    def closed_nodes(self) -> Array:
        return np.vstack([self.nodes, self.nodes[:1]])

    def one_period(self) -> DiscretePath:
        """The closed single-period path as a DiscretePath on [0, S]."""
        return DiscretePath(
            grid=TimeGrid(self.period, self.n_steps), nodes=self.closed_nodes
        )

    @classmethod
    def from_closed(cls, path: DiscretePath, tol: float = 0.0) -> "PeriodicPath":
        """Build from a closed DiscretePath; endpoints are snapped to X_0."""
        gap = np.linalg.norm(path.nodes[-1] - path.nodes[0])
        scale = max(1.0, float(np.max(np.abs(path.nodes))))
        if gap > tol * scale:
            raise InvalidArgumentError(
                f"path is not closed: |X_0 - X_N| = {gap:g} exceeds tolerance"
            )
        return cls(period=path.grid.horizon, nodes=path.nodes[:-1])

    def value(self, t) -> Array:
        """Periodized piecewise-linear value at arbitrary times."""
        t = np.asarray(t, dtype=float)
        local = np.mod(t, self.period)
        idx = np.minimum((local / self.dt).astype(int), self.n_steps - 1)
        frac = local / self.dt - idx
        closed = self.closed_nodes
        return (1.0 - frac[..., np.newaxis]) * closed[idx] + frac[
            ..., np.newaxis
        ] * closed[idx + 1]

    def velocity_nodes(self) -> Array:
        """Centered-difference velocity at the nodes, with wrap-around."""
        fwd = np.roll(self.nodes, -1, axis=0)
        bwd = np.roll(self.nodes, 1, axis=0)
        return (fwd - bwd) / (2.0 * self.dt)


@dataclass(frozen=True)
class HolonomicMeasure:
    """Translation-invariant path measure carried by one closed periodic path.

    Finite representative of the measure obtained by averaging a closed
    S-periodic path over its own translates.
    """

    path: PeriodicPath

    @property
    def period(self) -> float:
        return self.path.period


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def periodize(path: DiscretePath, t: float):
    """Value of the T-periodization at time t, plus the wrap jump X_0 - X_T.

    The periodized path repeats the window [0, T) over the whole line, so it
    is continuous except at multiples of T where it jumps by X_0 - X_T.
    Values at non-grid times come from linear interpolation.
    """
    t = float(t)
    if not np.isfinite(t):
        raise InvalidArgumentError("query time must be finite")
    T = path.grid.horizon
    local = t - np.floor(t / T) * T
    dt = path.grid.dt
    idx = min(int(local / dt), path.grid.n_steps - 1)
    frac = local / dt - idx
    value = (1.0 - frac) * path.nodes[idx] + frac * path.nodes[idx + 1]
    jump = path.nodes[0] - path.nodes[-1]
    return value, jump


def translate(p: PeriodicPath, s: float) -> PeriodicPath:
    """Cyclic translation by s, rounded to whole grid steps.

    Rounding keeps the operation an exact group action on the node set:
    translate(p, S) == p and translate composes additively for grid-aligned
    shifts.  (theta_s X)_t = X_{t-s}, so shifting forward in s rolls the
    node array forward.
    """
    k = int(np.round(s / p.dt)) % p.n_steps
    return PeriodicPath(period=p.period, nodes=np.roll(p.nodes, k, axis=0))


def _bump(u: Array) -> Array:
    """Normalized-by-caller polynomial bump (4u(1-u))^3 on (0, 1)."""
    out = np.zeros_like(u)
    inside = (u > 0.0) & (u < 1.0)
    v = u[inside]
    out[inside] = (4.0 * v * (1.0 - v)) ** 3
    return out


def _bump_deriv(u: Array) -> Array:
    out = np.zeros_like(u)
    inside = (u > 0.0) & (u < 1.0)
    v = u[inside]
    out[inside] = 3.0 * (4.0 * v * (1.0 - v)) ** 2 * 4.0 * (1.0 - 2.0 * v)
    return out


def _mollifier_weights(delta: float, dt: float):
    """Discrete smoothing and differentiation kernels on the path grid.

    The smoothing kernel samples a C^2 bump supported in (0, delta) at the
    grid offsets and renormalizes so constants are preserved exactly.  The
    derivative kernel samples the bump derivative and is corrected to
    annihilate constants and reproduce unit slope exactly, the discrete
    analogues of integral 0 and first moment -1.
    """
    m = int(np.ceil(delta / dt)) - 1
    if m < 1:
        raise InvalidArgumentError("mollifier width must cover at least 2 grid steps")
    offsets = np.arange(1, m + 1)
    u = offsets * dt / delta
    w = _bump(u)
    w /= w.sum()
    d = _bump_deriv(u) / delta**2 * dt
    d -= d.mean()
    slope = -np.sum(d * offsets * dt)
    d /= slope
    return offsets, w, d


def mollify(path, delta: float):
    """Smooth a path by convolution with a one-sided bump of width delta.

    Returns ``(smoothed, derivative)``.  For a PeriodicPath the convolution
    is circular and both outputs are periodic; for a DiscretePath the input
    is extended by its edge values, so the first delta-window of the output
    leans on the left edge.  The smoothed value at t is a weighted average
    of the input over (t - delta, t); the derivative output is the matching
    convolution with the bump derivative.
    """
    if isinstance(path, PeriodicPath):
        T = path.period
        dt = path.dt
        if not (0.0 < delta < T / 4.0):
            raise InvalidArgumentError("mollifier width must lie in (0, T/4)")
        offsets, w, d = _mollifier_weights(delta, dt)
        sm = np.zeros_like(path.nodes)
        dv = np.zeros_like(path.nodes)
        for off, wj, dj in zip(offsets, w, d):
            rolled = np.roll(path.nodes, off, axis=0)
            sm += wj * rolled
            dv += dj * rolled
        return (
            PeriodicPath(period=T, nodes=sm),
            PeriodicPath(period=T, nodes=dv),
        )
    if isinstance(path, DiscretePath):
        T = path.grid.horizon
        dt = path.grid.dt
        if not (0.0 < delta < T / 4.0):
            raise InvalidArgumentError("mollifier width must lie in (0, T/4)")
        offsets, w, d = _mollifier_weights(delta, dt)
        n = path.grid.n_steps + 1
        idx = np.arange(n)
        sm = np.zeros_like(path.nodes)
        dv = np.zeros_like(path.nodes)
        for off, wj, dj in zip(offsets, w, d):
            shifted = path.nodes[np.maximum(idx - off, 0)]
            sm += wj * shifted
            dv += dj * shifted
        return (
            DiscretePath(grid=path.grid, nodes=sm),
            DiscretePath(grid=path.grid, nodes=dv),
        )
    raise InvalidArgumentError(f"cannot mollify object of type {type(path)!r}")


def continuity_modulus(path: DiscretePath, delta: float, window=None) -> float:
    """max |X_t - X_s| over grid pairs in the window with |t - s| < delta."""
    if delta <= 0:
        raise InvalidArgumentError("delta must be positive")
    dt = path.grid.dt
    t = path.times()
    if window is None:
        lo, hi = 0.0, path.grid.horizon
    else:
        lo, hi = float(window[0]), float(window[1])
    if lo < -1e-12 or hi > path.grid.horizon + 1e-12 or hi <= lo:
        raise InvalidArgumentError("window must be a nonempty interval inside the grid")
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    nodes = path.nodes[sel]
    if nodes.shape[0] < 2:
        raise InvalidArgumentError("window contains fewer than two grid nodes")
    # largest whole-step separation strictly below delta
    jmax = int(np.ceil(delta / dt - 1e-12)) - 1
    jmax = min(max(jmax, 0), nodes.shape[0] - 1)
    best = 0.0
    for j in range(1, jmax + 1):
        diffs = np.linalg.norm(nodes[j:] - nodes[:-j], axis=1)
        if diffs.size:
            best = max(best, float(np.max(diffs)))
    return best


def affine_bridge(x, y, n_steps: int = 64) -> DiscretePath:
    """Affine interpolation t -> x (1 - t) + y t on the unit interval."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise InvalidArgumentError("endpoints must have the same dimension")
    t = np.linspace(0.0, 1.0, n_steps + 1)[:, np.newaxis]
    return DiscretePath(
        grid=TimeGrid(1.0, n_steps), nodes=(1.0 - t) * x + t * y
    )


def random_periodic_path(
    period: float,
    n_steps: int,
    dim: int,
    scale: float = 1.0,
    center=None,
    seed: int = 0,
    smooth_width: float | None = None,
) -> PeriodicPath:
    """A mollified random closed loop, the generic test and init path.

    White noise at the nodes is smoothed twice by the package mollifier,
    which lands the loop in the discrete finite-action class.
    """
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    nodes = scale * rng.standard_normal((n_steps, dim))
    raw = PeriodicPath(period=period, nodes=nodes)
    width = smooth_width if smooth_width is not None else period / 8.0
    smoothed, _ = mollify(raw, width)
    smoothed, _ = mollify(smoothed, width)
    out = smoothed.nodes
    if center is not None:
        out = out + np.asarray(center, dtype=float)
    return PeriodicPath(period=period, nodes=out)


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------


def path_to_csv(path: DiscretePath) -> str:
    """Serialize a path as CSV with header ``t,x1,...,xn``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [f"x{i + 1}" for i in range(path.dim)])
    for t, row in zip(path.times(), path.nodes):
        writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    return buf.getvalue()


def path_from_csv(text: str) -> DiscretePath:
    """Parse a path serialized by :func:`path_to_csv`."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    if not rows or rows[0][0] != "t":
        raise InvalidArgumentError("path CSV must start with a 't,x1,...' header")
    data = np.asarray([[float(v) for v in r] for r in rows[1:]], dtype=float)
    if data.shape[0] < 3:
        raise InvalidArgumentError("path CSV needs at least 3 rows")
    t = data[:, 0]
    dts = np.diff(t)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=1e-12):
        raise InvalidArgumentError("path CSV must use a uniform time grid")
    grid = TimeGrid(horizon=float(t[-1] - t[0]), n_steps=len(t) - 1)
    return DiscretePath(grid=grid, nodes=data[:, 1:])
