"""Stochastic integration of the model SDE and of its orbit-tracking tilt.

The scheme is Euler-Maruyama for

    dX = b(X) dt + sqrt(2 eps) sigma(X) dW,        sigma sigma^T = a,

and for the non-autonomous tilted equation whose drift relaxes the offset
from a reference closed orbit Y,

    b_tilt(t, x) = -a(x - Y_t) grad U(x - Y_t) + eps (div a)(x - Y_t) + Ydot_t,

with noise factor sigma(x - Y_t).  The log Radon-Nikodym weight of the base
law against the tilted law is accumulated with Ito sums on the grid, so
importance-sampled expectations are unbiased for the simulated chain.

Randomness is counter-based: trajectory i draws from a Philox stream keyed
by (seed, i), so batch results are independent of execution order, chunking
and thread count, and extending a batch reproduces its prefix exactly.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ExplosionError, GridMismatchError, InvalidArgumentError
from .models import DiffusionModel, ScalarPotential
from .paths import DiscretePath, HolonomicMeasure, PeriodicPath, TimeGrid

Array = np.ndarray

_MASK = (1 << 64) - 1


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent Philox stream for trajectory ``index`` under ``seed``."""
    key = np.array([seed & _MASK, index & _MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SimConfig:
    """Noise strength, time grid, stream seed, guard radius and batch size."""

    eps: float
    grid: TimeGrid
    seed: int
    r_max: float = 1e3
    batch: int = 1

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidArgumentError("eps must be positive")
        if not self.r_max > 0:
            raise InvalidArgumentError("r_max must be positive")
        if self.batch < 1:
            raise InvalidArgumentError("batch size must be at least 1")


# ---------------------------------------------------------------------------
# Tilted drift construction
# ---------------------------------------------------------------------------


def _smoothstep(s: Array) -> Array:
    s = np.clip(s, 0.0, 1.0)
    return 10.0 * s**3 - 15.0 * s**4 + 6.0 * s**5


def _smoothstep_d1(s: Array) -> Array:
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    v = s[inside]
    out[inside] = 30.0 * v**2 - 60.0 * v**3 + 30.0 * v**4
    return out


def _smoothstep_d2(s: Array) -> Array:
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    v = s[inside]
    out[inside] = 60.0 * v - 180.0 * v**2 + 120.0 * v**3
    return out


def _blended_cap(model: DiffusionModel, stiffness: float, r1: float, r2: float):
    """Quadratic bowl of the given stiffness, merged into V outside r2.

    U = V + w(|x|) (Q - V) with Q = stiffness |x|^2 / 2 and w a C^2 radial
    partition equal to 1 inside r1 and 0 outside r2.
    """
    V = model.potential
    alpha = float(stiffness)
    span = r2 - r1

    def weight(r):
        return 1.0 - _smoothstep((r - r1) / span)

    def weight_d1(r):
        return -_smoothstep_d1((r - r1) / span) / span

    def weight_d2(r):
        return -_smoothstep_d2((r - r1) / span) / span**2

    def value(x):
        rsq = np.sum(x * x, axis=-1)
        if np.all(rsq <= r1 * r1):
            return 0.5 * alpha * rsq
        r = np.sqrt(rsq)
        q = 0.5 * alpha * rsq
        return V.value(x) + weight(r) * (q - V.value(x))

    def grad(x):
        rsq = np.sum(x * x, axis=-1)
        if np.all(rsq <= r1 * r1):  # inside the bowl the blend is inert
            return alpha * x
        r = np.sqrt(rsq)
        safe = np.maximum(r, 1e-300)
        xhat = x / safe[..., np.newaxis]
        q = 0.5 * alpha * rsq
        dq = alpha * x
        gv = V.grad(x)
        w = weight(r)[..., np.newaxis]
        wp = weight_d1(r)
        return gv + w * (dq - gv) + ((q - V.value(x)) * wp)[..., np.newaxis] * xhat

    def hess(x):
        n = x.shape[-1]
        r = np.linalg.norm(x, axis=-1)
        safe = np.maximum(r, 1e-300)
        xhat = x / safe[..., np.newaxis]
        eye = np.broadcast_to(np.eye(n), x.shape + (n,))
        proj = xhat[..., :, np.newaxis] * xhat[..., np.newaxis, :]
        q = 0.5 * alpha * r * r
        dq = alpha * x
        gv = V.grad(x)
        hv = V.hess(x)
        w = weight(r)[..., np.newaxis, np.newaxis]
        wp = weight_d1(r)
        wpp = weight_d2(r)
        diff = dq - gv
        cross = xhat[..., :, np.newaxis] * diff[..., np.newaxis, :]
        out = hv + w * (alpha * eye - hv)
        out = out + wp[..., np.newaxis, np.newaxis] * (
            cross + np.swapaxes(cross, -1, -2)
        )
        radial = wpp[..., np.newaxis, np.newaxis] * proj + (
            wp / safe
        )[..., np.newaxis, np.newaxis] * (eye - proj)
        return out + (q - V.value(x))[..., np.newaxis, np.newaxis] * radial

    return ScalarPotential(value=value, grad=grad, hess=hess)


@dataclass(frozen=True)
class TiltedDrift:
    """Non-autonomous drift tracking a reference closed orbit.

    Carries the reference path Y, the confining potential U (equal to V
    outside the blend radius) and the base model.  The node velocity of Y
    comes from centered differences with wrap-around.
    """

    model: DiffusionModel
    path: PeriodicPath
    potential: ScalarPotential
    blend_radius: float
    stiffness: float | None = None
    _ydot: PeriodicPath = dataclasses.field(default=None, repr=False)

    def __post_init__(self):
        if self.path.dim != self.model.dim:
            raise GridMismatchError("reference path dimension does not match model")
        ydot = PeriodicPath(
            period=self.path.period, nodes=self.path.velocity_nodes()
        )
        object.__setattr__(self, "_ydot", ydot)

    def reference(self, t) -> Array:
        return self.path.value(t)

    def reference_velocity(self, t) -> Array:
        return self._ydot.value(t)

    def drift(self, t, x, eps: float) -> Array:
        """b_tilt(t, x); ``t`` scalar with ``x`` batched over rows."""
        z = x - self.reference(t)
        a = self.model.diffusion.value(z)
        out = -np.einsum("...ij,...j->...i", a, self.potential.grad(z))
        if not self.model.diffusion.is_constant:
            out = out + eps * self.model.diffusion.divergence(z)
        return out + self.reference_velocity(t)


def build_tilt(
    model: DiffusionModel,
    reference,
    stiffness: float | None = None,
    blend=(2.0, 6.0),
) -> TiltedDrift:
    """Assemble the tilted drift for a reference orbit.

    With ``stiffness=None`` the confining potential is V itself whenever V
    has a unique nondegenerate minimum at the origin; otherwise (or when a
    stiffness is requested) a quadratic bowl is merged into V outside the
    blend window.  Construction validates the contract: U equals V outside
    the blend, has its unique minimum at 0 with positive-definite Hessian,
    and is radially increasing on a sample grid.
    """
    if isinstance(reference, HolonomicMeasure):
        reference = reference.path
    if not isinstance(reference, PeriodicPath):
        raise InvalidArgumentError("reference must be a PeriodicPath or HolonomicMeasure")
    origin = np.zeros(model.dim)
    g0 = np.linalg.norm(model.potential.grad(origin))
    h0 = np.linalg.eigvalsh(model.potential.hess(origin))
    v_qualifies = g0 < 1e-10 and np.min(h0) > 0
    if stiffness is None and v_qualifies:
        potential = model.potential
        blend_radius = 0.0
        used_stiffness = None
    else:
        used_stiffness = float(stiffness) if stiffness is not None else 1.0
        potential = _blended_cap(model, used_stiffness, blend[0], blend[1])
        blend_radius = float(blend[1])
        _validate_cap(model, potential, blend[1])
    return TiltedDrift(
        model=model,
        path=reference,
        potential=potential,
        blend_radius=blend_radius,
        stiffness=used_stiffness,
    )


def _validate_cap(model: DiffusionModel, potential: ScalarPotential, r2: float):
    rng = np.random.Generator(np.random.Philox(key=np.array([7, 7], dtype=np.uint64)))
    dirs = rng.standard_normal((16, model.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    outside = dirs * (r2 + 0.5)
    if not np.allclose(
        potential.value(outside), model.potential.value(outside), rtol=1e-12, atol=1e-12
    ):
        raise InvalidArgumentError("blended potential does not match V outside the cap")
    origin = np.zeros(model.dim)
    if np.linalg.norm(potential.grad(origin)) > 1e-10:
        raise InvalidArgumentError("blended potential is not critical at the origin")
    if np.min(np.linalg.eigvalsh(potential.hess(origin))) <= 0:
        raise InvalidArgumentError("blended potential is degenerate at the origin")
    radii = np.linspace(0.05, r2 + 1.0, 80)
    vals = potential.grad(dirs[:, np.newaxis, :] * radii[:, np.newaxis])
    radial = np.einsum("dri,di->dr", vals, dirs)
    if np.min(radial) <= 0:
        raise InvalidArgumentError(
            "blended potential is not radially increasing; lower the stiffness"
        )


# ---------------------------------------------------------------------------
# Batch engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathSummary:
    """Per-trajectory summary emitted by the batch engine."""

    index: int
    endpoint: tuple
    w_strat: float
    log_weight: float | None
    f_avg: float | None
    exploded: bool
    explosion_step: int

    def as_record(self) -> dict:
        return {
            "index": self.index,
            "endpoint": list(self.endpoint),
            "W_value": self.w_strat,
            "exploded": self.exploded,
        }


@dataclass(frozen=True)
class BatchResult:
    summaries: list
    paths: list | None
    n_exploded: int

    @property
    def alive(self) -> list:
        return [s for s in self.summaries if not s.exploded]


def _tilt_tables(tilt: TiltedDrift, grid: TimeGrid):
    t = grid.times()
    return tilt.path.value(t), tilt._ydot.value(t)


_NOISE_BLOCK = 500  # steps of noise generated per call to each stream


def _run_chunk(
    model: DiffusionModel,
    cfg: SimConfig,
    x0: Array,
    indices,
    tilt: TiltedDrift | None,
    tables,
    f,
    burn_in: float,
    keep_paths: bool,
    zero_noise: bool,
):
    n = model.dim
    K = cfg.grid.n_steps
    dt = cfg.grid.dt
    c = len(indices)
    # consecutive standard_normal calls continue each stream, so drawing in
    # step blocks is draw-for-draw identical to one (K, n) call per path
    gens = None if zero_noise else [trajectory_rng(cfg.seed, i) for i in indices]
    noise_block = None
    X = np.tile(np.asarray(x0, dtype=float).reshape(1, n), (c, 1))
    alive = np.ones(c, dtype=bool)
    expl_step = np.full(c, -1, dtype=int)
    w_acc = np.zeros(c)
    mart = np.zeros(c)
    qvar = np.zeros(c)
    f_acc = np.zeros(c)
    f_time = 0.0
    paths = np.empty((c, K + 1, n)) if keep_paths else None
    if keep_paths:
        paths[:, 0] = X
    amp = math.sqrt(2.0 * cfg.eps * dt)
    is_const = model.diffusion.is_constant
    const_sigma = model._chol if is_const else None
    a0 = model.diffusion.value(np.zeros(n)) if is_const else None
    ainv0 = model._ainv if is_const else None
    grad_v = model.potential.grad
    c_val = model.circulation.value
    grad_u = tilt.potential.grad if tilt is not None else None

    def base_drift(x):
        if is_const:
            return c_val(x) - grad_v(x) @ a0.T
        return model.drift(x)

    def gc_vec(x):
        if is_const:
            return c_val(x) @ ainv0.T
        return model.gc_vector(x)

    t = cfg.grid.times()
    for k in range(K):
        j = k % _NOISE_BLOCK
        if j == 0:
            bs = min(_NOISE_BLOCK, K - k)
            if zero_noise:
                noise_block = np.zeros((c, bs, n))
            else:
                noise_block = np.stack([g.standard_normal((bs, n)) for g in gens])
        xi = noise_block[:, j]
        xk = X
        bk = base_drift(xk)
        if tilt is not None:
            z = xk - tables[0][k]
            if is_const:
                drift_used = -(grad_u(z) @ a0.T)
                sig_noise = xi @ const_sigma.T
            else:
                a_z = model.diffusion.value(z)
                drift_used = -np.einsum(
                    "...ij,...j->...i", a_z, grad_u(z)
                ) + cfg.eps * model.diffusion.divergence(z)
                sig_noise = np.einsum(
                    "...ij,...j->...i", np.linalg.cholesky(a_z), xi
                )
            drift_used = drift_used + tables[1][k]
        else:
            drift_used = bk
            if is_const:
                sig_noise = xi @ const_sigma.T
            else:
                sig_noise = np.einsum(
                    "...ij,...j->...i", model.noise_factor(xk), xi
                )
        dX = drift_used * dt + amp * sig_noise
        xn = xk + dX
        bad = alive & (np.sum(xn * xn, axis=1) > cfg.r_max * cfg.r_max)
        any_dead = bool(expl_step.max() >= 0) or bool(bad.any())
        expl_step[bad] = k + 1
        stepping = alive & ~bad
        mid = 0.5 * (xk + xn)
        w_inc = np.sum(gc_vec(mid) * dX, axis=1)
        if tilt is not None:
            delta = drift_used - bk
            if is_const:
                ainv_delta = delta @ ainv0.T
            else:
                ainv_delta = np.einsum("cij,cj->ci", model.a_inv(xk), delta)
            m_inc = np.sum(ainv_delta * (dX - bk * dt), axis=1) / (2.0 * cfg.eps)
            q_inc = np.sum(delta * ainv_delta, axis=1) * dt / (2.0 * cfg.eps)
        fv = None
        if f is not None and t[k] >= burn_in - 1e-12:
            fv = np.asarray(f(xk), dtype=float).reshape(c)
            f_time += dt
        if not any_dead:
            # common path: every trajectory still alive
            w_acc += w_inc
            if tilt is not None:
                mart += m_inc
                qvar += q_inc
            if fv is not None:
                f_acc += fv * dt
            X = xn
        else:
            w_acc[stepping] += w_inc[stepping]
            if tilt is not None:
                mart[stepping] += m_inc[stepping]
                qvar[stepping] += q_inc[stepping]
            if fv is not None:
                f_acc[stepping] += fv[stepping] * dt
            X = np.where(stepping[:, np.newaxis], xn, xk)
        alive = stepping
        if keep_paths:
            paths[:, k + 1] = X
    horizon = cfg.grid.horizon
    summaries = []
    for j, idx in enumerate(indices):
        exploded = expl_step[j] >= 0
        summaries.append(
            PathSummary(
                index=int(idx),
                endpoint=tuple(float(v) for v in X[j]),
                w_strat=float(w_acc[j] / horizon),
                log_weight=(float(-mart[j] + 0.5 * qvar[j]) if tilt is not None else None),
                f_avg=(float(f_acc[j] / f_time) if f is not None and f_time > 0 else None),
                exploded=bool(exploded),
                explosion_step=int(expl_step[j]),
            )
        )
    kept = None
    if keep_paths:
        kept = [
            DiscretePath(grid=cfg.grid, nodes=paths[j].copy()) for j in range(c)
        ]
    return summaries, kept


def batch_simulate(
    model: DiffusionModel,
    cfg: SimConfig,
    x0,
    tilt: TiltedDrift | None = None,
    *,
    keep_paths: bool = False,
    f=None,
    burn_in: float = 0.0,
    threads: int = 1,
    chunk_size: int = 8192,
    zero_noise: bool = False,
) -> BatchResult:
    """Simulate cfg.batch trajectories and stream per-path summaries.

    Trajectory i draws from the (seed, i) Philox stream, so the result is a
    pure function of (config, x0, tilt) regardless of chunking or thread
    count.  Explosions are tallied per path, not fatal to the batch.  Paths
    are only retained with ``keep_paths=True``; otherwise the engine keeps
    running accumulators (endpoint, work observable, tilt log-weight, and
    optionally the time average of ``f`` after ``burn_in``).
    """
    x0 = np.asarray(x0, dtype=float).reshape(model.dim)
    tables = _tilt_tables(tilt, cfg.grid) if tilt is not None else None
    chunks = [
        range(lo, min(lo + chunk_size, cfg.batch))
        for lo in range(0, cfg.batch, chunk_size)
    ]

    def job(chunk):
        return _run_chunk(
            model, cfg, x0, list(chunk), tilt, tables, f, burn_in, keep_paths, zero_noise
        )

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, chunks))
    else:
        results = [job(chunk) for chunk in chunks]
    summaries = [s for part, _ in results for s in part]
    paths = None
    if keep_paths:
        paths = [p for _, part in results for p in part]
    return BatchResult(
        summaries=summaries,
        paths=paths,
        n_exploded=sum(1 for s in summaries if s.exploded),
    )


def euler_maruyama(
    model: DiffusionModel,
    cfg: SimConfig,
    x0,
    *,
    stream_index: int = 0,
    zero_noise: bool = False,
) -> DiscretePath:
    """One trajectory of the base SDE; raises ExplosionError on blow-up."""
    x0 = np.asarray(x0, dtype=float).reshape(model.dim)
    if not np.all(np.isfinite(x0)):
        raise InvalidArgumentError("initial point must be finite")
    cfg1 = dataclasses.replace(cfg, batch=1)
    res = _run_chunk(
        model, cfg1, x0, [stream_index], None, None, None, 0.0, True, zero_noise
    )
    summary = res[0][0]
    if summary.exploded:
        raise ExplosionError(step=summary.explosion_step, radius=cfg.r_max)
    return res[1][0]


def simulate_tilted(
    model: DiffusionModel,
    tilt: TiltedDrift,
    cfg: SimConfig,
    x0,
    *,
    stream_index: int = 0,
    zero_noise: bool = False,
) -> DiscretePath:
    """One trajectory of the tilted SDE; raises ExplosionError on blow-up."""
    x0 = np.asarray(x0, dtype=float).reshape(model.dim)
    cfg1 = dataclasses.replace(cfg, batch=1)
    tables = _tilt_tables(tilt, cfg.grid)
    res = _run_chunk(
        model, cfg1, x0, [stream_index], tilt, tables, None, 0.0, True, zero_noise
    )
    summary = res[0][0]
    if summary.exploded:
        raise ExplosionError(step=summary.explosion_step, radius=cfg.r_max)
    return res[1][0]


def girsanov_log_weight(
    model: DiffusionModel, tilt: TiltedDrift, eps: float, path: DiscretePath
) -> float:
    """log dP/dQ along a path: -M_T + <M>_T / 2 with Ito sums on the grid.

    M is the drift-mismatch martingale (1/2 eps) int a^{-1} (b_tilt - b) .
    (dX - b dt); its quadratic variation uses the same mismatch in the
    a^{-1} metric.  Well-defined for any path on the grid, whichever law
    generated it.
    """
    if path.dim != model.dim:
        raise GridMismatchError("path dimension does not match model")
    if eps <= 0:
        raise InvalidArgumentError("eps must be positive")
    x0 = path.nodes[:-1]
    dx = np.diff(path.nodes, axis=0)
    dt = path.grid.dt
    t = path.times()[:-1]
    y = tilt.path.value(t)
    ydot = tilt._ydot.value(t)
    z = x0 - y
    a_z = model.diffusion.value(z)
    b_tilt = -np.einsum("...ij,...j->...i", a_z, tilt.potential.grad(z)) + ydot
    if not model.diffusion.is_constant:
        b_tilt = b_tilt + eps * model.diffusion.divergence(z)
    b_base = model.drift(x0)
    delta = b_tilt - b_base
    ainv_delta = np.einsum("kij,kj->ki", model.a_inv(x0), delta)
    mart = float(np.einsum("ki,ki->", ainv_delta, dx - b_base * dt)) / (2.0 * eps)
    qvar = float(np.einsum("ki,ki->", delta, ainv_delta)) * dt / (2.0 * eps)
    return -mart + 0.5 * qvar
