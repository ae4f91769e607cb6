"""Empirical rates for work-window events, direct and importance-sampled.

Each record estimates P(W in [q - delta, q + delta]) at one (eps, T) cell
and converts it to an empirical decay rate -(eps/T) log(p).  The direct
estimator counts window hits over independent trajectories; the importance
estimator samples the orbit-tracking tilted dynamics and reweights by the
Girsanov factor, which is unbiased for the same probability.  Zero-hit
cells fall back to the rule-of-three upper bound on p so the reported rate
interval stays finite and honest.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidArgumentError
from .models import DiffusionModel
from .optimize import OptimizerConfig, rate_point
from .paths import TimeGrid
from .simulate import SimConfig, TiltedDrift, batch_simulate, build_tilt

Array = np.ndarray

_Z95 = 1.959963984540054


@dataclass(frozen=True)
class EventSpec:
    """A window event for the work observable or an additive functional.

    ``observable`` is "work" for the Stratonovich work rate, or any batched
    callable f mapping (batch, n) points to (batch,) values, in which case
    the per-path statistic is the time average of f after ``burn_in``.
    ``delta = inf`` is the always-hit sentinel.
    """

    q: float
    delta: float
    observable: object = "work"
    burn_in: float = 0.0

    def __post_init__(self):
        if not self.delta > 0:
            raise InvalidArgumentError("window half-width must be positive")

    def window(self):
        return self.q - self.delta, self.q + self.delta


@dataclass(frozen=True)
class McRecord:
    """One (eps, T) probability estimate with its extracted decay rate."""

    eps: float
    T: float
    q: float
    delta: float
    M: int
    hits: int
    phat: float
    ci_lo: float
    ci_hi: float
    rate: float
    rate_lo: float
    rate_hi: float
    kind: str  # "direct" | "importance"
    valid: bool = True
    ess: float | None = None
    n_exploded: int = 0

    def as_row(self) -> list:
        return [
            self.eps, self.T, self.q, self.delta, self.M, self.hits,
            self.phat, self.ci_lo, self.ci_hi, self.rate, self.rate_lo,
            self.rate_hi, self.kind,
        ]

    def as_record(self) -> dict:
        out = dataclasses.asdict(self)
        return out

    @staticmethod
    def csv_header() -> list:
        return [
            "eps", "T", "q", "delta", "M", "hits", "phat", "ci_lo", "ci_hi",
            "rate", "rate_lo", "rate_hi", "kind",
        ]


def wilson_interval(hits: int, total: int, z: float = _Z95):
    """Wilson score interval for a binomial proportion."""
    if total <= 0:
        raise InvalidArgumentError("need at least one sample")
    p = hits / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    lo = 0.0 if hits == 0 else max(center - half, 0.0)
    hi = 1.0 if hits == total else min(center + half, 1.0)
    return lo, hi


def _rate_with_ci(eps: float, T: float, phat: float, ci_lo: float, ci_hi: float, M: int):
    scale = eps / T
    if phat > 0:
        rate = -scale * math.log(phat)
        rate_lo = -scale * math.log(ci_hi) if ci_hi > 0 else math.inf
        rate_hi = -scale * math.log(ci_lo) if ci_lo > 0 else math.inf
    else:
        # rule of three: p <= 3/M at 95%, so the rate is at least this bound
        rate = math.inf
        rate_lo = -scale * math.log(3.0 / M)
        rate_hi = math.inf
    return rate, rate_lo, rate_hi


def _per_path_values(result, event: EventSpec) -> Array:
    if event.observable == "work":
        return np.asarray([s.w_strat for s in result.alive])
    return np.asarray([s.f_avg for s in result.alive])


def estimate_direct(
    model: DiffusionModel,
    cfgs,
    event: EventSpec,
    M: int | None = None,
    x0=None,
    threads: int = 1,
) -> list:
    """Direct window-hit estimates over a list of (eps, T) configurations."""
    if isinstance(cfgs, SimConfig):
        cfgs = [cfgs]
    records = []
    for cfg in cfgs:
        m = int(M if M is not None else cfg.batch)
        if m < 100:
            raise InvalidArgumentError("direct estimation needs at least 100 samples")
        cfg_m = dataclasses.replace(cfg, batch=m)
        f = None if event.observable == "work" else event.observable
        start = np.zeros(model.dim) if x0 is None else x0
        result = batch_simulate(
            model, cfg_m, start, f=f, burn_in=event.burn_in, threads=threads
        )
        values = _per_path_values(result, event)
        n_eff = len(values)
        if n_eff == 0:
            records.append(
                McRecord(
                    eps=cfg.eps, T=cfg.grid.horizon, q=event.q, delta=event.delta,
                    M=m, hits=0, phat=math.nan, ci_lo=math.nan, ci_hi=math.nan,
                    rate=math.nan, rate_lo=math.nan, rate_hi=math.nan,
                    kind="direct", valid=False, n_exploded=result.n_exploded,
                )
            )
            continue
        lo, hi = event.window()
        hits = int(np.sum((values >= lo) & (values <= hi)))
        phat = hits / n_eff
        ci_lo, ci_hi = wilson_interval(hits, n_eff)
        rate, rate_lo, rate_hi = _rate_with_ci(
            cfg.eps, cfg.grid.horizon, phat, ci_lo, ci_hi, n_eff
        )
        records.append(
            McRecord(
                eps=cfg.eps, T=cfg.grid.horizon, q=event.q, delta=event.delta,
                M=m, hits=hits, phat=phat, ci_lo=ci_lo, ci_hi=ci_hi,
                rate=rate, rate_lo=rate_lo, rate_hi=rate_hi, kind="direct",
                valid=True, n_exploded=result.n_exploded,
            )
        )
    return records


def estimate_importance(
    model: DiffusionModel,
    tilt: TiltedDrift,
    cfg: SimConfig,
    event: EventSpec,
    M: int | None = None,
    x0=None,
    threads: int = 1,
) -> McRecord:
    """Tilted-dynamics estimate of the same window probability.

    Samples the tilted law, weights each path by exp(log dP/dQ), and
    averages weight * indicator; unbiased for the direct probability.  The
    effective sample size of the weighted hits is reported and the record
    is flagged unreliable (valid=False) below 10.
    """
    m = int(M if M is not None else cfg.batch)
    cfg_m = dataclasses.replace(cfg, batch=m)
    start = tilt.path.value(0.0) if x0 is None else x0
    f = None if event.observable == "work" else event.observable
    result = batch_simulate(
        model, cfg_m, start, tilt=tilt, f=f, burn_in=event.burn_in, threads=threads
    )
    alive = result.alive
    values = _per_path_values(result, event)
    logw = np.asarray([s.log_weight for s in alive])
    if len(values) == 0:
        return McRecord(
            eps=cfg.eps, T=cfg.grid.horizon, q=event.q, delta=event.delta, M=m,
            hits=0, phat=math.nan, ci_lo=math.nan, ci_hi=math.nan, rate=math.nan,
            rate_lo=math.nan, rate_hi=math.nan, kind="importance", valid=False,
            n_exploded=result.n_exploded,
        )
    lo, hi = event.window()
    inside = (values >= lo) & (values <= hi)
    hits = int(np.sum(inside))
    n_eff = len(values)
    if hits == 0:
        rate, rate_lo, rate_hi = _rate_with_ci(
            cfg.eps, cfg.grid.horizon, 0.0, 0.0, 0.0, n_eff
        )
        return McRecord(
            eps=cfg.eps, T=cfg.grid.horizon, q=event.q, delta=event.delta, M=m,
            hits=0, phat=0.0, ci_lo=0.0, ci_hi=0.0, rate=rate, rate_lo=rate_lo,
            rate_hi=rate_hi, kind="importance", valid=False, ess=0.0,
            n_exploded=result.n_exploded,
        )
    logw_in = logw[inside]
    log_phat = float(logsumexp(logw_in) - math.log(n_eff))
    log_m2 = float(logsumexp(2.0 * logw_in) - math.log(n_eff))
    phat = math.exp(log_phat)
    var = max(math.exp(log_m2) - phat * phat, 0.0)
    se = math.sqrt(var / n_eff)
    ci_lo = max(phat - _Z95 * se, 0.0)
    ci_hi = phat + _Z95 * se
    ess = float(math.exp(2.0 * log_phat - log_m2) * n_eff)
    rate, rate_lo, rate_hi = _rate_with_ci(
        cfg.eps, cfg.grid.horizon, phat, ci_lo, ci_hi, n_eff
    )
    return McRecord(
        eps=cfg.eps, T=cfg.grid.horizon, q=event.q, delta=event.delta, M=m,
        hits=hits, phat=phat, ci_lo=ci_lo, ci_hi=ci_hi, rate=rate,
        rate_lo=rate_lo, rate_hi=rate_hi, kind="importance",
        valid=bool(ess >= 10.0), ess=ess, n_exploded=result.n_exploded,
    )


@dataclass(frozen=True)
class FtRatioResult:
    """Empirical fluctuation-ratio check between opposite work windows."""

    log_ratio: float
    predicted: float
    record_plus: McRecord
    record_minus: McRecord
    valid: bool

    @property
    def normalized(self) -> float:
        return self.log_ratio / self.predicted if self.predicted else math.nan


def ft_ratio(
    model: DiffusionModel,
    eps: float,
    T: float,
    q: float,
    delta: float,
    M: int,
    dt: float = 0.01,
    seed: int = 0,
    opt_cfg: OptimizerConfig | None = None,
    tilts=None,
    stiffness: float | None = 2.0,
    threads: int = 1,
) -> FtRatioResult:
    """log[p(q window) / p(-q window)] against the predicted q T / eps.

    Both windows are estimated by importance sampling around the minimizing
    orbit of the matching sign (the rare side needs it; using it on both
    sides keeps the comparison symmetric).  Swapping q and -q negates the
    log ratio exactly because the two sides just trade places.
    """
    if q == 0:
        raise InvalidArgumentError("ft_ratio needs a nonzero target q")
    grid = TimeGrid(horizon=T, n_steps=int(round(T / dt)))
    if tilts is None:
        cfg_opt = opt_cfg if opt_cfg is not None else OptimizerConfig(n_nodes=128)
        tilts = []
        for side_q in (q, -q):
            point = rate_point(model, side_q, cfg_opt)
            if point.measure is None:
                raise InvalidArgumentError(f"no minimizing orbit found for q={side_q}")
            tilts.append(build_tilt(model, point.measure, stiffness=stiffness))
    rec = {}
    for side, (side_q, tilt) in enumerate([(q, tilts[0]), (-q, tilts[1])]):
        # seed keyed to the window's sign, so swapping q and -q reuses the
        # exact same estimates and the log ratio flips sign identically
        side_seed = seed if side_q > 0 else seed + 1
        cfg = SimConfig(eps=eps, grid=grid, seed=side_seed, batch=M)
        event = EventSpec(q=side_q, delta=delta)
        rec[side] = estimate_importance(model, tilt, cfg, event, threads=threads)
    valid = rec[0].hits > 0 and rec[1].hits > 0
    if valid:
        log_ratio = math.log(rec[0].phat) - math.log(rec[1].phat)
    else:
        log_ratio = math.nan
    return FtRatioResult(
        log_ratio=log_ratio,
        predicted=q * T / eps,
        record_plus=rec[0],
        record_minus=rec[1],
        valid=valid,
    )


@dataclass(frozen=True)
class OccupationStats:
    values: tuple  # per-path time averages of f
    histogram: Array
    edges: tuple


def occupation_stats(paths, f, bins: int = 20, hist_range=None) -> OccupationStats:
    """Additive-functional averages (1/T) int f(X) dt and a state histogram.

    ``paths`` is a list of DiscretePath on a common grid; f is a batched
    grid function.  The left-endpoint sum makes f = 1 return exactly 1.
    """
    if not paths:
        raise InvalidArgumentError("need at least one path")
    grid = paths[0].grid
    for p in paths:
        if p.grid != grid:
            raise InvalidArgumentError("paths must share one time grid")
    values = []
    all_nodes = []
    for p in paths:
        fx = np.asarray(f(p.nodes[:-1]), dtype=float)
        values.append(float(np.sum(fx) * grid.dt / grid.horizon))
        all_nodes.append(p.nodes)
    stacked = np.concatenate(all_nodes, axis=0)
    hist, edges = np.histogramdd(stacked, bins=bins, range=hist_range)
    return OccupationStats(
        values=tuple(values), histogram=hist, edges=tuple(np.asarray(e) for e in edges)
    )
