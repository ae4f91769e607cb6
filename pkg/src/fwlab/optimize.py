"""Path-space minimization of the action rate and the work rate curve.

The decision variables are the free nodes of one closed period (node 0
identified with node N) plus the period S itself.  The per-period action and
the work rate are differentiated exactly through the midpoint quadrature,
including the drift Jacobian and the derivatives of a^{-1}; correctness of
that gradient against central finite differences is a mandatory oracle in
the test suite.

Three layers sit on top of the node gradient:

* an inner unconstrained solver (gradient descent with backtracking as the
  robust baseline, L-BFGS behind the same interface as the default),
* an augmented-Lagrangian outer loop enforcing the work-rate constraint,
* golden-section search over the period, warm-starting node solutions.

The Legendre side computes the dual function Lambda(lambda) either from a
sampled rate curve (grid conjugation, exact on convex grids) or directly by
a dual scan that minimizes rate - lambda * work per lambda and locates the
divergence boundary of the scan by bisection.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import InvalidArgumentError
from .models import DiffusionModel
from .paths import HolonomicMeasure, PeriodicPath, random_periodic_path

Array = np.ndarray

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class _Diverged(Exception):
    """Raised inside an objective when the iterate leaves the guard ball."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs for the path optimizer.

    ``constraint_tol`` is scaled by max(1, |q|); the contract tested
    downstream is 1e-6, the default aims an order of magnitude lower so the
    fluctuation-symmetry defect of computed curves stays small.
    """

    n_nodes: int = 256
    s0: float = 4.5
    s_min: float = 2.0
    s_max: float = 12.0
    max_inner: int = 1500
    max_outer: int = 30
    gtol: float = 1e-9
    penalty0: float = 10.0
    penalty_growth: float = 5.0
    penalty_max: float = 1e9
    constraint_tol: float = 1e-8
    lambda_grid: tuple = (-1.6, -1.3, -1.0, -0.7, -0.4, -0.1, 0.0, 0.1, 0.15, 0.3, 0.5)
    init_mode: str = "auto"
    init_scale: float = 0.5
    init_center: tuple | None = None
    init_nodes: tuple | None = None
    inner: str = "lbfgs"
    diverge_radius: float = 1e3
    golden_rel_tol: float = 1e-3
    golden_max_eval: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 16:
            raise InvalidArgumentError("need at least 16 nodes")
        if not (0 < self.s_min <= self.s0 <= self.s_max):
            raise InvalidArgumentError("period bracket must satisfy 0 < s_min <= s0 <= s_max")
        if min(self.gtol, self.constraint_tol, self.golden_rel_tol) <= 0:
            raise InvalidArgumentError("tolerances must be positive")
        if self.inner not in ("lbfgs", "gd"):
            raise InvalidArgumentError("inner solver must be 'lbfgs' or 'gd'")


# ---------------------------------------------------------------------------
# Discrete functionals and their exact node gradients
# ---------------------------------------------------------------------------


def _assemble(model: DiffusionModel, z: Array, period: float):
    """Per-period action, work rate, and their gradients on open nodes z.

    Returns (I, grad_I, w, grad_w) where I is the total action over one
    period and w the work rate (already divided by the period).
    """
    n_nodes = z.shape[0]
    dt = period / n_nodes
    z_next = np.roll(z, -1, axis=0)
    d = z_next - z
    mid = 0.5 * (z + z_next)
    v = d / dt
    u = v - model.drift(mid)
    ainv = model.a_inv(mid)
    p = np.einsum("kij,kj->ki", ainv, u)
    total = 0.25 * dt * float(np.einsum("ki,ki->", u, p))
    db = model.drift_jacobian(mid)
    dbt_p = np.einsum("kil,ki->kl", db, p)
    grad_i = 0.5 * (np.roll(p, 1, axis=0) - p)
    grad_i -= 0.25 * dt * (dbt_p + np.roll(dbt_p, 1, axis=0))
    if not model.diffusion.is_constant:
        part = model.diffusion.partials(mid)
        qv = np.einsum("klij,ki,kj->kl", part, p, p)
        grad_i -= 0.125 * dt * (qv + np.roll(qv, 1, axis=0))
    f_mid = model.gc_vector(mid)
    sw = float(np.einsum("ki,ki->", f_mid, d))
    dft_d = np.einsum("kil,ki->kl", model.gc_jacobian(mid), d)
    grad_sw = np.roll(f_mid, 1, axis=0) - f_mid + 0.5 * (
        dft_d + np.roll(dft_d, 1, axis=0)
    )
    return total, grad_i, sw / period, grad_sw / period


def action_gradient(model: DiffusionModel, path: PeriodicPath) -> Array:
    """Exact gradient of the discrete per-period action w.r.t. free nodes."""
    _, grad_i, _, _ = _assemble(model, np.array(path.nodes), path.period)
    return grad_i


def work_rate(model: DiffusionModel, path: PeriodicPath) -> float:
    """Stratonovich work of the circulation field per unit time, one period."""
    _, _, w, _ = _assemble(model, np.array(path.nodes), path.period)
    return w


# ---------------------------------------------------------------------------
# Inner solvers
# ---------------------------------------------------------------------------


@dataclass
class _InnerResult:
    z: Array
    value: float
    grad_norm: float
    n_iter: int
    converged: bool
    diverged: bool
    trace: list


def _minimize_nodes(fun, z0: Array, cfg: OptimizerConfig) -> _InnerResult:
    shape = z0.shape

    def flat_fun(zf):
        val, grad = fun(zf.reshape(shape))
        return val, grad.ravel()

    if cfg.inner == "gd":
        return _gradient_descent(flat_fun, z0.ravel(), shape, cfg)
    try:
        res = scipy.optimize.minimize(
            flat_fun,
            z0.ravel(),
            jac=True,
            method="L-BFGS-B",
            options={
                "maxiter": cfg.max_inner,
                "gtol": cfg.gtol,
                "ftol": 1e-18,
                "maxcor": 20,
            },
        )
    except _Diverged:
        return _InnerResult(z0, math.inf, math.inf, 0, False, True, [])
    grad_norm = float(np.max(np.abs(res.jac)))
    return _InnerResult(
        z=res.x.reshape(shape),
        value=float(res.fun),
        grad_norm=grad_norm,
        n_iter=int(res.nit),
        converged=bool(res.success or grad_norm <= 10 * cfg.gtol),
        diverged=False,
        trace=[],
    )


def _gradient_descent(flat_fun, z: Array, shape, cfg: OptimizerConfig) -> _InnerResult:
    """Backtracking gradient descent; accepted steps never increase the value."""
    try:
        val, grad = flat_fun(z)
    except _Diverged:
        return _InnerResult(z.reshape(shape), math.inf, math.inf, 0, False, True, [])
    step = 1.0
    trace = [val]
    for it in range(cfg.max_inner):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= cfg.gtol:
            return _InnerResult(z.reshape(shape), val, gnorm, it, True, False, trace)
        g2 = float(np.dot(grad, grad))
        while True:
            z_new = z - step * grad
            try:
                val_new, grad_new = flat_fun(z_new)
            except _Diverged:
                return _InnerResult(
                    z.reshape(shape), val, gnorm, it, False, True, trace
                )
            if val_new <= val - 1e-4 * step * g2:
                z, val, grad = z_new, val_new, grad_new
                trace.append(val)
                step *= 1.5
                break
            step *= 0.5
            if step < 1e-18:
                return _InnerResult(
                    z.reshape(shape), val, gnorm, it, False, False, trace
                )
    gnorm = float(np.max(np.abs(grad)))
    return _InnerResult(z.reshape(shape), val, gnorm, cfg.max_inner, False, False, trace)


# ---------------------------------------------------------------------------
# Constrained solves
# ---------------------------------------------------------------------------


@dataclass
class _ConstrainedResult:
    z: Array
    s: float
    multiplier: float
    residual: float
    converged: bool
    infeasible: bool
    diverged: bool
    n_iter: int
    lam_al: float
    trace: list


def _make_objective(model, period, cfg, lam_al, mu, q, lam_dual):
    guard = cfg.diverge_radius

    def fun(z):
        if np.max(np.abs(z)) > guard:
            raise _Diverged
        total, grad_i, w, grad_w = _assemble(model, z, period)
        rate = total / period
        grad = grad_i / period
        val = rate
        if lam_dual != 0.0:
            val -= lam_dual * w
            grad = grad - lam_dual * grad_w
        if mu > 0.0 or lam_al != 0.0:
            r = w - q
            val += lam_al * r + 0.5 * mu * r * r
            grad = grad + (lam_al + mu * r) * grad_w
        return val, grad

    return fun


def _solve_constrained(
    model, z0: Array, period: float, q: float, cfg: OptimizerConfig, lam_al0: float = 0.0
) -> _ConstrainedResult:
    z = np.array(z0)
    lam_al = lam_al0
    mu = cfg.penalty0
    tol = cfg.constraint_tol * max(1.0, abs(q))
    r_prev = math.inf
    stall = 0
    total_iter = 0
    trace: list = []
    best = None
    for _ in range(cfg.max_outer):
        fun = _make_objective(model, period, cfg, lam_al, mu, q, 0.0)
        inner = _minimize_nodes(fun, z, cfg)
        total_iter += inner.n_iter
        trace = inner.trace
        if inner.diverged:
            return _ConstrainedResult(
                z, math.inf, 0.0, math.inf, False, False, True, total_iter, lam_al, trace
            )
        z = inner.z
        total, _, w, grad_w = _assemble(model, z, period)
        r = w - q
        best = (z, total / period, -(lam_al + mu * r), r)
        if abs(r) > tol and np.max(np.abs(grad_w)) <= 1e-10:
            # the work rate is insensitive to the path here: unreachable target
            z_b, s_b, m_b, r_b = best
            return _ConstrainedResult(
                z_b, s_b, m_b, r_b, False, True, False, total_iter, lam_al, trace
            )
        if abs(r) <= tol and inner.converged:
            return _ConstrainedResult(
                z,
                total / period,
                -(lam_al + mu * r),
                r,
                True,
                False,
                False,
                total_iter,
                lam_al + mu * r,
                trace,
            )
        lam_al += mu * r
        if abs(r) > 0.9 * r_prev:
            stall += 1
        else:
            stall = 0
        if abs(r) > 0.25 * r_prev:
            mu = min(mu * cfg.penalty_growth, cfg.penalty_max)
        if mu >= cfg.penalty_max and stall >= 3:
            z_b, s_b, m_b, r_b = best
            return _ConstrainedResult(
                z_b, s_b, m_b, r_b, False, True, False, total_iter, lam_al, trace
            )
        r_prev = abs(r)
    z_b, s_b, m_b, r_b = best
    return _ConstrainedResult(
        z_b, s_b, m_b, r_b, False, False, False, total_iter, lam_al, trace
    )


def _golden_section(fun, lo: float, hi: float, rel_tol: float, max_eval: int):
    """Golden-section minimization; returns the best evaluated (x, aux)."""
    evals = []

    def probe(x):
        val, aux = fun(x)
        evals.append((val, x, aux))
        return val

    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = probe(c)
    fd = probe(d)
    while (b - a) > rel_tol * max(1.0, 0.5 * abs(a + b)) and len(evals) < max_eval:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = probe(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = probe(d)
    evals.sort(key=lambda item: (item[0], item[1]))
    return evals[0]


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def _circle_nodes(n_nodes: int, radius: float, orientation: float) -> Array:
    theta = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    if orientation < 0:
        theta = -theta
    return radius * np.column_stack([np.cos(theta), np.sin(theta)])


def _initial_nodes(model: DiffusionModel, q: float, cfg: OptimizerConfig) -> Array:
    if cfg.init_nodes is not None:
        nodes = np.asarray(cfg.init_nodes, dtype=float)
        if nodes.shape != (cfg.n_nodes, model.dim):
            raise InvalidArgumentError("init_nodes must have shape (n_nodes, dim)")
        return nodes
    mode = cfg.init_mode
    rotational = model.family in ("rotational-ou", "bounded-rotation") and model.dim == 2
    if mode == "auto":
        mode = "circle" if rotational and q != 0.0 else ("constant" if q == 0.0 else "random")
    if mode == "circle":
        if model.dim != 2:
            raise InvalidArgumentError("circle initialization needs a planar model")
        gamma = abs(model.params.get("gamma", 1.0)) or 1.0
        radius = math.sqrt(abs(q) / gamma) if q != 0.0 else 0.0
        return _circle_nodes(cfg.n_nodes, radius, math.copysign(1.0, q if q else 1.0))
    if mode == "constant":
        center = cfg.init_center if cfg.init_center is not None else np.zeros(model.dim)
        return np.tile(np.asarray(center, dtype=float), (cfg.n_nodes, 1))
    if mode == "random":
        center = cfg.init_center if cfg.init_center is not None else np.zeros(model.dim)
        loop = random_periodic_path(
            period=cfg.s0,
            n_steps=cfg.n_nodes,
            dim=model.dim,
            scale=cfg.init_scale,
            center=center,
            seed=cfg.seed,
        )
        return np.array(loop.nodes)
    raise InvalidArgumentError(f"unknown init mode {mode!r}")


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinimizeResult:
    measure: HolonomicMeasure
    rate: float
    converged: bool
    n_iter: int
    trace: tuple


def minimize_rate(model: DiffusionModel, cfg: OptimizerConfig) -> MinimizeResult:
    """Local minimizer of the action rate over closed paths and period."""
    state = {"z": _initial_nodes(model, 0.0, cfg)}

    def over_period(period):
        fun = _make_objective(model, period, cfg, 0.0, 0.0, 0.0, 0.0)
        inner = _minimize_nodes(fun, state["z"], cfg)
        if inner.diverged:
            return math.inf, inner
        state["z"] = inner.z
        return inner.value, inner

    val, period, inner = _golden_section(
        over_period, cfg.s_min, cfg.s_max, cfg.golden_rel_tol, cfg.golden_max_eval
    )
    measure = HolonomicMeasure(path=PeriodicPath(period=period, nodes=inner.z))
    return MinimizeResult(
        measure=measure,
        rate=float(val),
        converged=inner.converged,
        n_iter=inner.n_iter,
        trace=tuple(inner.trace),
    )


@dataclass(frozen=True)
class RatePoint:
    q: float
    s: float
    multiplier: float
    measure: HolonomicMeasure | None
    converged: bool
    residual: float
    infeasible: bool
    n_iter: int


def rate_point(model: DiffusionModel, q: float, cfg: OptimizerConfig) -> RatePoint:
    """Minimal action rate subject to work rate = q, over nodes and period.

    The period is searched by golden section on the configured bracket with
    an augmented-Lagrangian node solve per probe, warm-started across
    probes.  An unreachable constraint (e.g. zero circulation with q != 0)
    is reported as an infeasible point with s = +inf.
    """
    q = float(q)
    state = {"z": _initial_nodes(model, q, cfg), "lam": 0.0}

    def over_period(period):
        res = _solve_constrained(model, state["z"], period, q, cfg, state["lam"])
        if not (res.diverged or res.infeasible):
            state["z"] = res.z
            state["lam"] = res.lam_al
            return res.s, res
        return math.inf, res

    _, period, res = _golden_section(
        over_period, cfg.s_min, cfg.s_max, cfg.golden_rel_tol, cfg.golden_max_eval
    )
    if res.infeasible or res.diverged:
        return RatePoint(
            q=q,
            s=math.inf,
            multiplier=math.nan,
            measure=None,
            converged=False,
            residual=res.residual,
            infeasible=True,
            n_iter=res.n_iter,
        )
    measure = HolonomicMeasure(path=_fold_period(PeriodicPath(period=period, nodes=res.z)))
    return RatePoint(
        q=q,
        s=float(res.s),
        multiplier=float(res.multiplier),
        measure=measure,
        converged=res.converged,
        residual=float(res.residual),
        infeasible=False,
        n_iter=res.n_iter,
    )


def _fold_period(path: PeriodicPath, tol: float = 1e-8) -> PeriodicPath:
    """Return the lowest-period representative of an exactly repeating orbit."""
    n = path.n_steps
    for reps in (4, 3, 2):
        if n % reps:
            continue
        m = n // reps
        tiled = np.tile(path.nodes[:m], (reps, 1))
        scale = max(1.0, float(np.max(np.abs(path.nodes))))
        if np.max(np.abs(tiled - path.nodes)) <= tol * scale:
            return PeriodicPath(period=path.period / reps, nodes=path.nodes[:m])
    return path


@dataclass(frozen=True)
class RateCurve:
    """Sampled rate curve q -> s(q) with dual multipliers and minimizers."""

    q: tuple
    s: tuple
    multipliers: tuple
    converged: tuple
    residuals: tuple
    infeasible: tuple
    measures: tuple
    convexity_violation: float

    def point(self, q: float) -> RatePoint:
        i = int(np.argmin(np.abs(np.asarray(self.q) - q)))
        return RatePoint(
            q=self.q[i],
            s=self.s[i],
            multiplier=self.multipliers[i],
            measure=self.measures[i],
            converged=self.converged[i],
            residual=self.residuals[i],
            infeasible=self.infeasible[i],
            n_iter=0,
        )


def _convexity_violation(q: Array, s: Array) -> float:
    worst = 0.0
    for i in range(1, len(q) - 1):
        if not (np.isfinite(s[i - 1]) and np.isfinite(s[i]) and np.isfinite(s[i + 1])):
            continue
        t = (q[i] - q[i - 1]) / (q[i + 1] - q[i - 1])
        chord = (1.0 - t) * s[i - 1] + t * s[i + 1]
        worst = max(worst, float(s[i] - chord))
    return worst


def rate_curve(model: DiffusionModel, q_grid, cfg: OptimizerConfig) -> RateCurve:
    """rate_point over a sorted grid with warm starts from neighbors.

    Points are solved outward from small |q| on each sign branch so each
    solve starts from its neighbor's orbit.  Convexity of the returned
    samples is checked by the midpoint test and reported, never enforced.
    """
    q_grid = sorted(float(q) for q in q_grid)
    if not q_grid:
        raise InvalidArgumentError("q grid must be nonempty")
    order = sorted(range(len(q_grid)), key=lambda i: (abs(q_grid[i]), q_grid[i] < 0))
    points: dict[int, RatePoint] = {}
    warm: dict[int, np.ndarray] = {}
    for i in order:
        q = q_grid[i]
        local = cfg
        sign_prev = [
            j for j in points if math.copysign(1, q_grid[j]) == math.copysign(1, q)
        ]
        if sign_prev:
            j = max(sign_prev, key=lambda jj: abs(q_grid[jj]))
            if j in warm:
                local = dataclasses.replace(cfg, init_nodes=tuple(map(tuple, warm[j])))
        points[i] = rate_point(model, q, local)
        if points[i].measure is not None:
            nodes = points[i].measure.path.nodes
            if nodes.shape[0] == cfg.n_nodes:
                warm[i] = np.array(nodes)
    qs = np.asarray(q_grid)
    ss = np.asarray([points[i].s for i in range(len(q_grid))])
    return RateCurve(
        q=tuple(q_grid),
        s=tuple(float(v) for v in ss),
        multipliers=tuple(points[i].multiplier for i in range(len(q_grid))),
        converged=tuple(points[i].converged for i in range(len(q_grid))),
        residuals=tuple(points[i].residual for i in range(len(q_grid))),
        infeasible=tuple(points[i].infeasible for i in range(len(q_grid))),
        measures=tuple(points[i].measure for i in range(len(q_grid))),
        convexity_violation=_convexity_violation(qs, ss),
    )


def ft_defect(curve: RateCurve) -> float:
    """max over the grid of |s(-q) - s(q) - q|; needs a symmetric grid."""
    q = np.asarray(curve.q)
    s = np.asarray(curve.s)
    defect = 0.0
    for i, qi in enumerate(q):
        j = int(np.argmin(np.abs(q + qi)))
        if abs(q[j] + qi) > 1e-12 * max(1.0, abs(qi)):
            raise InvalidArgumentError("ft_defect needs a symmetric q grid")
        defect = max(defect, abs(s[j] - s[i] - qi))
    return float(defect)


# ---------------------------------------------------------------------------
# Legendre duality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LegendreResult:
    lambdas: tuple
    values: tuple
    biconjugate: tuple
    max_roundtrip_error: float
    convex_input: bool


def legendre_transform(q, s, lambdas=None) -> LegendreResult:
    """Grid conjugate Lambda(lambda) = max_q [lambda q - s(q)] and back.

    With the default lambda grid (all chord slopes of the input plus its
    endpoints' slopes) the double transform reproduces convex inputs on the
    grid exactly up to roundoff; non-convex inputs are flagged and come back
    as their convex hull.
    """
    q = np.asarray(q, dtype=float)
    s = np.asarray(s, dtype=float)
    if q.ndim != 1 or q.shape != s.shape or len(q) < 2:
        raise InvalidArgumentError("need matching 1-d grids with at least 2 points")
    if not np.all(np.diff(q) > 0):
        raise InvalidArgumentError("q grid must be strictly increasing")
    finite = np.isfinite(s)
    if finite.sum() < 2:
        raise InvalidArgumentError("need at least 2 finite curve samples")
    qf, sf = q[finite], s[finite]
    if lambdas is None:
        slopes = [
            (sf[j] - sf[i]) / (qf[j] - qf[i])
            for i in range(len(qf))
            for j in range(i + 1, len(qf))
        ]
        lambdas = np.unique(np.asarray(slopes, dtype=float))
    else:
        lambdas = np.unique(np.asarray(lambdas, dtype=float))
    lam_vals = np.max(lambdas[:, None] * qf[None, :] - sf[None, :], axis=1)
    biconj = np.max(lambdas[None, :] * q[:, None] - lam_vals[None, :], axis=1)
    convex = bool(_convexity_violation(qf, sf) <= 1e-9)
    err = float(np.max(np.abs(biconj[finite] - sf))) if convex else math.inf
    return LegendreResult(
        lambdas=tuple(float(v) for v in lambdas),
        values=tuple(float(v) for v in lam_vals),
        biconjugate=tuple(float(v) for v in biconj),
        max_roundtrip_error=err,
        convex_input=convex,
    )


def legendre_conjugate(lambdas, values, q_grid) -> Array:
    """s(q) = max over finite samples of [lambda q - Lambda(lambda)]."""
    lambdas = np.asarray(lambdas, dtype=float)
    values = np.asarray(values, dtype=float)
    finite = np.isfinite(values)
    if not np.any(finite):
        raise InvalidArgumentError("no finite dual samples")
    q_grid = np.asarray(q_grid, dtype=float)
    return np.max(
        lambdas[finite][None, :] * q_grid[:, None] - values[finite][None, :], axis=1
    )


@dataclass(frozen=True)
class DualScanResult:
    lambdas: tuple
    values: tuple  # +inf marks divergence of the inner minimization

    def rate_curve_on(self, q_grid) -> Array:
        return legendre_conjugate(self.lambdas, self.values, q_grid)


def _circle_witness_diverges(model, lam: float, cfg: OptimizerConfig) -> bool:
    """Cheap divergence witness: unit circles over a dense period grid.

    For the planar rotation families the objective is quadratic in the orbit
    radius, so a negative value at radius 1 scales to -inf.  A False answer
    is not a proof of boundedness; the guarded full solve covers that side.
    """
    if model.dim != 2:
        return False
    for orientation in (1.0, -1.0):
        nodes = _circle_nodes(cfg.n_nodes, 1.0, orientation)
        for period in np.linspace(cfg.s_min, cfg.s_max, 64):
            total, _, w, _ = _assemble(model, nodes, period)
            if total / period - lam * w < -1e-11:
                return True
    return False


def dual_scan(model: DiffusionModel, lambdas, cfg: OptimizerConfig, refine: bool = True):
    """Dual function by direct unconstrained minimization per lambda.

    Lambda(lam) = -min over paths and period of [rate - lam * work-rate];
    +inf where that minimization is unbounded.  With ``refine`` the finite /
    divergent boundary is located by bisection (circle witness plus guarded
    solves) and the boundary sample appended, which is what makes the
    conjugate curve s = Lambda* sharp at its kinks.
    """

    def value_at(lam: float) -> float:
        if _circle_witness_diverges(model, lam, cfg):
            return math.inf
        state = {"z": _initial_nodes(model, 0.0, cfg)}

        def over_period(period):
            fun = _make_objective(model, period, cfg, 0.0, 0.0, 0.0, lam)
            inner = _minimize_nodes(fun, state["z"], cfg)
            if inner.diverged:
                return math.inf, inner
            state["z"] = inner.z
            return inner.value, inner

        val, _, _ = _golden_section(
            over_period, cfg.s_min, cfg.s_max, cfg.golden_rel_tol, cfg.golden_max_eval
        )
        return -val if np.isfinite(val) else math.inf

    lambdas = sorted(float(v) for v in lambdas)
    values = [value_at(lam) for lam in lambdas]
    if refine:
        extra = []
        for i in range(len(lambdas) - 1):
            a_fin = np.isfinite(values[i])
            b_fin = np.isfinite(values[i + 1])
            if a_fin == b_fin:
                continue
            # bisect the witness boundary; the witness is cheap and sharp for
            # the planar rotation families where the boundary occurs
            lo, hi = lambdas[i], lambdas[i + 1]
            lo_div = _circle_witness_diverges(model, lo, cfg)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if _circle_witness_diverges(model, mid, cfg) == lo_div:
                    lo = mid
                else:
                    hi = mid
                if abs(hi - lo) <= 1e-8 * max(1.0, abs(lo)):
                    break
            for edge, shift in ((lo, hi - lo), (hi, lo - hi)):
                if _circle_witness_diverges(model, edge, cfg):
                    continue
                val = value_at(edge)
                if not np.isfinite(val):
                    val = value_at(edge + 4.0 * shift)
                    edge = edge + 4.0 * shift
                if np.isfinite(val):
                    extra.append((edge, val))
                break
        for lam, val in extra:
            lambdas.append(lam)
            values.append(val)
    order = np.argsort(lambdas)
    return DualScanResult(
        lambdas=tuple(lambdas[i] for i in order),
        values=tuple(values[i] for i in order),
    )
