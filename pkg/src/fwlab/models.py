"""Parametric diffusion models with drift b = -a grad(V) + c.

A model bundles a confining potential V, a circulation (non-gradient) field
c, and a diffusion matrix a, together with the analytic derivatives the rest
of the package needs: grad(V), the Hessian of V, the Jacobian of c, the
partials of a and its divergence.  Everything is vectorized over a leading
batch axis so simulation and path quadrature stay in numpy.

The catalog is a fixed registry rather than an expression parser:

``rotational-ou``
    n = 2, V = |x|^2 / 2, a = I, c = gamma * J x with J the quarter-turn
    rotation.  The only family with a closed-form work rate curve; its
    linear c is unbounded, which ``check_assumptions`` reports as a warning.
``bounded-rotation``
    Same potential, c = gamma * J x / (1 + |x|^2), so c is bounded.
``double-well``
    n = 1, V = (x^2 - 1)^2 / 4, a = 1, c constant (default 0).
``anisotropic-ou``
    Constant SPD a, V = x . K x / 2 with K SPD, linear c = C x.  With 1x1
    matrices this doubles as the scalar Ornstein-Uhlenbeck test model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EllipticityError, InvalidArgumentError

Array = np.ndarray


def _coerce(x, dim: int) -> Array:
    """Return x as a float array with trailing axis of length dim."""
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., np.newaxis]
    if x.shape[-1] != dim:
        raise InvalidArgumentError(f"expected points in R^{dim}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class ScalarPotential:
    """Confining potential V with analytic gradient and Hessian.

    ``value`` maps (..., n) -> (...,), ``grad`` maps (..., n) -> (..., n)
    and ``hess`` maps (..., n) -> (..., n, n).
    """

    value: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    hess: Callable[[Array], Array]


@dataclass(frozen=True)
class CirculationField:
    """Non-gradient drift component c with analytic Jacobian."""

    value: Callable[[Array], Array]
    jac: Callable[[Array], Array]


@dataclass(frozen=True)
class DiffusionField:
    """Diffusion matrix field a(x) with partial derivatives.

    ``partials`` maps (..., n) -> (..., n, n, n) indexed [k, i, j] for
    d a_ij / d x_k.  ``is_constant`` lets callers cache factorizations.
    """

    value: Callable[[Array], Array]
    partials: Callable[[Array], Array]
    is_constant: bool = False

    def divergence(self, x: Array) -> Array:
        """Row divergence (div a)_i = sum_j d_j a_ji."""
        p = self.partials(x)
        return np.einsum("...jji->...i", p)


@dataclass(frozen=True)
class DiffusionModel:
    """A diffusion model on R^n with drift decomposition b = -a grad(V) + c."""

    family: str
    params: dict
    dim: int
    potential: ScalarPotential
    circulation: CirculationField
    diffusion: DiffusionField
    _chol: Array | None = field(default=None, repr=False)
    _ainv: Array | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.diffusion.is_constant:
            a0 = np.asarray(self.diffusion.value(np.zeros(self.dim)))
            chol = np.linalg.cholesky(a0)
            object.__setattr__(self, "_chol", chol)
            object.__setattr__(self, "_ainv", np.linalg.inv(a0))

    # -- diffusion matrix helpers -------------------------------------------

    def a(self, x) -> Array:
        return self.diffusion.value(_coerce(x, self.dim))

    def a_inv(self, x) -> Array:
        """Inverse diffusion matrix, batched; cached when a is constant."""
        x = _coerce(x, self.dim)
        if self._ainv is not None:
            return np.broadcast_to(self._ainv, x.shape + (self.dim,))
        return np.linalg.inv(self.diffusion.value(x))

    def noise_factor(self, x) -> Array:
        """Lower-triangular sigma(x) with sigma sigma^T = a(x) (Cholesky)."""
        x = _coerce(x, self.dim)
        if not np.all(np.isfinite(x)):
            raise InvalidArgumentError("non-finite point passed to noise_factor")
        if self._chol is not None:
            return np.broadcast_to(self._chol, x.shape + (self.dim,))
        try:
            return np.linalg.cholesky(self.diffusion.value(x))
        except np.linalg.LinAlgError as exc:
            raise EllipticityError(f"a(x) is not positive definite: {exc}") from exc

    # -- drift ----------------------------------------------------------------

    def drift(self, x) -> Array:
        """b(x) = -a(x) grad V(x) + c(x)."""
        x = _coerce(x, self.dim)
        if not np.all(np.isfinite(x)):
            raise InvalidArgumentError("non-finite point passed to drift")
        g = self.potential.grad(x)
        a = self.diffusion.value(x)
        return -np.einsum("...ij,...j->...i", a, g) + self.circulation.value(x)

    def drift_jacobian(self, x) -> Array:
        """Db with (Db)_il = d b_i / d x_l."""
        x = _coerce(x, self.dim)
        g = self.potential.grad(x)
        a = self.diffusion.value(x)
        hess = self.potential.hess(x)
        jac = -np.einsum("...ij,...jl->...il", a, hess) + self.circulation.jac(x)
        if not self.diffusion.is_constant:
            p = self.diffusion.partials(x)
            jac = jac - np.einsum("...lij,...j->...il", p, g)
        return jac

    # -- work metric helpers (used by the Gallavotti-Cohen observable) --------

    def gc_vector(self, x) -> Array:
        """f(x) = a(x)^{-1} c(x), the integrand of the work observable."""
        x = _coerce(x, self.dim)
        return np.einsum(
            "...ij,...j->...i", self.a_inv(x), self.circulation.value(x)
        )

    def gc_jacobian(self, x) -> Array:
        """Jacobian of f = a^{-1} c, including the derivative of a^{-1}."""
        x = _coerce(x, self.dim)
        ainv = self.a_inv(x)
        jac = np.einsum("...ij,...jl->...il", ainv, self.circulation.jac(x))
        if not self.diffusion.is_constant:
            p = self.diffusion.partials(x)
            f = self.gc_vector(x)
            # d_l (a^{-1})_{i.} c = -(a^{-1} (d_l a) a^{-1} c)_i
            jac = jac - np.einsum("...ij,...ljk,...k->...il", ainv, p, f)
        return jac


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------

_J = np.array([[0.0, -1.0], [1.0, 0.0]])


def _constant_diffusion(a0: Array, dim: int) -> DiffusionField:
    a0 = np.asarray(a0, dtype=float)

    def value(x):
        return np.broadcast_to(a0, x.shape + (dim,))

    def partials(x):
        return np.zeros(x.shape + (dim, dim))

    return DiffusionField(value=value, partials=partials, is_constant=True)


def _quadratic_potential(k: Array, dim: int) -> ScalarPotential:
    k = np.asarray(k, dtype=float)
    kt = k.T.copy()

    def value(x):
        return 0.5 * np.sum((x @ kt) * x, axis=-1)

    def grad(x):
        return x @ kt

    def hess(x):
        return np.broadcast_to(k, x.shape + (dim,))

    return ScalarPotential(value=value, grad=grad, hess=hess)


def _linear_circulation(c_mat: Array, dim: int) -> CirculationField:
    c_mat = np.asarray(c_mat, dtype=float)
    ct = c_mat.T.copy()

    def value(x):
        return x @ ct

    def jac(x):
        return np.broadcast_to(c_mat, x.shape + (dim,))

    return CirculationField(value=value, jac=jac)


def _require_spd(m: Array, name: str):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidArgumentError(f"{name} must be a square matrix")
    if not np.allclose(m, m.T):
        raise InvalidArgumentError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(m)) <= 0:
        raise EllipticityError(f"{name} must be positive definite")
    return m


def _rotational_ou(gamma: float = 1.0) -> DiffusionModel:
    return DiffusionModel(
        family="rotational-ou",
        params={"gamma": float(gamma)},
        dim=2,
        potential=_quadratic_potential(np.eye(2), 2),
        circulation=_linear_circulation(gamma * _J, 2),
        diffusion=_constant_diffusion(np.eye(2), 2),
    )


def _bounded_rotation(gamma: float = 1.0) -> DiffusionModel:
    gamma = float(gamma)

    def value(x):
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        return gamma * np.einsum("ij,...j->...i", _J, x) / (1.0 + r2)

    def jac(x):
        r2 = np.sum(x * x, axis=-1)[..., np.newaxis, np.newaxis]
        jx = np.einsum("ij,...j->...i", _J, x)
        outer = jx[..., :, np.newaxis] * x[..., np.newaxis, :]
        return gamma * (_J / (1.0 + r2) - 2.0 * outer / (1.0 + r2) ** 2)

    return DiffusionModel(
        family="bounded-rotation",
        params={"gamma": gamma},
        dim=2,
        potential=_quadratic_potential(np.eye(2), 2),
        circulation=CirculationField(value=value, jac=jac),
        diffusion=_constant_diffusion(np.eye(2), 2),
    )


def _double_well(c0: float = 0.0) -> DiffusionModel:
    c0 = float(c0)

    def value(x):
        return np.sum(0.25 * (x * x - 1.0) ** 2, axis=-1)

    def grad(x):
        return x**3 - x

    def hess(x):
        return (3.0 * x * x - 1.0)[..., np.newaxis]

    def c_value(x):
        return np.full_like(x, c0)

    def c_jac(x):
        return np.zeros(x.shape + (1,))

    return DiffusionModel(
        family="double-well",
        params={"c0": c0},
        dim=1,
        potential=ScalarPotential(value=value, grad=grad, hess=hess),
        circulation=CirculationField(value=c_value, jac=c_jac),
        diffusion=_constant_diffusion(np.eye(1), 1),
    )


def _anisotropic_ou(a=None, k=None, c=None) -> DiffusionModel:
    a = np.asarray(a if a is not None else [[2.0, 1.0], [1.0, 2.0]], dtype=float)
    dim = a.shape[0]
    k = np.asarray(k if k is not None else np.eye(dim), dtype=float)
    c = np.asarray(c if c is not None else np.zeros((dim, dim)), dtype=float)
    _require_spd(a, "a")
    _require_spd(k, "k")
    if c.shape != (dim, dim):
        raise InvalidArgumentError("c must match the dimension of a")
    return DiffusionModel(
        family="anisotropic-ou",
        params={"a": a.tolist(), "k": k.tolist(), "c": c.tolist()},
        dim=dim,
        potential=_quadratic_potential(k, dim),
        circulation=_linear_circulation(c, dim),
        diffusion=_constant_diffusion(a, dim),
    )


MODEL_FAMILIES: dict[str, Callable[..., DiffusionModel]] = {
    "rotational-ou": _rotational_ou,
    "bounded-rotation": _bounded_rotation,
    "double-well": _double_well,
    "anisotropic-ou": _anisotropic_ou,
}


def make_model(family: str, **params) -> DiffusionModel:
    """Build a catalog model by family name.  Unknown names or params raise."""
    try:
        builder = MODEL_FAMILIES[family]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown model family {family!r}; choose from {sorted(MODEL_FAMILIES)}"
        ) from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise InvalidArgumentError(f"bad parameters for {family!r}: {exc}") from exc


def scalar_ou() -> DiffusionModel:
    """Scalar Ornstein-Uhlenbeck model (V = x^2/2, a = 1, c = 0)."""
    return make_model("anisotropic-ou", a=[[1.0]], k=[[1.0]], c=[[0.0]])


# ---------------------------------------------------------------------------
# Standing-assumption diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionRow:
    radius: float
    radial_growth: float
    coercivity: float
    min_eig_a: float
    max_norm_c: float
    max_norm_dc: float


@dataclass(frozen=True)
class AssumptionReport:
    """Grid diagnostics for the standing assumptions on (V, c, a).

    Purely observational: the verdict records whether the radial growth of
    grad(V) and the coercivity expression grad(V).a grad(V) - eps0 tr(a D2V)
    increase monotonically along the sampled radii.  Warnings carry
    everything else (unbounded c, ellipticity trouble, negative V).
    """

    eps0: float
    rows: list[AssumptionRow]
    verdict: str  # "pass" | "warn"
    warnings: list[str]


def _sphere_points(dim: int, radius: float, n_dirs: int, rng) -> Array:
    if dim == 1:
        return np.array([[radius], [-radius]])
    dirs = rng.standard_normal((n_dirs, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs = np.vstack([dirs, np.eye(dim), -np.eye(dim)])
    return radius * dirs


def check_assumptions(
    model: DiffusionModel,
    radii,
    eps0: float = 1.0,
    n_dirs: int = 64,
    seed: int = 0,
) -> AssumptionReport:
    """Spot-check the standing assumptions on spheres of increasing radius."""
    radii = sorted(float(r) for r in radii)
    if not radii:
        raise InvalidArgumentError("radius grid must be nonempty")
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    rows = []
    warnings: list[str] = []
    for r in radii:
        pts = _sphere_points(model.dim, r, n_dirs, rng)
        g = model.potential.grad(pts)
        a = model.diffusion.value(pts)
        hess = model.potential.hess(pts)
        growth = np.einsum("...i,...i->...", g, pts) / r
        coercivity = np.einsum("...i,...ij,...j->...", g, a, g) - eps0 * np.einsum(
            "...ii->...", np.einsum("...ij,...jk->...ik", a, hess)
        )
        eigs = np.linalg.eigvalsh(a)
        cval = model.circulation.value(pts)
        dc = model.circulation.jac(pts)
        if np.any(model.potential.value(pts) < 0):
            warnings.append(f"V takes negative values at radius {r:g}")
        rows.append(
            AssumptionRow(
                radius=r,
                radial_growth=float(np.min(growth)),
                coercivity=float(np.min(coercivity)),
                min_eig_a=float(np.min(eigs)),
                max_norm_c=float(np.max(np.linalg.norm(cval, axis=-1))),
                max_norm_dc=float(np.max(np.linalg.norm(dc, axis=(-2, -1)))),
            )
        )
    growth_seq = [row.radial_growth for row in rows]
    coer_seq = [row.coercivity for row in rows]
    grows = all(b > a for a, b in zip(growth_seq, growth_seq[1:])) and growth_seq[-1] > 0
    if len(rows) == 1:
        grows = growth_seq[-1] > 0
    if not grows:
        warnings.append("no monotone radial growth of grad(V) observed")
    if len(rows) > 1 and not all(b > a for a, b in zip(coer_seq, coer_seq[1:])):
        warnings.append(f"coercivity expression (eps0={eps0:g}) not increasing")
    if min(row.min_eig_a for row in rows) <= 0:
        warnings.append("diffusion matrix not uniformly elliptic on samples")
    cmax = [row.max_norm_c for row in rows]
    if len(rows) > 1 and cmax[-1] > 1.05 * max(cmax[0], 1e-12):
        warnings.append("circulation field appears unbounded along sampled radii")
    return AssumptionReport(
        eps0=float(eps0),
        rows=rows,
        verdict="pass" if grows else "warn",
        warnings=warnings,
    )
