"""fwlab: a numerical laboratory for path-space large deviations of diffusions.

The package evaluates and minimizes the Freidlin-Wentzell action per unit
time over closed periodic paths, computes the rate function of the
Gallavotti-Cohen work observable together with its Legendre dual, and
cross-checks the variational answers against direct and importance-sampled
Monte Carlo simulation of the underlying stochastic differential equation.
"""

from .models import (
    DiffusionModel,
    MODEL_FAMILIES,
    check_assumptions,
    make_model,
    scalar_ou,
)
from .paths import (
    DiscretePath,
    HolonomicMeasure,
    PeriodicPath,
    TimeGrid,
    affine_bridge,
    continuity_modulus,
    mollify,
    periodize,
    random_periodic_path,
    translate,
)
from .action import (
    ActionValue,
    GcValue,
    fw_action,
    gc_observable,
    rate_I,
    reversal_gap,
    time_reversed,
)
from .simulate import (
    SimConfig,
    TiltedDrift,
    batch_simulate,
    build_tilt,
    euler_maruyama,
    girsanov_log_weight,
    simulate_tilted,
    trajectory_rng,
)
from .optimize import (
    OptimizerConfig,
    RateCurve,
    action_gradient,
    dual_scan,
    ft_defect,
    legendre_transform,
    minimize_rate,
    rate_curve,
    rate_point,
)
from .montecarlo import (
    EventSpec,
    McRecord,
    estimate_direct,
    estimate_importance,
    ft_ratio,
    occupation_stats,
)

__version__ = "0.1.0"

__all__ = [
    "ActionValue",
    "DiffusionModel",
    "DiscretePath",
    "EventSpec",
    "GcValue",
    "HolonomicMeasure",
    "MODEL_FAMILIES",
    "McRecord",
    "OptimizerConfig",
    "PeriodicPath",
    "RateCurve",
    "SimConfig",
    "TiltedDrift",
    "TimeGrid",
    "action_gradient",
    "affine_bridge",
    "batch_simulate",
    "build_tilt",
    "check_assumptions",
    "continuity_modulus",
    "dual_scan",
    "estimate_direct",
    "estimate_importance",
    "euler_maruyama",
    "ft_defect",
    "ft_ratio",
    "fw_action",
    "gc_observable",
    "girsanov_log_weight",
    "legendre_transform",
    "make_model",
    "minimize_rate",
    "mollify",
    "occupation_stats",
    "periodize",
    "random_periodic_path",
    "rate_I",
    "rate_curve",
    "rate_point",
    "reversal_gap",
    "scalar_ou",
    "simulate_tilted",
    "time_reversed",
    "trajectory_rng",
    "translate",
    "__version__",
]
