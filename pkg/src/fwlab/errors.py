"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates an operation's precondition."""


class EllipticityError(RuntimeError):
    """Diffusion matrix failed a positive-definiteness requirement."""


class ExplosionError(RuntimeError):
    """A simulated trajectory left the guard ball |x| <= r_max.

    The drift of the catalog models is only locally Lipschitz, so the
    discrete scheme can blow up when the step size is too large.  The
    failing step index is kept so callers can report where it happened.
    """

    def __init__(self, step: int, radius: float):
        super().__init__(f"trajectory exceeded |x| = {radius:g} at step {step}")
        self.step = step
        self.radius = radius


class GridMismatchError(InvalidArgumentError):
    """Two objects were combined whose time grids or dimensions disagree."""


class ConfigError(ValueError):
    """An experiment configuration failed schema validation."""
