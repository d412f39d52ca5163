"""Failure modes shared across the package."""


class DegenerateWeightsError(RuntimeError):
    """Every importance weight vanished numerically (filter degeneracy)."""


class DivergenceError(RuntimeError):
    """Model state left the representable range (NaN/overflow) during propagation."""
