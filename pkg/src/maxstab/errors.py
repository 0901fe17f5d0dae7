"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class MaxStabError(Exception):
    """Base class for errors raised by :mod:`maxstab`."""


class InputError(MaxStabError, ValueError):
    """Invalid argument or configuration value."""


class InvariantError(MaxStabError):
    """A data invariant (e.g. positivity of a Frechet field) does not hold."""


class NumericalError(MaxStabError):
    """A numerical routine failed (factorization, quadrature, ...)."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SimulationError(NumericalError):
    """Simulation stopped before its stopping rule was met."""


class EstimationError(NumericalError):
    """An estimator could not produce a usable value."""
