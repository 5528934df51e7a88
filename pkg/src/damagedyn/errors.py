"""Exception hierarchy shared by all modules."""


class DamageDynError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(DamageDynError, ValueError):
    """Invalid configuration or parameter values.

    ``path`` names the offending field (dotted, e.g. ``material.alpha``) when known.
    """

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InitialDamageError(ConfigError):
    """The initial damage set does not contain the set where |grad u0| >= lambda."""

    def __init__(self, offending, lam, path="initial.D0"):
        self.offending = list(offending)
        self.lam = lam
        shown = ", ".join(str(i) for i in self.offending[:20])
        more = "" if len(self.offending) <= 20 else f" (+{len(self.offending) - 20} more)"
        super().__init__(
            "initial damage is not consistent with the threshold property: "
            f"{len(self.offending)} undamaged element(s) with |grad u0| >= lambda={lam:.6g}: "
            f"[{shown}]{more}",
            path=path,
        )


class SolverError(DamageDynError, RuntimeError):
    """Linear solve did not reach the requested relative residual."""

    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (relative residual {residual:.3e})")


class StepError(DamageDynError, RuntimeError):
    """Alternating minimization failed to reach a fixed point within one step."""

    def __init__(self, message, energies=(), step_index=None):
        self.energies = tuple(energies)
        self.step_index = step_index
        super().__init__(message)


class OracleCapError(DamageDynError, ValueError):
    """Brute-force enumeration refused because too many elements are undamaged."""


class DomainError(DamageDynError, ValueError):
    """Argument outside the domain where an operation is defined."""
