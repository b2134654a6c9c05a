"""Exception hierarchy.

Every error raised by the package derives from :class:`KinHydroError` so the
CLI can map failures onto exit codes (config errors -> 2, numerical -> 3).
"""

from __future__ import annotations


class KinHydroError(Exception):
    """Base class."""


class ConfigError(KinHydroError):
    """One or more configuration fields are invalid.

    ``violations`` is a list of ``(field_path, message)`` pairs.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [("", violations)]
        self.violations = list(violations)
        msg = "; ".join(f"{p}: {m}" if p else m for p, m in self.violations)
        super().__init__(msg)


class NumericalError(KinHydroError):
    """Base for failures during a numerical computation."""


class NonUnitMass(NumericalError):
    pass


class KernelAsymmetry(NumericalError):
    pass


class DegenerateDensity(NumericalError):
    pass


class StiffnessError(NumericalError):
    pass


class BlowUp(NumericalError):
    pass


class NonFiniteState(NumericalError):
    pass


class VacuumError(NumericalError):
    pass


class CFLViolation(NumericalError):
    pass


class DomainError(NumericalError):
    pass


class MassMismatch(NumericalError):
    pass


class VGridTooNarrow(NumericalError):
    pass


class GridMismatch(NumericalError):
    pass


class TimeGridMismatch(NumericalError):
    pass


class DegenerateFit(NumericalError):
    pass
