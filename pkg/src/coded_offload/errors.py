"""Exception hierarchy.

Two families matter to callers (and map to CLI exit codes): ``ValidationError``
for bad inputs and ``CapacityError`` for problems that are well formed but
cannot be solved within the configured limits.
"""


class ValidationError(ValueError):
    """Input data violates a documented invariant."""


class CapacityError(RuntimeError):
    """A well-formed problem exceeds a configured limit or has no solution."""


class InvalidSplitError(ValidationError):
    pass


class InfeasibleSplitError(ValidationError):
    pass


class DegenerateGeometryError(ValidationError):
    pass


class UnreachableError(ValidationError):
    """A link has zero rate, so nothing can be offloaded over it."""


class InconsistentDistributionError(ValidationError):
    pass


class InvalidShortfallError(ValidationError):
    pass


class MalformedScenarioError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class ConstraintViolationError(ValidationError):
    def __init__(self, constraint: str, detail: str):
        super().__init__(f"{constraint} violated: {detail}")
        self.constraint = constraint


class PlacementError(ValidationError):
    pass


class InfeasiblePointError(ValidationError):
    pass


class ConfigError(ValidationError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ScenarioExplosionError(CapacityError):
    pass


class OracleTooLargeError(CapacityError):
    pass
