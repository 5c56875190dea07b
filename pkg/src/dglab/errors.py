"""Exception hierarchy shared by all dglab modules."""


class DglabError(Exception):
    """Base class for every error raised by the library."""


class DomainError(DglabError):
    """A requested set does not fit inside the space-time grid."""


class BallExceedsDomain(DomainError):
    pass


class CylinderExceedsDomain(DomainError):
    pass


class EnlargementExceedsDomain(DomainError):
    pass


class InvalidPartition(DglabError):
    """A region partition violates the one-interface-per-slice layout."""


class DegenerateMeasure(DglabError):
    """A ratio of measures has a vanishing denominator."""


class SupportViolation(DglabError):
    pass


class SolverError(DglabError):
    """Base class for linear-solve failures."""


class SingularStep(SolverError):
    def __init__(self, step: int, message: str = "") -> None:
        self.step = step
        super().__init__(message or f"tridiagonal solve broke down at time step {step}")


class SingularGlobalSystem(SolverError):
    def __init__(self, row: int, node: tuple[int, int] | None = None) -> None:
        self.row = row
        self.node = node
        where = f" (node i={node[0]}, j={node[1]})" if node is not None else ""
        super().__init__(f"zero pivot in the global space-time system at row {row}{where}")


class NonPartitioned(SolverError):
    pass


class StripTooWide(SolverError):
    pass


class DegenerateGap(DglabError):
    pass


class ProbeInadmissible(DglabError):
    """A Harnack probe violates a geometric hypothesis; ``hypothesis`` names it."""

    def __init__(self, hypothesis: str, detail: str = "") -> None:
        self.hypothesis = hypothesis
        super().__init__(f"{hypothesis}: {detail}" if detail else hypothesis)


class EmptyTargetSet(DglabError):
    pass


class NegativeSolution(DglabError):
    pass


class PreconditionUnmet(DglabError):
    pass


class SliceExcluded(DglabError):
    pass


class EmptySet(DglabError):
    pass


class ScenarioMissing(DglabError):
    pass


class ConfigError(DglabError):
    """Scenario file is unreadable or fails schema validation."""


class MissingReport(DglabError):
    pass
