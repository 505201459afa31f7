"""Exception hierarchy shared by all dfnvem modules."""


class DfnVemError(Exception):
    """Base class for all dfnvem errors."""


# geometry
class NonPlanarInput(DfnVemError):
    pass


class DegenerateInput(DfnVemError):
    pass


class CoplanarFractures(DfnVemError):
    pass


# dfn ingestion
class ParseError(DfnVemError):
    pass


class ValidationError(DfnVemError):
    pass


class UnknownProblem(DfnVemError):
    pass


# mesh mutations
class StaleRef(DfnVemError):
    pass


class PointOffEdge(DfnVemError):
    pass


class DegenerateChord(DfnVemError):
    pass


class ChildTooThin(DfnVemError):
    pass


# vem / assembly
class SingularProjector(DfnVemError):
    pass


class EmptyDirichlet(DfnVemError):
    pass


# solver
class NotPositiveDefinite(DfnVemError):
    pass


class MaxIterations(DfnVemError):
    pass


class NumericalBreakdown(DfnVemError):
    pass


# estimator
class MeshSolutionMismatch(DfnVemError):
    pass


class NoExactSolution(DfnVemError):
    pass


class EstimatorZero(DfnVemError):
    pass


# refinement
class CutDegenerate(DfnVemError):
    pass


# reporting
class InsufficientData(DfnVemError):
    pass
