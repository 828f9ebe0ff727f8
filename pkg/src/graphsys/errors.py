"""Exception hierarchy shared by every layer of the package."""


class GraphSysError(Exception):
    """Base class for all package errors."""


# hypergraph
class UnknownNode(GraphSysError):
    pass


class DegenerateSupport(GraphSysError):
    pass


class NodeAlreadyAssigned(GraphSysError):
    pass


class BadK(GraphSysError):
    pass


# modelgraph
class DomainError(GraphSysError):
    pass


class UnknownVariable(GraphSysError):
    pass


class UnknownData(GraphSysError):
    pass


class SingleNodeLink(GraphSysError):
    pass


class DanglingLink(GraphSysError):
    pass


# solvers
class Singular(GraphSysError):
    pass


class SingularBlock(Singular):
    def __init__(self, node, msg=None):
        self.node = node
        super().__init__(msg or f"KKT block of node {node} is singular")


class SingularSchur(Singular):
    pass


class HasInequalities(GraphSysError):
    pass


class MaxIterations(GraphSysError):
    """Iteration limit hit. ``best`` carries the best iterate found, if any."""

    def __init__(self, msg, best=None, state=None):
        super().__init__(msg)
        self.best = best
        self.state = state


# decomposition
class SubproblemInfeasible(GraphSysError):
    pass


class InvalidPartition(GraphSysError):
    pass


# computegraph
class DuplicateAttribute(GraphSysError):
    pass


class UnknownAttribute(GraphSysError):
    pass


class CallbackFailure(GraphSysError):
    pass


# casestudies / cli
class SpecError(GraphSysError):
    pass


class StateBlowup(GraphSysError):
    pass


class BadTrace(GraphSysError):
    pass
