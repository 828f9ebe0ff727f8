from .expr import (Const, Data, Expr, LinearSum, Var, exp, from_json, log, quicksum,
                   sabs, sqrt, to_json, to_prefix)
from .graph import (ComponentModel, Connectivity, FlattenedProblem, LinkConstraint,
                    ModelGraph, NodeBlock)


def evaluate(expr, point, data=None):
    return expr.evaluate(point, data)


def gradient(expr, point, data=None):
    return expr.gradient(point, data)


__all__ = ["Const", "Data", "Expr", "LinearSum", "Var", "exp", "log", "sqrt", "sabs",
           "quicksum", "to_json", "from_json", "to_prefix", "ComponentModel",
           "Connectivity", "FlattenedProblem", "LinkConstraint", "ModelGraph", "NodeBlock",
           "evaluate", "gradient"]
