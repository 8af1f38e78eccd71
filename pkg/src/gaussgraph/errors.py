"""Exception hierarchy.

Every error carries a short machine-readable ``code``; errors that enforce a
modelling gate also carry ``gate``, the inequality that failed.
"""


class GaussGraphError(Exception):
    code = "E_GENERIC"
    gate = None

    def __init__(self, message, *, gate=None):
        super().__init__(message)
        if gate is not None:
            self.gate = gate

    def to_dict(self):
        out = {"code": self.code, "message": str(self)}
        if self.gate is not None:
            out["gate"] = self.gate
        return out


class ValidationError(GaussGraphError, ValueError):
    code = "E_VALIDATION"


class NonCoerciveError(ValidationError):
    code = "E_NONCOERCIVE"
    gate = "4*alpha_H > alpha_K > 0"


class SingularChartError(ValidationError):
    code = "E_SINGULAR_CHART"


class ConstraintSetError(ValidationError):
    """A lifted sample violates the algebraic constraints on its mixed stratum."""

    code = "E_CONSTRAINT_SET"


class InfeasibleConstraintsError(GaussGraphError):
    code = "E_INFEASIBLE"
    gate = "36*pi*v^2 <= a^3"


class MeshError(GaussGraphError):
    code = "E_MESH"


class ObjParseError(MeshError):
    code = "E_OBJ_PARSE"

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class NonManifoldError(MeshError):
    code = "E_NON_MANIFOLD"

    def __init__(self, message, edges=()):
        super().__init__(message)
        self.edges = list(edges)


class DegenerateTriangleError(MeshError):
    code = "E_DEGENERATE_TRIANGLE"

    def __init__(self, message, triangles=()):
        super().__init__(message)
        self.triangles = list(triangles)
