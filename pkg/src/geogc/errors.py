"""Exception hierarchy shared across the package."""


class GeoGCError(Exception):
    """Base class for all package errors."""


class ValidationError(GeoGCError):
    def __init__(self, graph_id, violations):
        self.graph_id = graph_id
        self.violations = list(violations)
        super().__init__(f"graph {graph_id!r} is invalid: " + "; ".join(self.violations))


class DegenerateAngle(GeoGCError):
    pass


class DegenerateDihedral(GeoGCError):
    pass


class ZeroDistance(GeoGCError):
    pass


class NonFiniteLoss(GeoGCError):
    pass


class SingularKernel(GeoGCError):
    pass


class ParseError(GeoGCError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class UnsupportedFormat(GeoGCError):
    pass


class CountsMismatch(GeoGCError):
    pass


class SizeMismatch(GeoGCError):
    pass
