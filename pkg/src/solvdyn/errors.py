"""Exception types shared across the package."""


class SolvdynError(Exception):
    """Base class for all package errors."""

    name = "error"

    def payload(self) -> dict:
        return {"name": self.name, "message": str(self)}


class ValidationError(SolvdynError):
    """Input violates a documented precondition."""

    name = "validation"


class NonHyperbolicError(ValidationError):
    name = "non-hyperbolic"


class SingularMatrixError(SolvdynError):
    """Linear solve failed: matrix singular.

    When the system is consistent despite the singularity, `particular` holds
    one solution and `nullspace` a basis of the homogeneous solutions, so the
    caller still gets a description of the full solution space.
    """

    name = "singular-matrix"

    def __init__(self, message, consistent=False, particular=None, nullspace=None):
        super().__init__(message)
        self.consistent = consistent
        self.particular = particular
        self.nullspace = nullspace

    def payload(self) -> dict:
        out = super().payload()
        out["consistent"] = self.consistent
        if self.consistent:
            out["particular"] = [str(c) for c in self.particular]
            out["nullspace"] = [[str(c) for c in vec] for vec in self.nullspace]
        return out


class ConeNotInvariantError(SolvdynError):
    name = "cone-not-invariant"

    def __init__(self, point_index, margin):
        super().__init__(
            f"cone invariance fails at grid point {point_index} (margin {margin:.3e})"
        )
        self.point_index = point_index
        self.margin = margin


class NoContractionError(SolvdynError):
    name = "no-contraction"

    def __init__(self, iteration, growth_factor):
        super().__init__(
            f"graph transform displacement grew for 10 consecutive sweeps "
            f"(iteration {iteration}, growth factor {growth_factor:.3f})"
        )
        self.iteration = iteration
        self.growth_factor = growth_factor


class NotFoundError(SolvdynError):
    """Bounded search exhausted without finding the required object."""

    name = "not-found"

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class LeafFollowingError(SolvdynError):
    name = "leaf-following"

    def __init__(self, message, last_parameter=None):
        super().__init__(message)
        self.last_parameter = last_parameter


class HomologyMismatchError(SolvdynError):
    name = "homology-mismatch"
