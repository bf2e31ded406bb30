"""Exception types shared across the toolkit."""


class CConvexError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CConvexError):
    """Invalid or unknown configuration input."""


class DegenerateHessian(CConvexError):
    """Mixed Hessian condition number exceeded the configured cap."""


class DiagonalSingularity(CConvexError):
    """Cost with a diagonal singularity evaluated at (or too close to) x = y."""


class StencilOutOfDomain(CConvexError):
    """A finite-difference stencil point left the declared domain pair."""


class NoConvergence(CConvexError):
    """Newton solve did not reach the residual tolerance within max_iters."""


class TargetOutsideImage(CConvexError):
    """Inverse-gradient solve converged to a point outside the opposite domain."""


class AllMinusInfinity(CConvexError):
    """Potential is -inf at every lattice node."""


class TouchingNotFound(CConvexError):
    """No c-affine through both chord endpoints found within the search budget.

    When the chord connects its endpoints a touching c-affine exists, so this
    signals numerical breakdown rather than a mathematical obstruction.
    """


class NoViolationFound(CConvexError):
    """Search found no quasi-convexity violation; the cost may satisfy it."""


class RefinementFailed(CConvexError):
    """Structured-violation refinement could not establish a lemma condition."""

    def __init__(self, condition: int, message: str = ""):
        self.condition = condition
        super().__init__(f"condition {condition} failed{': ' + message if message else ''}")


class TiltOutOfDomain(CConvexError):
    """A tilted support point left the target domain; reduce the tilt radius."""


class CapEmpty(CConvexError):
    """No lattice node realises the flat-cap equality; increase resolution."""


class NoFeasibleRadius(CConvexError):
    """No scale on the search grid satisfies the requested cone inequality."""
