"""Exception types raised by the numerical core.

Each halt condition of a flow run maps to one of these, and the CLI maps
them onto exit codes.
"""


class CalabiError(Exception):
    """Base class for all library errors."""


class NonAdmissible(CalabiError):
    """The metric ``delta + ddbar(phi)`` lost positivity somewhere."""

    def __init__(self, min_eig, location):
        self.min_eig = float(min_eig)
        self.location = tuple(float(c) for c in location)
        super().__init__(
            f"metric not positive: min eigenvalue {self.min_eig:.6g} at {self.location}"
        )


class NoConvergence(CalabiError):
    def __init__(self, iterations, residual, what="iteration"):
        self.iterations = int(iterations)
        self.residual = float(residual)
        super().__init__(
            f"{what} did not converge after {self.iterations} iterations "
            f"(residual {self.residual:.3e})"
        )


class IndefiniteForm(CalabiError):
    """Conjugate gradients met a non-positive curvature direction."""


class StepFailure(CalabiError):
    def __init__(self, t, dt, reason=""):
        self.t = float(t)
        self.dt = float(dt)
        self.reason = reason
        super().__init__(f"step failed at t={self.t:.6g} with dt={self.dt:.3e}: {reason}")


class EllipticityLost(CalabiError):
    def __init__(self, node, value):
        self.node = tuple(int(i) for i in node)
        self.value = float(value)
        super().__init__(f"coefficient not elliptic at node {self.node}: {self.value:.6g}")


class InsufficientData(CalabiError):
    pass


class NonPositiveEnergy(CalabiError):
    pass
