"""Exception types shared by the library and the CLI (which maps them to exit codes)."""


class PreconditionError(ValueError):
    """Input violates a documented precondition."""

    exit_code = 2


class NonPseudoconvexError(PreconditionError):
    """A negative Levi eigenvalue was found beyond tolerance."""


class NonStabilizationError(RuntimeError):
    """The derived-distribution chain did not stabilize within max_iter.

    The partial chain is attached as ``chain``.
    """

    exit_code = 3

    def __init__(self, message, chain=None):
        super().__init__(message)
        self.chain = chain


class InvariantBreach(RuntimeError):
    exit_code = 4
