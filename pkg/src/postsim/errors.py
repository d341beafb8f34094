"""Exception hierarchy shared by every backend."""


class PostsimError(Exception):
    """Base class for all errors raised by postsim."""


class ValidationError(PostsimError, ValueError):
    """A circuit, gate, or instance violates a structural invariant."""


class CircuitSyntaxError(PostsimError, ValueError):
    """Malformed line in the circuit or truth-table text format."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class ZeroProbability(PostsimError):
    """Postselection on an event that carries no probability mass."""


class ZeroMass(PostsimError):
    """Sampling requested from a state whose total p-mass is zero."""


class UnsupportedGate(PostsimError):
    """The path-sum backend received a gate outside H/X/CNOT/Toffoli."""


class PathBudgetExceeded(PostsimError):
    """Path enumeration would exceed the configured Hadamard budget."""


class PreconditionViolated(PostsimError, ValueError):
    """An operation was called outside its documented domain."""
