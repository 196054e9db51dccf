"""Exception hierarchy.

Each class carries a ``category`` string; the command-line front end maps it
to a documented exit code.
"""


class EddpcError(Exception):
    category = "error"


class InputError(EddpcError, ValueError):
    """Malformed or dimensionally inconsistent input."""

    category = "dimension"


class ParseError(InputError):
    category = "parse"


class WindowError(InputError):
    """A requested window or Hankel depth does not fit the data."""


class ConfigurationError(InputError):
    """Parameters that are individually valid but mutually incompatible."""


class StructuralError(EddpcError):
    """A system fails a structural property (observability, controllability)."""

    category = "dimension"


class NoUniqueEquilibriumError(StructuralError):
    pass


class GenerationError(EddpcError):
    """Randomised generation ran out of retries."""

    category = "excitation"


class InsufficientExcitationError(EddpcError):
    """Data does not carry enough information for the requested representation."""

    category = "excitation"


class RankMismatchError(InsufficientExcitationError):
    pass


class DegenerateKernelError(EddpcError):
    """The assembled banded kernel matrix has the wrong nullity."""

    category = "excitation"


class InfeasibleError(EddpcError):
    category = "infeasible"


class SolverError(EddpcError):
    category = "solver"


class EquivalenceError(EddpcError):
    """Schemes that should agree produced different closed loops."""

    category = "mismatch"
