"""Exception types shared across the package.

The CLI maps each class to a distinct process exit code, so library code
should raise these rather than bare ValueError/RuntimeError wherever the
failure is a user-facing condition.
"""


class DomainError(ValueError):
    """An argument is outside its physical or mathematical domain."""


class SolverError(RuntimeError):
    """A numerical solver could not produce a result (e.g. no bracketed root)."""


class ConfigError(ValueError):
    """Invalid configuration or an inconsistent combination of options."""
