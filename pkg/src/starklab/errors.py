"""Exception types shared across the package."""


class StarklabError(Exception):
    """Base class for all package errors."""


class ConfigError(StarklabError):
    """Invalid user input or configuration (CLI exit code 2)."""


class ConvergenceError(StarklabError):
    """A numerical routine failed to reach its requested tolerance."""


class BoundaryFluxError(ConvergenceError):
    """Wave packet reached the open boundary; rerun with a larger lattice."""


class UnsupportedOrientationError(StarklabError):
    """Field orientation outside the validity domain of an expansion."""
