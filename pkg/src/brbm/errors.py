"""Package exception types, mapped onto CLI exit codes by brbm.cli."""


class BrbmError(Exception):
    """Base class for package-specific failures."""


class ConfigError(BrbmError):
    """Invalid experiment configuration (CLI exit code 2)."""


class ResourceGuardError(BrbmError):
    """Population guard exceeded; results would be truncated (exit code 3)."""


class NumericalError(BrbmError):
    """Numerical failure: stability violation, front at domain edge (exit code 4)."""
