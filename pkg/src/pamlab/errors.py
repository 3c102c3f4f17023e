"""Exception taxonomy shared by all subcommands.

Exit codes: 0 success, 2 usage/config, 3 invariant failure, 4 resource.
"""


class PamlabError(Exception):
    exit_code = 1


class UsageError(PamlabError):
    """Bad CLI usage or malformed/invalid configuration."""

    exit_code = 2


class ConfigError(UsageError):
    pass


class InvariantError(PamlabError):
    """A hard mathematical invariant (identity, positivity, coverage) failed."""

    exit_code = 3


class CoverageError(InvariantError):
    """Requested sites/times are not covered by the tabulated box or grid."""


class ResourceError(PamlabError):
    """Memory or size budget exceeded."""

    exit_code = 4
