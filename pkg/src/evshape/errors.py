"""Exception types shared across the pipeline.

Invalid in-memory arguments raise plain ValueError; these classes cover
failures that map to distinct CLI exit codes.
"""


class FormatError(Exception):
    """A file exists but its contents violate the expected format."""


class MissingArtifactError(Exception):
    """A required scene artifact (file) is absent."""


class NumericError(Exception):
    """A NaN/Inf was produced where finite values are required."""
