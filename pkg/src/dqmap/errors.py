"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: validation problems exit 1, backend
failures exit 2, missing stage artifacts exit 3.
"""

from __future__ import annotations


class DQMError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(DQMError):
    """Malformed input, out-of-range parameter, or broken invariant."""


class BackendError(DQMError):
    """A scorer backend failed: transport error, bad response, or missing metadata."""


class MissingArtifactError(DQMError):
    """A pipeline stage was requested before its upstream artifacts exist."""
