"""Shared error base.

Every domain error in the package subclasses GoalfoldError; the class name
doubles as the machine-readable reason code used by the CLI and the HTTP
service.
"""


class GoalfoldError(Exception):
    """Base for all domain errors raised by this package."""

    @property
    def code(self) -> str:
        return type(self).__name__
