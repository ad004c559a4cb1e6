"""Exception hierarchy shared by all kaonlab modules."""

from __future__ import annotations


class KaonlabError(Exception):
    """Base class for every error raised by kaonlab."""


class InvalidParameterError(KaonlabError, ValueError):
    """A physical parameter is outside its allowed range."""


class DomainError(KaonlabError, ValueError):
    """An argument lies outside the domain of a physics operation."""


class InvalidSpecError(KaonlabError, ValueError):
    """A measurement specification is malformed."""


class BracketError(KaonlabError, ValueError):
    """A root-finding bracket does not enclose a sign change."""


class DegenerateStateError(KaonlabError, ValueError):
    """A density matrix cannot be normalized."""


class UnsupportedInputError(KaonlabError, ValueError):
    """The input is valid physics but outside what the routine handles."""


class ConfigError(KaonlabError, ValueError):
    """A configuration file or override is invalid."""


class DataFormatError(KaonlabError, ValueError):
    """A data file does not follow the expected CSV schema.

    Parameters
    ----------
    message : str
        Human-readable description.
    line : int, optional
        1-based line number in the offending file.
    column : str, optional
        Column name involved in the error.
    """

    def __init__(self, message: str, line: int | None = None, column: str | None = None):
        self.line = line
        self.column = column
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
