"""Exception hierarchy.

Findings about metadata content are reported as :class:`~chmeta.diagnostics.Diagnostic`
values, never raised. Exceptions are reserved for malformed input to the parsers,
unreadable files, bad configuration and refused workflow operations.
"""

from __future__ import annotations


class ChmetaError(Exception):
    """Base class for every error raised by this package."""


# -- value parsing ---------------------------------------------------------


class ParseError(ChmetaError, ValueError):
    """A text value does not match its grammar."""


class NotTwoParts(ParseError):
    pass


class CategoryOutOfRange(ParseError):
    pass


class SequenceNotPositiveInteger(ParseError):
    pass


class NonCanonicalForm(ParseError):
    pass


class GrammarMismatch(ParseError):
    pass


class CalendarInvalid(ParseError):
    pass


class ReversedRange(ParseError):
    pass


RangeReversed = ReversedRange


class MissingPrefix(ParseError):
    pass


class EmptyName(ParseError):
    pass


class SecIdInvalid(ParseError):
    pass


# -- files -----------------------------------------------------------------


class WorkbookError(ChmetaError):
    """A workbook or catalog on disk cannot be read as the expected format."""

    def __init__(self, message: str, *, path: object = None, row: int | None = None):
        self.path = path
        self.row = row
        where = ""
        if path is not None:
            where = f"{path}"
            if row is not None:
                where += f":{row}"
            where += ": "
        super().__init__(where + message)


class MissingManifest(WorkbookError):
    pass


class MissingSheet(WorkbookError):
    pass


class HeaderUnknownField(WorkbookError):
    pass


class DuplicateHeader(WorkbookError):
    pass


class EncodingError(WorkbookError):
    pass


class UnreadableFile(WorkbookError):
    pass


class MapSheetError(WorkbookError):
    """A map.csv row is malformed or repeats a (card_no, role) pair."""


class SecFormatError(WorkbookError):
    pass


class ConfigError(ChmetaError):
    """Schema, mapping or IRI policy configuration is invalid."""


# -- operations ------------------------------------------------------------


class SchemaDowngrade(ChmetaError):
    pass


class PreconditionViolated(ChmetaError):
    pass


class MapSheetAbsent(ChmetaError):
    pass


class ProposalNotPending(ChmetaError):
    pass


class TargetMissing(ChmetaError):
    pass


class UnitNotAccepted(ChmetaError):
    pass


class EmptyInput(ChmetaError):
    pass


class MetricIncomplete(ChmetaError):
    pass


class IllegalTransition(ChmetaError):
    pass


class NotEnoughUnits(ChmetaError):
    pass


class HolderMismatch(ChmetaError):
    pass
