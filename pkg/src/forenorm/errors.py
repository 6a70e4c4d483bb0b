"""Exception hierarchy.

Record-level ingestion problems are raised internally, caught by the adapter,
and handed back in ``IngestResult.skipped`` so that one dirty row never costs
the rest of the file.
"""

from __future__ import annotations

from typing import Optional


class ForenormError(Exception):
    """Base class for every error raised by this package."""


# ingestion ---------------------------------------------------------------


class IngestError(ForenormError):
    def __init__(self, message: str, *, path: Optional[str] = None,
                 locator: Optional[str] = None):
        super().__init__(message)
        self.path = path
        self.locator = locator

    def __str__(self) -> str:
        where = ":".join(p for p in (self.path, self.locator) if p)
        msg = super().__str__()
        return f"{where}: {type(self).__name__}: {msg}" if where else msg


class MalformedHeader(IngestError):
    pass


class RowArityError(IngestError):
    pass


class MalformedRecord(IngestError):
    pass


class MalformedDocument(IngestError):
    pass


class TableNotFound(IngestError):
    pass


class UnreadableDatabase(IngestError):
    pass


# profiles and rule files ---------------------------------------------------


class ProfileError(ForenormError):
    pass


class ProfileSyntaxError(ProfileError):
    pass


class DuplicateSourceKey(ProfileError):
    pass


class UnknownCategory(ProfileError):
    pass


class UnknownDomain(ProfileError):
    pass


class RuleSyntaxError(ForenormError):
    pass


# correlation ---------------------------------------------------------------


class UnboundPlaceholder(ForenormError):
    def __init__(self, rule: str, trace_id: str, key: str):
        super().__init__(f"rule {rule!r}: placeholder ${key} unbound on {trace_id}")
        self.rule = rule
        self.trace_id = trace_id
        self.key = key


# exchange ------------------------------------------------------------------


class InvalidCollection(ForenormError):
    def __init__(self, report):
        self.report = report
        super().__init__("; ".join(str(v) for v in report.violations))


class DocumentSyntaxError(ForenormError):
    """Wire document is not well-formed JSON text."""


class SchemaError(ForenormError):
    pass


class IntegrityError(ForenormError):
    pass


# verification --------------------------------------------------------------


class EmptyAnswerKey(ForenormError):
    pass


class AnswerKeySyntaxError(ForenormError):
    pass
