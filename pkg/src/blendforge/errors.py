"""Exception hierarchy shared across the package."""

from __future__ import annotations


class BlendforgeError(Exception):
    """Base class for all package errors."""


class EmptyBlendError(BlendforgeError):
    """Blending was requested with zero total tonnage."""


class CurveDomainError(BlendforgeError):
    """A wash cut-point lies outside the curve's knot range, or washing was
    requested for a ROM that has no ash-yield curve."""


class OffSpecError(BlendforgeError):
    """Pricing was requested for a blend that fails its product's quality
    range; off-spec blends are unsaleable and never priced."""


class PlanStructureError(BlendforgeError):
    """A plan references unknown ids, has non-integral or negative lots, or
    is missing a cut-point for a washed ROM it uses."""


class UnknownRomError(BlendforgeError):
    """A ROM id does not exist in the scenario."""


class SpaceTooLargeError(BlendforgeError):
    """Exhaustive enumeration was refused because the plan space exceeds the
    caller's limit. Carries the exact count."""

    def __init__(self, count: int, limit: int):
        self.count = count
        self.limit = limit
        super().__init__(f"plan space has {count} members, exceeding limit {limit}")


class ValidationIssue:
    """One named validation failure with the offending field path."""

    __slots__ = ("code", "path", "message")

    def __init__(self, code: str, path: str, message: str):
        self.code = code
        self.path = path
        self.message = message

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"ValidationIssue({self.code!r}, {self.path!r}, {self.message!r})"

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, ValidationIssue)
            and (self.code, self.path, self.message)
            == (other.code, other.path, other.message)
        )

    def as_dict(self) -> dict:
        return {"code": self.code, "path": self.path, "message": self.message}


class DocumentError(BlendforgeError):
    """A scenario/plan document failed validation; carries every issue found."""

    def __init__(self, issues: list[ValidationIssue]):
        self.issues = issues
        lines = "; ".join(f"{i.code} at {i.path}: {i.message}" for i in issues)
        super().__init__(lines or "invalid document")


class DirectiveError(BlendforgeError):
    """A directive does not validate against the scenario or session."""


class DirectiveConflictError(DirectiveError):
    """Two directives contradict each other; carries the conflicting pair."""

    def __init__(self, first, second, reason: str):
        self.first = first
        self.second = second
        self.reason = reason
        super().__init__(f"conflicting directives: {reason}")


class RunLogError(BlendforgeError):
    """The run-log store is unavailable or unwritable."""
