"""Domain errors shared by the services and the CLI.

Every error carries a stable ``code`` (what API responses and the CLI
print), a human message, and an optional ``details`` payload.
"""

from __future__ import annotations

from typing import Any


class DomainError(Exception):
    """Base class for all ScooterLab domain failures."""

    code = "domain_error"
    http_status = 400

    def __init__(self, message: str, details: Any = None):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_obj(self) -> dict:
        return {"code": self.code, "message": self.message, "details": self.details}


class MalformedInput(DomainError):
    code = "malformed_input"
    http_status = 400


class MalformedChunk(MalformedInput):
    code = "malformed_chunk"


class AuthFailure(DomainError):
    code = "auth_failure"
    http_status = 401


class BadCredential(DomainError):
    code = "bad_credential"
    http_status = 401


class ExpiredToken(DomainError):
    code = "expired_token"
    http_status = 401


class Forbidden(DomainError):
    code = "forbidden"
    http_status = 403


class UnknownScooter(DomainError):
    code = "unknown_scooter"
    http_status = 404


class UnknownTrip(DomainError):
    code = "unknown_trip"
    http_status = 404


class UnknownLoan(DomainError):
    code = "unknown_loan"
    http_status = 404


class UnknownProject(DomainError):
    code = "unknown_project"
    http_status = 404


class UnknownUser(DomainError):
    code = "unknown_user"
    http_status = 404


class DuplicateName(DomainError):
    code = "duplicate_name"
    http_status = 409


class DigestMismatch(DomainError):
    code = "digest_mismatch"
    http_status = 409


class ChunkCountConflict(DomainError):
    code = "chunk_count_conflict"
    http_status = 409


class ScooterUnavailable(DomainError):
    code = "scooter_unavailable"
    http_status = 409


class LoanNotActive(DomainError):
    code = "loan_not_active"
    http_status = 409


class MissingAcknowledgment(DomainError):
    """Raised when a loan/renewal is attempted without all rider acks.

    ``details`` lists which acknowledgments are missing.
    """

    code = "missing_acknowledgment"
    http_status = 400


class FleetConflict(DomainError):
    """A scooter is already allocated to another active project."""

    code = "fleet_conflict"
    http_status = 409


class InvalidPolicy(DomainError):
    """Policy validation failed; ``details`` is the complete violation list."""

    code = "invalid_policy"
    http_status = 400


class InvalidFilter(DomainError):
    code = "invalid_filter"
    http_status = 400


class UnsupportedFormat(DomainError):
    code = "unsupported_format"
    http_status = 400
