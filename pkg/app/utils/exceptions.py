from fastapi import status


# ═══════════════════════════════════════════════════════════════════════════════
# ERROR CODES: Machine-readable constants for API clients and CLI scripts
# ═══════════════════════════════════════════════════════════════════════════════
class ErrorCode:
    CONFIG_ERROR            = "CONFIG_ERROR"
    USAGE_ERROR             = "USAGE_ERROR"
    DIMENSION_ERROR         = "DIMENSION_ERROR"
    SIZE_ERROR              = "SIZE_ERROR"
    DOMAIN_ERROR            = "DOMAIN_ERROR"
    INVARIANT_ERROR         = "INVARIANT_ERROR"
    LINALG_ERROR            = "LINALG_ERROR"
    STEP_ERROR              = "STEP_ERROR"
    NOT_FOUND               = "NOT_FOUND"
    REGISTRY_ERROR          = "REGISTRY_ERROR"
    INTERNAL_SERVER_ERROR   = "INTERNAL_SERVER_ERROR"


# ═══════════════════════════════════════════════════════════════════════════════
# EXIT CODES: CLI process status
# ═══════════════════════════════════════════════════════════════════════════════
class ExitCode:
    SUCCESS           = 0
    CONFIG_ERROR      = 2
    NUMERICAL_FAILURE = 3


# ═══════════════════════════════════════════════════════════════════════════════
# BASE EXCEPTION
# ═══════════════════════════════════════════════════════════════════════════════
class AppException(Exception):
    """
    Base exception for all application-level errors.
    Carries a machine-readable error_code for the HTTP envelope and an
    exit_code for the command line.
    """
    def __init__(
        self,
        status_code: int,
        message: str,
        error_code: str,
        exit_code: int = ExitCode.CONFIG_ERROR,
        details: list | None = None,
        field: str | None = None,
    ):
        super().__init__(message)
        self.status_code = status_code
        self.exit_code = exit_code
        self.detail = {
            "message": message,
            "error": {
                "code": error_code,
                "details": details,
                "field": field,
            }
        }

    @property
    def message(self) -> str:
        return self.detail["message"]

    @property
    def error_code(self) -> str:
        return self.detail["error"]["code"]

    def envelope(self) -> dict:
        return {"success": False, **self.detail}


# ═══════════════════════════════════════════════════════════════════════════════
# CONFIGURATION / INPUT ERRORS (exit 2)
# ═══════════════════════════════════════════════════════════════════════════════

class ConfigException(AppException):
    def __init__(self, message: str, field: str | None = None, details: list | None = None):
        super().__init__(status.HTTP_400_BAD_REQUEST, message, ErrorCode.CONFIG_ERROR,
                         details=details, field=field)


class UsageException(AppException):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(status.HTTP_400_BAD_REQUEST, message, ErrorCode.USAGE_ERROR, field=field)


class DimensionException(AppException):
    def __init__(self, message: str = "Inconsistent matrix dimensions", field: str | None = None):
        super().__init__(status.HTTP_400_BAD_REQUEST, message, ErrorCode.DIMENSION_ERROR, field=field)


class SizeException(AppException):
    def __init__(self, message: str = "Collection is too small for this operation"):
        super().__init__(status.HTTP_400_BAD_REQUEST, message, ErrorCode.SIZE_ERROR)


class DomainException(AppException):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(status.HTTP_400_BAD_REQUEST, message, ErrorCode.DOMAIN_ERROR, field=field)


class NotFoundException(AppException):
    def __init__(self, resource: str = "Resource"):
        super().__init__(status.HTTP_404_NOT_FOUND, f"{resource} not found", ErrorCode.NOT_FOUND)


# ═══════════════════════════════════════════════════════════════════════════════
# NUMERICAL FAILURES (exit 3)
# ═══════════════════════════════════════════════════════════════════════════════

class InvariantException(AppException):
    def __init__(self, message: str):
        super().__init__(status.HTTP_422_UNPROCESSABLE_ENTITY, message, ErrorCode.INVARIANT_ERROR,
                         exit_code=ExitCode.NUMERICAL_FAILURE)


class LinearAlgebraException(AppException):
    def __init__(self, message: str = "Matrix is not Hermitian positive definite"):
        super().__init__(status.HTTP_422_UNPROCESSABLE_ENTITY, message, ErrorCode.LINALG_ERROR,
                         exit_code=ExitCode.NUMERICAL_FAILURE)


class StepException(AppException):
    def __init__(self, message: str = "Retraction produced a zero-norm column"):
        super().__init__(status.HTTP_422_UNPROCESSABLE_ENTITY, message, ErrorCode.STEP_ERROR,
                         exit_code=ExitCode.NUMERICAL_FAILURE)


# ═══════════════════════════════════════════════════════════════════════════════
# HELPERS
# ═══════════════════════════════════════════════════════════════════════════════

def validation_details(errors: list[dict]) -> list[dict]:
    """Flattens pydantic error dicts into field/message pairs."""
    details = []
    for error in errors:
        # loc is a tuple like ("body", "sys", "T")
        loc = error.get("loc", [])
        field = ".".join(str(l) for l in loc if l != "body") if loc else "unknown"
        details.append({
            "field": field or "root",
            "message": error.get("msg", "Invalid value"),
        })
    return details
