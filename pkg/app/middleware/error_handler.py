import logging
import traceback
from fastapi import Request, status
from fastapi.responses import JSONResponse
from fastapi.exceptions import RequestValidationError
from pydantic import ValidationError
from sqlalchemy.exc import SQLAlchemyError
from app.utils.exceptions import AppException, ErrorCode, validation_details

logger = logging.getLogger(__name__)


def _config_error(details: list[dict]) -> JSONResponse:
    return JSONResponse(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        content={
            "success": False,
            "message": "Invalid configuration. Please check your input.",
            "error": {
                "code": ErrorCode.CONFIG_ERROR,
                "details": details,
                "field": None,
            }
        }
    )


async def app_exception_handler(request: Request, exc: AppException) -> JSONResponse:
    """Handle all AppException subclasses (our custom exceptions)."""
    if exc.status_code >= 422:
        logger.warning(f"{exc.error_code} on {request.method} {request.url}: {exc.message}")
    return JSONResponse(status_code=exc.status_code, content=exc.envelope())


async def validation_exception_handler(request: Request, exc: RequestValidationError) -> JSONResponse:
    """Malformed request bodies (422)."""
    return _config_error(validation_details(exc.errors()))


async def spec_validation_handler(request: Request, exc: ValidationError) -> JSONResponse:
    """
    RunSpec assembled inside a route failed its cross-field checks.
    Same envelope as a malformed body.
    """
    return _config_error(validation_details(exc.errors()))


async def registry_error_handler(request: Request, exc: SQLAlchemyError) -> JSONResponse:
    """
    Run registry queries that fail (missing table, locked SQLite file).
    Prevents raw DB errors from leaking to the client.
    """
    logger.warning(f"Registry error on {request.method} {request.url}: {exc}")
    return JSONResponse(
        status_code=status.HTTP_503_SERVICE_UNAVAILABLE,
        content={
            "success": False,
            "message": "The run registry is unavailable.",
            "error": {
                "code": ErrorCode.REGISTRY_ERROR,
                "details": None,
                "field": None,
            }
        }
    )


async def generic_exception_handler(request: Request, exc: Exception) -> JSONResponse:
    """
    Catch-all handler for unexpected exceptions.
    Logs the full traceback, returns a safe 500 response.
    """
    logger.error(
        f"Unhandled exception on {request.method} {request.url}\n"
        f"{traceback.format_exc()}"
    )
    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content={
            "success": False,
            "message": "An unexpected error occurred. Please try again later.",
            "error": {
                "code": ErrorCode.INTERNAL_SERVER_ERROR,
                "details": None,
                "field": None,
            }
        }
    )
