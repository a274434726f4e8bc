import logging
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.exceptions import RequestValidationError
from pydantic import ValidationError
from sqlalchemy.exc import SQLAlchemyError

from app.config import settings
from app.database import check_db_connection, ensure_schema
from app.utils.exceptions import AppException
from app.middleware.error_handler import (
    app_exception_handler,
    validation_exception_handler,
    spec_validation_handler,
    registry_error_handler,
    generic_exception_handler,
)

from app.api.v1 import codebooks
from app.api.v1 import designs
from app.api.v1 import evaluations
from app.api.v1 import simulations
from app.api.v1 import runs

VERSION = "1.0.0"

logging.basicConfig(
    level=settings.LOG_LEVEL,
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)


def create_app() -> FastAPI:
    app = FastAPI(
        title=settings.APP_NAME,
        version=VERSION,
        description="Joint constellation design and evaluation for the two-user non-coherent MIMO MAC",
        docs_url="/docs",
        redoc_url="/redoc",
        openapi_url="/openapi.json",
    )

    # ─── CORS ─────────────────────────────────────────────────────────────────
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    # ─── Exception Handlers ───────────────────────────────────────────────────
    app.add_exception_handler(AppException, app_exception_handler)
    app.add_exception_handler(RequestValidationError, validation_exception_handler)
    app.add_exception_handler(ValidationError, spec_validation_handler)
    app.add_exception_handler(SQLAlchemyError, registry_error_handler)
    app.add_exception_handler(Exception, generic_exception_handler)

    # ─── Routers ──────────────────────────────────────────────────────────────
    PREFIX = "/api/v1"
    app.include_router(codebooks.router,   prefix=PREFIX, tags=["Codebooks"])
    app.include_router(designs.router,     prefix=PREFIX, tags=["Designs"])
    app.include_router(evaluations.router, prefix=PREFIX, tags=["Evaluations"])
    app.include_router(simulations.router, prefix=PREFIX, tags=["Simulations"])
    app.include_router(runs.router,        prefix=PREFIX, tags=["Runs"])

    # ─── Startup ──────────────────────────────────────────────────────────────
    @app.on_event("startup")
    def on_startup():
        ok = check_db_connection()
        logger.info("Run registry connected" if ok else "Run registry connection FAILED")
        if ok:
            ensure_schema()

    # ─── Health ───────────────────────────────────────────────────────────────
    @app.get("/health", tags=["Health"])
    def health():
        return {"status": "ok", "app": settings.APP_NAME, "version": VERSION}

    return app


app = create_app()

if __name__ == "__main__":
    import uvicorn
    uvicorn.run("app.main:app", host=settings.APP_HOST, port=settings.APP_PORT,
                reload=settings.is_development)
