"""
Import all ORM models here so that:
1. Alembic can auto-detect them when generating migrations
2. `ensure_schema` registers every table on Base.metadata

Domain objects (Codebook, JointCodebook, ObliquePoint, PilotLayout, MLDetector)
are plain classes and live in their own modules.
"""

from app.models.run_record import RunRecord, RunStatus

__all__ = [
    "RunRecord",
    "RunStatus",
]
