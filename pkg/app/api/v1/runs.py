from fastapi import APIRouter, Depends, Query
from sqlalchemy.orm import Session
from typing import Optional

from app.database import get_db
from app.schemas.common import success_response, paginated_response
from app.services.run_service import run_service

router = APIRouter(prefix="/runs")


@router.get("", summary="List recorded runs (paginated, newest first)")
def list_runs(
    page:    int           = Query(1, ge=1),
    limit:   int           = Query(20, ge=1, le=100),
    command: Optional[str] = Query(None, description="generate | design | partition | evaluate | simulate"),
    status:  Optional[str] = Query(None, description="SUCCEEDED | FAILED"),
    db:      Session       = Depends(get_db),
):
    data, total = run_service.list_runs(db, page, limit, command, status)
    return paginated_response("Runs retrieved successfully", data, total, page, limit)


@router.get("/{run_id}", summary="Get run by ID")
def get_run(run_id: int, db: Session = Depends(get_db)):
    return success_response("Run retrieved", run_service.get_run(db, run_id))
