from fastapi import APIRouter, Depends, status
from sqlalchemy.orm import Session

from app.database import get_db
from app.schemas.common import success_response
from app.schemas.run_spec import Command, DesignRequest
from app.services.run_service import run_service

router = APIRouter(prefix="/designs")


@router.post("", status_code=status.HTTP_201_CREATED, summary="Optimize a joint codebook")
def create_design(body: DesignRequest, db: Session = Depends(get_db)):
    outcome = run_service.execute(body.to_spec(Command.DESIGN), db)
    return success_response("Joint codebook designed", {"summary": outcome.summary, "joint": outcome.data})
