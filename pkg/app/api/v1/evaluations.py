from fastapi import APIRouter, Depends
from sqlalchemy.orm import Session

from app.database import get_db
from app.schemas.common import success_response
from app.schemas.run_spec import Command, EvaluationRequest
from app.services.run_service import run_service

router = APIRouter(prefix="/evaluations")


@router.post("", summary="Metric rows of a joint codebook over an SNR grid")
def evaluate(body: EvaluationRequest, db: Session = Depends(get_db)):
    outcome = run_service.execute(body.to_spec(Command.EVALUATE), db)
    return success_response("Codebook evaluated", outcome.data)
