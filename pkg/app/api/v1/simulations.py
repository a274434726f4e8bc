from fastapi import APIRouter, Depends
from sqlalchemy.orm import Session

from app.database import get_db
from app.schemas.common import success_response
from app.schemas.run_spec import Command, SimulationRequest
from app.services.run_service import run_service

router = APIRouter(prefix="/simulations")


@router.post("", summary="Monte-Carlo symbol error rate over an SNR grid")
def simulate(body: SimulationRequest, db: Session = Depends(get_db)):
    outcome = run_service.execute(body.to_spec(Command.SIMULATE), db)
    return success_response("Simulation finished", outcome.data)
