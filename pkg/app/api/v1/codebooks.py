from fastapi import APIRouter, Depends, status
from sqlalchemy.orm import Session

from app.database import get_db
from app.schemas.common import success_response
from app.schemas.run_spec import Command, GenerateRequest, IdentifiabilityRequest, PartitionRequest
from app.services.constellation_service import constellation_service
from app.services.run_service import run_service

router = APIRouter(prefix="/codebooks")


@router.post("/generate", status_code=status.HTTP_201_CREATED, summary="Design a single-user codebook (chordal)")
def generate(body: GenerateRequest, db: Session = Depends(get_db)):
    outcome = run_service.execute(body.to_spec(Command.GENERATE), db)
    return success_response("Codebook generated", {"summary": outcome.summary, "codebook": outcome.data})


@router.post("/partition", summary="Split a base codebook between the two users")
def partition(body: PartitionRequest, db: Session = Depends(get_db)):
    outcome = run_service.execute(body.to_spec(Command.PARTITION), db)
    return success_response("Codebook partitioned", {"summary": outcome.summary, "joint": outcome.data})


@router.post("/identifiability", summary="List joint symbol pairs with equal Gram matrices")
def identifiability(body: IdentifiabilityRequest):
    pairs = constellation_service.check_identifiability(body.joint.to_joint(), body.tol)
    return success_response(
        "Joint codebook is identifiable" if not pairs else f"{len(pairs)} unidentifiable pair(s)",
        {"identifiable": not pairs, "pairs": [list(p) for p in pairs]},
    )
