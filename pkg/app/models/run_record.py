import enum

from sqlalchemy import Column, Integer, String, Text, Float, Enum, TIMESTAMP
from sqlalchemy.sql import func
from app.database import Base


class RunStatus(str, enum.Enum):
    SUCCEEDED = "SUCCEEDED"
    FAILED    = "FAILED"


class RunRecord(Base):
    __tablename__ = "run_records"

    id              = Column(Integer, primary_key=True, index=True)
    command         = Column(String(32), nullable=False, index=True)   # generate, design, partition, ...
    status          = Column(Enum(RunStatus), nullable=False)
    specJson        = Column(Text, nullable=False)                      # validated RunSpec
    summaryJson     = Column(Text, nullable=True)                       # headline numbers or error envelope
    outputPath      = Column(String(1024), nullable=True)
    durationSeconds = Column(Float, nullable=True)
    createdAt       = Column(TIMESTAMP(timezone=True), server_default=func.now(), nullable=False)

    def __repr__(self):
        return f"<RunRecord id={self.id} command={self.command} status={self.status}>"
