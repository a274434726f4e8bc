import json

from sqlalchemy.orm import Session
from app.models.run_record import RunRecord, RunStatus


def log_run(
    db: Session,
    command: str,
    status: RunStatus,
    spec: dict,
    summary: dict | None = None,
    output_path: str | None = None,
    duration: float | None = None,
) -> RunRecord:
    """
    Add a run registry entry.

    Args:
        db:          Active DB session (adds but does NOT commit; the caller commits)
        command:     generate, design, partition, evaluate or simulate
        status:      SUCCEEDED or FAILED
        spec:        The validated run spec as a JSON-compatible dict
        summary:     Headline numbers, or the error envelope of a failed run
        output_path: Main artifact written by the run
        duration:    Wall-clock seconds

    Usage:
        log_run(db, "design", RunStatus.SUCCEEDED, spec.model_dump(mode="json"),
                {"d_min": 115.3}, "out/joint.json", 42.0)
        db.commit()
    """
    entry = RunRecord(
        command=command,
        status=status,
        specJson=json.dumps(spec),
        summaryJson=None if summary is None else json.dumps(summary),
        outputPath=output_path,
        durationSeconds=duration,
    )
    db.add(entry)
    return entry
