import json
import logging
import math
import time

from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import Session

from app.config import settings
from app.models.codebook import JointCodebook
from app.models.oblique import ObliquePoint
from app.models.run_record import RunRecord, RunStatus
from app.schemas.codebook import CodebookFile, JointCodebookFile
from app.schemas.metrics import EvaluationRow
from app.schemas.optimizer import Criterion, OptimizerConfig, OptimizationTrace
from app.schemas.run_spec import Command, RunOutcome, RunSpec
from app.schemas.simulation import Scheme
from app.schemas.system import db_to_linear
from app.services.constellation_service import constellation_service
from app.services.metrics_service import metrics_service
from app.services.optimizer_service import optimizer_service
from app.services.simulator_service import simulator_service
from app.utils.exceptions import AppException, ConfigException, NotFoundException
from app.utils.run_log import log_run
from app.utils.tables import write_csv

logger = logging.getLogger(__name__)


def _require_single_antenna(spec: RunSpec) -> None:
    if spec.sys.M1 != 1 or spec.sys.M2 != 1:
        raise ConfigException(f"{spec.command.value} designs single-antenna users only (M1 = M2 = 1)", field="M")


def _serialize(r: RunRecord) -> dict:
    return {
        "id":              r.id,
        "command":         r.command,
        "status":          r.status.value,
        "spec":            json.loads(r.specJson),
        "summary":         None if r.summaryJson is None else json.loads(r.summaryJson),
        "outputPath":      r.outputPath,
        "durationSeconds": r.durationSeconds,
        "createdAt":       r.createdAt.isoformat() if r.createdAt else None,
    }


class RunService:

    # ─── Entry point ──────────────────────────────────────────────────────────
    def execute(self, spec: RunSpec, db: Session | None = None) -> RunOutcome:
        """Runs one validated spec and records it in the registry when a session is given."""
        handlers = {
            Command.GENERATE:  self.generate,
            Command.DESIGN:    self.design,
            Command.PARTITION: self.partition,
            Command.EVALUATE:  self.evaluate,
            Command.SIMULATE:  self.simulate,
        }
        logger.info(f"Starting {spec.command.value}")
        started = time.perf_counter()
        try:
            outcome = handlers[spec.command](spec)
        except AppException as e:
            self._record(db, spec, RunStatus.FAILED, e.envelope(), None, time.perf_counter() - started)
            raise
        elapsed = time.perf_counter() - started
        self._record(db, spec, RunStatus.SUCCEEDED, outcome.summary, outcome.output_path, elapsed)
        logger.info(f"Finished {spec.command.value} in {elapsed:.2f}s")
        return outcome

    def _record(self, db: Session | None, spec: RunSpec, status: RunStatus,
                summary: dict, output_path: str | None, duration: float) -> None:
        if db is None or not settings.RECORD_RUNS:
            return
        try:
            log_run(db, spec.command.value, status, spec.manifest(), summary, output_path, duration)
            db.commit()
        except SQLAlchemyError as e:
            db.rollback()
            logger.warning(f"Run registry unavailable, {spec.command.value} not recorded: {e}")

    def _inline_joint(self, spec: RunSpec) -> JointCodebook | None:
        return spec.joint.to_joint() if spec.joint else None

    def _load_joint(self, spec: RunSpec) -> JointCodebook:
        joint = self._inline_joint(spec)
        return joint if joint is not None else constellation_service.load_joint(spec.io.input)

    def _write_traces(self, spec: RunSpec, traces: OptimizationTrace | list[OptimizationTrace]) -> None:
        if spec.io.trace:
            optimizer_service.write_trace(traces, spec.io.trace)

    # ─── Registry ─────────────────────────────────────────────────────────────
    def list_runs(
        self, db: Session, page: int, limit: int,
        command: str | None = None, status: str | None = None,
    ) -> tuple[list[dict], int]:
        q = db.query(RunRecord)
        if command:
            q = q.filter(RunRecord.command == command)
        if status:
            q = q.filter(RunRecord.status == status)

        total = q.count()
        items = q.order_by(RunRecord.id.desc()).offset((page - 1) * limit).limit(limit).all()
        return [_serialize(r) for r in items], total

    def get_run(self, db: Session, run_id: int) -> dict:
        r = db.query(RunRecord).filter(RunRecord.id == run_id).first()
        if not r:
            raise NotFoundException("Run")
        return _serialize(r)

    # ─── Commands ─────────────────────────────────────────────────────────────
    def generate(self, spec: RunSpec) -> RunOutcome:
        _require_single_antenna(spec)
        opt = spec.opt or OptimizerConfig()
        size = spec.codebook_size
        if size < 2:
            raise ConfigException("generate needs at least two lines", field="size")
        T, P = spec.sys.T, opt.design_snr

        start = constellation_service.random_grassmannian(T, 1, size, P, opt.seed)
        codebook, trace = optimizer_service.design_single_user(T, size, opt)
        summary = {
            "T": T,
            "size": size,
            "power": P,
            "chordal_initial": metrics_service.single_user_chordal(start.symbols, P),
            "chordal_final": metrics_service.single_user_chordal(codebook.symbols, P),
            **trace.summary(),
        }
        if spec.io.output:
            constellation_service.save_codebook(codebook, spec.io.output)
        self._write_traces(spec, trace)
        return RunOutcome(command=spec.command, summary=summary, output_path=spec.io.output,
                          data=CodebookFile.from_codebook(codebook).model_dump())

    def design(self, spec: RunSpec) -> RunOutcome:
        _require_single_antenna(spec)
        opt, sys = spec.opt, spec.sys
        K, T, P = spec.codebook_size, sys.T, opt.design_snr

        traces: list[OptimizationTrace] = []
        if opt.criterion == Criterion.CHORDAL:
            base, trace = optimizer_service.design_single_user(T, 2 * K, opt)
            traces.append(trace)
            joint = constellation_service.partition(base, spec.strategy, spec.seed)
        else:
            init = self._inline_joint(spec)
            if init is None:
                init = JointCodebook(
                    constellation_service.random_grassmannian(T, 1, K, P, opt.seed),
                    constellation_service.random_grassmannian(T, 1, K, P, opt.seed + 1),
                )
            if opt.criterion in (Criterion.ALT_D12, Criterion.ALT_D21):
                joint = optimizer_service.alternating_optimize(init, opt, sys, spec.rounds, traces)
            else:
                joint, trace = optimizer_service.optimize(ObliquePoint.from_joint(init), opt, sys)
                traces.append(trace)

        report = metrics_service.report(joint, sys.N)
        violations = constellation_service.check_identifiability(joint, spec.tol)
        summary = {
            "criterion": opt.criterion.value,
            "sizes": [joint.user1.size, joint.user2.size],
            "power": P,
            **report.model_dump(),
            "identifiable": not violations,
            "iterations": sum(len(t.rows) - 1 for t in traces),
        }
        if spec.io.output:
            constellation_service.save_joint(joint, spec.io.output)
        if traces:
            self._write_traces(spec, traces)
        return RunOutcome(command=spec.command, summary=summary, output_path=spec.io.output,
                          data=JointCodebookFile.from_joint(joint).model_dump())

    def partition(self, spec: RunSpec) -> RunOutcome:
        base = spec.base.to_codebook() if spec.base else constellation_service.load_codebook(spec.io.input)
        joint = constellation_service.partition(base, spec.strategy, spec.seed)
        c = metrics_service.chordal_objective(joint)
        summary = {
            "strategy": spec.strategy.value,
            "sizes": [joint.user1.size, joint.user2.size],
            "chordal": c,
        }
        summary["d12"], summary["d21"] = metrics_service.separations(joint)
        if c <= 1.0 / base.M:
            bound = metrics_service.sufficient_bound(c, base.power, base.T, base.M)
            # None when the bound is vacuous
            summary["sufficient_bound"] = bound if math.isfinite(bound) else None
        if spec.io.output:
            constellation_service.save_joint(joint, spec.io.output)
        return RunOutcome(command=spec.command, summary=summary, output_path=spec.io.output,
                          data=JointCodebookFile.from_joint(joint).model_dump())

    def evaluate(self, spec: RunSpec) -> RunOutcome:
        joint = self._load_joint(spec)
        powers = [db_to_linear(s) for s in spec.snr_grid_db]
        rows = [
            EvaluationRow(snr_db=snr_db, **values)
            for snr_db, values in zip(spec.snr_grid_db, metrics_service.evaluate_grid(joint, spec.sys.N, powers))
        ]
        if spec.io.output:
            write_csv(spec.io.output, EvaluationRow.CSV_COLUMNS, [r.model_dump() for r in rows])
        summary = {"points": len(rows), "N": spec.sys.N, "sizes": [joint.user1.size, joint.user2.size]}
        return RunOutcome(command=spec.command, summary=summary, output_path=spec.io.output,
                          data=[r.model_dump() for r in rows])

    def simulate(self, spec: RunSpec) -> RunOutcome:
        sim = spec.sim
        joint = self._load_joint(spec) if sim.scheme == Scheme.JOINT_ML else None
        result = simulator_service.simulate_ser(joint, spec.sys, sim)
        if spec.io.output:
            simulator_service.write_result(result, spec.io.output)
        summary = {
            "scheme": sim.scheme.value,
            "points": len(result.points),
            "blocks": sim.num_blocks,
            "joint_ser": [p.joint_ser for p in result.points],
        }
        if sim.pep_trials:
            summary["pep_worst"] = [p.pep_worst for p in result.points]
        return RunOutcome(command=spec.command, summary=summary, output_path=spec.io.output,
                          data=result.model_dump(mode="json"))


run_service = RunService()
