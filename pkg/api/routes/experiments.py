"""
Experiment API Routes
Schedules harness runs in the background and reports their status and verdicts
"""

from dataclasses import dataclass, field, replace
from datetime import datetime
from threading import Lock
from typing import Dict, List, Optional
from uuid import uuid4

from fastapi import APIRouter, BackgroundTasks, HTTPException
from pydantic import BaseModel

from harness.config import ExperimentConfig
from harness.outputs import emit_outputs
from harness.selector import get_available_scenarios, run_scenario
from harness.settings import harness_settings
from skdv.errors import InvalidArgumentError, SkdvError
from skdv.utils.log import logger


@dataclass
class ExperimentRun:
    """State of one scheduled run"""

    run_id: str
    config: ExperimentConfig
    status: str = "created"  # "created", "running", "completed", "failed"
    output_dir: Optional[str] = None
    verdicts: Dict[str, bool] = field(default_factory=dict)
    passed: Optional[bool] = None
    start_time: datetime = field(default_factory=datetime.now)
    end_time: Optional[datetime] = None
    error_status: Optional[int] = None  # 422 invalid input, 500 anything else
    error_type: Optional[str] = None
    error_message: Optional[str] = None


class RunRegistry:
    """In-process registry of experiment runs; every read and write of a run holds the lock"""

    def __init__(self):
        self.runs: Dict[str, ExperimentRun] = {}
        self._lock = Lock()

    def create(self, config: ExperimentConfig) -> ExperimentRun:
        run_id = f"{config.scenario.value}_{uuid4().hex[:8]}"
        output_dir = config.output_dir or harness_settings.output_dir / run_id
        run = ExperimentRun(run_id=run_id, config=config, output_dir=str(output_dir))
        with self._lock:
            self.runs[run_id] = run
        return run

    def get(self, run_id: str) -> Optional[ExperimentRun]:
        with self._lock:
            run = self.runs.get(run_id)
            return replace(run) if run is not None else None

    def list(self) -> List[ExperimentRun]:
        with self._lock:
            runs = [replace(run) for run in self.runs.values()]
        return sorted(runs, key=lambda run: run.start_time)

    def _update(self, run_id: str, **changes) -> None:
        with self._lock:
            run = self.runs[run_id]
            for name, value in changes.items():
                setattr(run, name, value)

    def _fail(self, run_id: str, status: int, error_type: str, error: Exception) -> None:
        self._update(run_id, status="failed", error_status=status, error_type=error_type, error_message=str(error))

    def execute(self, run_id: str, threads: int = 1) -> None:
        """Run the scenario and write its outputs; failures are stored on the run, not raised"""
        with self._lock:
            run = self.runs[run_id]
            run.status = "running"
            config, output_dir = run.config, run.output_dir
        try:
            result = run_scenario(config, threads)
            emit_outputs(result, config, output_dir)
            self._update(run_id, verdicts=result.verdicts, passed=result.passed, status="completed")
        except InvalidArgumentError as e:
            self._fail(run_id, 422, "invalid_argument", e)
        except SkdvError as e:
            self._fail(run_id, 500, type(e).__name__, e)
        except Exception as e:
            logger.error(f"Run {run_id} crashed: {e}")
            self._fail(run_id, 500, "internal", e)
        with self._lock:
            run.end_time = datetime.now()
            status = run.status
        logger.info(f"Run {run_id} {status}")


class RunResponse(BaseModel):
    """Response model for experiment runs"""

    run_id: str
    scenario: str
    status: str
    output_dir: Optional[str] = None
    verdicts: Dict[str, bool] = {}
    passed: Optional[bool] = None
    start_time: datetime
    end_time: Optional[datetime] = None
    error_status: Optional[int] = None
    error_type: Optional[str] = None
    error_message: Optional[str] = None

    @classmethod
    def from_run(cls, run: ExperimentRun) -> "RunResponse":
        return cls(
            run_id=run.run_id,
            scenario=run.config.scenario.value,
            status=run.status,
            output_dir=run.output_dir,
            verdicts=run.verdicts,
            passed=run.passed,
            start_time=run.start_time,
            end_time=run.end_time,
            error_status=run.error_status,
            error_type=run.error_type,
            error_message=run.error_message,
        )


######################################################
## Routes for experiments
######################################################

experiments_router = APIRouter(prefix="/experiments", tags=["Experiments"])

# Global run registry
registry = RunRegistry()


@experiments_router.get("", response_model=List[str])
async def list_scenarios():
    """
    Returns a list of all available scenario IDs.

    Returns:
        List[str]: List of scenario identifiers
    """
    return get_available_scenarios()


@experiments_router.post("/runs", response_model=RunResponse, status_code=202)
async def create_run(config: ExperimentConfig, background_tasks: BackgroundTasks):
    """
    Schedule a run of the given experiment config

    Args:
        config: Validated experiment config; unknown keys are rejected with 422

    Returns:
        The created run; poll /runs/{run_id} for its status
    """
    run = registry.create(config)
    background_tasks.add_task(registry.execute, run.run_id, harness_settings.threads)
    return RunResponse.from_run(run)


@experiments_router.get("/runs", response_model=List[RunResponse])
async def list_runs():
    return [RunResponse.from_run(run) for run in registry.list()]


@experiments_router.get("/runs/{run_id}", response_model=RunResponse)
async def get_run(run_id: str):
    run = registry.get(run_id)
    if run is None:
        raise HTTPException(status_code=404, detail=f"Run {run_id} not found")
    return RunResponse.from_run(run)
