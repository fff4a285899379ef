from typing import Callable, List, Optional

from harness.config import ExperimentConfig, Scenario
from harness.scenarios import (
    RunResult,
    run_conservation,
    run_contraction,
    run_counterexample,
    run_ensemble_scenario,
    run_hierarchy,
    run_probes,
    run_simulation,
)
from skdv.utils.log import logger

Runner = Callable[[ExperimentConfig, int], RunResult]


def get_available_scenarios() -> List[str]:
    """Returns a list of all available scenario IDs."""
    return [scenario.value for scenario in Scenario]


def get_runner(scenario: Optional[Scenario] = None) -> Runner:
    if scenario == Scenario.SIMULATE:
        return run_simulation
    elif scenario == Scenario.ENSEMBLE:
        return run_ensemble_scenario
    elif scenario == Scenario.CONSERVE:
        return run_conservation
    elif scenario == Scenario.PROBE:
        return run_probes
    elif scenario == Scenario.CONTRACTION:
        return run_contraction
    elif scenario == Scenario.COUNTEREXAMPLE:
        return run_counterexample
    elif scenario == Scenario.HIERARCHY:
        return run_hierarchy

    raise ValueError(f"Scenario: {scenario} not found")


def run_scenario(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    logger.info(f"Starting scenario '{cfg.scenario.value}' with seed {cfg.seed}")
    result = get_runner(cfg.scenario)(cfg, threads)
    logger.info(f"Scenario '{cfg.scenario.value}' finished: {'passed' if result.passed else 'failed'}")
    return result
