from pathlib import Path
from typing import Optional

import typer
from pydantic import ValidationError

from harness.config import Scenario, load_config
from harness.outputs import emit_outputs
from harness.selector import run_scenario
from harness.settings import harness_settings
from skdv.errors import SkdvError
from skdv.utils.log import logger, set_log_level, set_log_level_to_debug

EXIT_PASSED = 0
EXIT_ERROR = 1
EXIT_VERDICT_FAILED = 2

app = typer.Typer(add_completion=False, help="Simulate and verify the stochastic Schrodinger-KdV system.")


@app.command()
def run(
    scenario: Scenario = typer.Argument(..., help="Scenario to run"),
    config: Path = typer.Option(..., "--config", "-c", exists=True, dir_okay=False, help="JSON experiment config"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Master seed"),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory"),
    paths: Optional[int] = typer.Option(None, "--paths", min=1, help="Ensemble size M"),
    dt: Optional[float] = typer.Option(None, "--dt", help="Time step"),
    T0: Optional[float] = typer.Option(None, "--T0", help="Time horizon"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker threads for path tasks"),
    debug: bool = typer.Option(False, "--debug", help="Log at DEBUG level"),
) -> None:
    """Run one scenario; exit 0 when every verdict passes, 2 when one fails, 1 on errors."""
    set_log_level(harness_settings.log_level)
    if debug:
        set_log_level_to_debug()

    try:
        cfg = load_config(config).with_overrides(
            scenario=scenario, seed=seed, output_dir=out, paths=paths, dt=dt, T0=T0
        )
        out_dir = cfg.output_dir or harness_settings.output_dir / cfg.scenario.value
        result = run_scenario(cfg, threads or harness_settings.threads)
        emit_outputs(result, cfg, out_dir)
    except ValidationError as exc:
        logger.error(f"Invalid configuration {config}:\n{exc}")
        raise typer.Exit(EXIT_ERROR)
    except (SkdvError, OSError) as exc:
        logger.error(f"Run failed: {exc}")
        raise typer.Exit(EXIT_ERROR)

    for name, passed in result.verdicts.items():
        logger.info(f"{name}: {'pass' if passed else 'FAIL'}")
    raise typer.Exit(EXIT_PASSED if result.passed else EXIT_VERDICT_FAILED)


if __name__ == "__main__":
    app()
