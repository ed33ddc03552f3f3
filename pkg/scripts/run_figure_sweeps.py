import argparse
import os
import sys
from pathlib import Path

# Add app to path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from app.core.errors import PolyFrameError
from app.core.storage import ResultStore
from app.core.utils import logger
from app.experiments import TrialScheduler, run_experiment
from app.experiments.config_loader import apply_overrides, load_config


def run_sweeps(config_dir: Path, out_dir: Path, pattern: str, workers: int, trials=None):
    configs = sorted(config_dir.glob(pattern))
    print(f"Running {len(configs)} experiment configs from {config_dir}...\n")

    summary = []
    for path in configs:
        config = apply_overrides(load_config(path), trials=trials, out=str(out_dir / path.stem))
        try:
            result = run_experiment(config, ResultStore(config.output_dir), TrialScheduler(workers))
            status = "ok"
            if result.extras.get("violations"):
                status = f"{result.extras['violations']} violations"
            summary.append((path.stem, config.experiment.value, len(result.rows), status))
        except PolyFrameError as e:
            logger.error(f"{path.name} failed: {e}")
            summary.append((path.stem, config.experiment.value, 0, f"exit {e.exit_code}"))

    headers = ["Config", "Experiment", "Rows", "Status"]
    print("| " + " | ".join(headers) + " |")
    print("| " + " | ".join(["---"] * len(headers)) + " |")
    for row in summary:
        print("| " + " | ".join(str(v) for v in row) + " |")
    return summary


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Run every shipped figure configuration")
    parser.add_argument("--configs", default="configs")
    parser.add_argument("--out", default="results")
    parser.add_argument("--pattern", default="*.toml")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--trials", type=int)
    args = parser.parse_args()
    run_sweeps(Path(args.configs), Path(args.out), args.pattern, args.workers, args.trials)
