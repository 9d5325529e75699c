from pathlib import Path

import pandas as pd

from ..lib.errors import RfitError
from ..lib.simlab import ExperimentReport
from ..lib.utils import atomic_output_dir, layered_config
from .simulate import EXPERIMENT_KEYS, print_summary, run_experiment


def timing_table(report: ExperimentReport) -> pd.DataFrame:
    """Mean seconds as an n x K matrix, one column block per method."""
    frame = pd.DataFrame(report.points)
    wide = frame.pivot(index="n", columns="k", values=report.config["methods"])
    wide.columns = [f"{method}_k{k}" for method, k in wide.columns]
    return wide.reset_index()


def run(args) -> int:
    """rfit bench: split-search timing table."""
    out_dir = Path(args.out).expanduser().resolve()
    try:
        cfg = layered_config(args, EXPERIMENT_KEYS["timing"])
        report = run_experiment("timing", cfg)
        with atomic_output_dir(out_dir) as staging:
            report.write(staging)
            timing_table(report).to_csv(staging / "timing.csv", index=False, lineterminator="\n")
    except RfitError as e:
        print(f"ERROR: {e}")
        return 1

    print("\n=== Summary ===")
    print_summary(report)
    print(f"Timing table written to: {out_dir / 'timing.csv'}")
    return 0
