from pathlib import Path

import numpy as np
import pandas as pd

from ..lib.data import load_covariates
from ..lib.errors import RfitError
from ..lib.forest import load_forest, predict_with_se
from ..lib.utils import atomic_output_file


def prediction_frame(preds, row_ids, se_variant: str = "c", sort_by_ite: bool = False) -> pd.DataFrame:
    """One row per input row; ``se`` is the square root of the selected variance."""
    frame = pd.DataFrame(
        {
            "row_id": row_ids,
            "ite": [p.estimate for p in preds],
            "se": [p.se(se_variant) for p in preds],
            "se_raw": [p.se("raw") for p in preds],
            "se_c0": [p.se("c0") for p in preds],
            "se_c": [p.se("c") for p in preds],
            "clamped_c0": [int(p.clamped_c0) for p in preds],
            "clamped_c": [int(p.clamped_c) for p in preds],
        }
    )
    if sort_by_ite:
        frame = frame.sort_values("ite", kind="mergesort").reset_index(drop=True)
        frame.insert(0, "rank", np.arange(1, len(frame) + 1))
        frame["ite_lower"] = frame["ite"] - frame["se"]
        frame["ite_upper"] = frame["ite"] + frame["se"]
    return frame


def run(args) -> int:
    """rfit predict: model directory + covariate CSV in, predictions CSV out."""
    model_dir = Path(args.model).expanduser().resolve()
    csv_path = Path(args.csv).expanduser().resolve()
    out_path = Path(args.out).expanduser().resolve()
    if not model_dir.is_dir():
        print(f"ERROR: Model directory not found: {model_dir}")
        return 1
    if not csv_path.exists():
        print(f"ERROR: CSV file not found: {csv_path}")
        return 1

    try:
        forest, manifest = load_forest(model_dir)
        schema = manifest.get("schema") or {}
        print(f"Model: {model_dir} ({forest.b} trees, {len(forest.columns)} covariates)")
        x, row_ids = load_covariates(csv_path, forest.columns, on_unseen=args.on_unseen, id_column=schema.get("id"))
        print(f"Predicting {x.shape[0]} rows from {csv_path}")
        preds = predict_with_se(forest, x)
        frame = prediction_frame(preds, row_ids, args.se, args.sort_by_ite)
        with atomic_output_file(out_path) as staging:
            frame.to_csv(staging, index=False, float_format="%.17g", lineterminator="\n")
    except RfitError as e:
        print(f"ERROR: {e}")
        return 1

    print("\n=== Summary ===")
    print(f"Rows predicted:       {len(frame)}")
    print(f"Mean ITE:             {frame['ite'].mean():.4f}")
    print(f"SE column:            se_{args.se}")
    print(f"Clamped variances:    c0 = {int(frame['clamped_c0'].sum())}, c = {int(frame['clamped_c'].sum())}")
    print(f"Predictions written:  {out_path}")
    return 0
