from pathlib import Path

import numpy as np

from ..lib.data import SchemaConfig, load_csv
from ..lib.errors import RfitError
from ..lib.forest import ForestParams, fit_rfit, save_forest
from ..lib.splits import SssConfig
from ..lib.tree import TreeParams
from ..lib.utils import DEFAULT_SEED, atomic_output_dir, layered_config, load_json, parse_list

SCHEMA_KEYS = ("response", "treatment", "covariates", "nominal", "id", "exclude", "on_missing")
TREE_KEYS = ("mtry", "min_arm", "min_node", "max_depth", "split_method", "a", "brent_tol", "brent_max_iter")
FIT_KEYS = SCHEMA_KEYS + ("b", "seed", "threads") + TREE_KEYS


def tree_params_from(cfg: dict) -> TreeParams:
    sss = SssConfig(**{k: cfg[k] for k in ("a", "brent_tol", "brent_max_iter") if k in cfg})
    kw = {k: cfg[k] for k in ("mtry", "min_arm", "min_node", "max_depth", "split_method") if k in cfg}
    return TreeParams(sss=sss, **kw)


def forest_params_from(cfg: dict, default_b: int = 2000) -> ForestParams:
    return ForestParams(
        b=int(cfg.get("b", default_b)),
        tree=tree_params_from(cfg),
        seed=int(cfg.get("seed", DEFAULT_SEED)),
    )


def schema_from(cfg: dict) -> SchemaConfig:
    d = {k: cfg[k] for k in SCHEMA_KEYS if k in cfg}
    for key in ("covariates", "nominal", "exclude"):
        if key in d:
            d[key] = parse_list(d[key])
    return SchemaConfig.from_dict(d)


def run(args) -> int:
    """rfit fit: CSV in, model directory out."""
    csv_path = Path(args.csv).expanduser().resolve()
    out_dir = Path(args.out).expanduser().resolve()
    if not csv_path.exists():
        print(f"ERROR: CSV file not found: {csv_path}")
        return 1

    try:
        schema_file = load_json(args.schema) if args.schema else None
        cfg = layered_config(args, FIT_KEYS, schema_file)
        schema = schema_from(cfg)
        params = forest_params_from(cfg)

        print(f"Reading trial data: {csv_path}")
        data = load_csv(csv_path, schema)
        print(f"  n = {data.n} ({int(data.t.sum())} treated, {data.n - int(data.t.sum())} control), p = {data.p}")
        print(f"Fitting {params.b} interaction trees ({params.tree.split_method.value}, a = {params.tree.sss.a:g}, seed = {params.seed})")

        forest = fit_rfit(data, params, n_jobs=cfg.get("threads"))
        ite = forest.predict(data.x)
        extra = {
            "source": csv_path.name,
            "mean_ite": float(ite.mean()),
            "mean_difference": data.mean_difference(),
        }
        with atomic_output_dir(out_dir) as staging:
            save_forest(forest, staging, schema=schema, extra=extra)
    except RfitError as e:
        print(f"ERROR: {e}")
        return 1

    depths = np.asarray([tree.depth for tree in forest.trees])
    leaves = np.asarray([tree.n_leaves for tree in forest.trees])
    print("\n=== Summary ===")
    print(f"Rows:                      {data.n}")
    print(f"Covariates:                {data.p} ({', '.join(data.names)})")
    print(f"Trees:                     {forest.b}")
    print(f"Split method:              {params.tree.split_method.value} (a = {params.tree.sss.a:g})")
    print(f"Mean tree depth / leaves:  {depths.mean():.2f} / {leaves.mean():.2f}")
    print(f"Mean in-sample ITE:        {extra['mean_ite']:.4f}")
    print(f"Unadjusted mean difference: {extra['mean_difference']:.4f}")
    print(f"Model written to:          {out_dir}")
    return 0
