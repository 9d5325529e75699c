import numpy as np
import pandas as pd
import pytest

from rfit.lib.data import ColumnMeta, TrialDataset
from rfit.lib.simlab import gen_model_a

ACUPUNCTURE_COVARIATES = [
    "age", "sex", "migraine", "chronicity", "pk1", "f1", "pf1", "rlp1", "rle1",
    "ef1", "ewb1", "sf1", "p1", "gen1", "hc1", "painmedspk1", "prophmqs1", "allmedsbaseline",
]


def balanced_treatment(n, rng):
    t = np.tile([0, 1], n // 2 + 1)[:n]
    rng.shuffle(t)
    return t


def random_trial(n=200, p=3, seed=0, integer_y=False, effect=2.0):
    """Uniform covariates; the treatment effect jumps by ``effect`` at x2 = 0.5."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(n, p))
    t = balanced_treatment(n, rng)
    if integer_y:
        y = rng.integers(-3, 4, size=n) + np.round(effect * t * (x[:, 1] > 0.5))
    else:
        y = x[:, 0] + effect * t * (x[:, 1] > 0.5) + rng.standard_normal(n)
    columns = tuple(ColumnMeta(f"x{j + 1}") for j in range(p))
    return TrialDataset(y=y.astype(float), t=t, x=x, columns=columns)


def write_trial_csv(path, n=60, seed=3, bad_treatment=False):
    rng = np.random.default_rng(seed)
    t = balanced_treatment(n, rng)
    age = rng.integers(20, 70, size=n)
    bmi = np.round(rng.normal(25, 4, size=n), 1)
    site = rng.choice(["north", "south", "west"], size=n)
    diff = np.round(0.1 * age + 3.0 * t * (age > 45) + rng.normal(0, 1, size=n), 3)
    group = t.astype(object)
    if bad_treatment:
        group[5] = 2
    frame = pd.DataFrame({"id": [f"p{i:03d}" for i in range(n)], "diff": diff, "group": group, "age": age, "bmi": bmi, "site": site})
    frame.to_csv(path, index=False)
    return path


def write_acupuncture_like_csv(path, n=80, seed=11):
    rng = np.random.default_rng(seed)
    t = balanced_treatment(n, rng)
    cols = {"id": np.arange(1, n + 1), "diff": np.round(rng.normal(-6, 10, size=n) - 4 * t, 2), "group": t}
    for name in ACUPUNCTURE_COVARIATES:
        cols[name] = np.round(rng.uniform(0, 100, size=n), 1)
    pd.DataFrame(cols).to_csv(path, index=False)
    return path


@pytest.fixture
def trial():
    return random_trial(200, 3, seed=7)


@pytest.fixture
def model_a():
    return gen_model_a(500, 0, 0.5, np.random.default_rng(2019), noise_sd=0.0)


@pytest.fixture
def trial_csv(tmp_path):
    return write_trial_csv(tmp_path / "trial.csv")
