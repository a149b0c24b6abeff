"""Learning-curve experiment: reproduction error versus demonstration count."""

from dataclasses import dataclass

import numpy as np

from .dataset_io import Dataset, split_dataset
from .errors import InvariantViolation
from .tpgmm import EmConfig, em_fit, gmr_trajectory


@dataclass(frozen=True)
class CurvePoint:
    count: int
    mean_error: float
    stddev_error: float


def reproduction_error(model, demo) -> float:
    """RMS distance between the reproduced and the recorded path."""
    repro = gmr_trajectory(model, demo.frames, n_samples=len(demo.trajectory))
    diff = repro.xy - demo.trajectory.xy
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))


def validation_error(model, demos) -> float:
    return float(np.mean([reproduction_error(model, d) for d in demos]))


def demos_curve(ds: Dataset, counts, trials: int = 10, k: int = 5,
                seed: int = 0, train_frac: float = 0.8,
                em_config: EmConfig | None = None) -> list[CurvePoint]:
    """Held-out reproduction error for growing training-set sizes.

    The dataset is split once; every trial draws its own random subset of
    the training pool, fits a fresh model and scores it on the fixed
    validation set.  Returns mean and standard deviation per count.
    """
    counts = [int(c) for c in counts]
    if trials < 1 or not counts:
        raise InvariantViolation("need at least one trial and one count")
    train, val = split_dataset(ds, train_frac=train_frac, seed=seed)
    if max(counts) > len(train.samples):
        raise InvariantViolation(
            f"count {max(counts)} exceeds training pool of {len(train.samples)}")
    if not val.samples:
        raise InvariantViolation("validation split is empty")
    out = []
    for count in counts:
        errs = []
        for trial in range(trials):
            rng = np.random.default_rng([seed, count, trial])
            idx = rng.choice(len(train.samples), size=count, replace=False)
            model = em_fit([train.samples[i] for i in idx], k, em_config)
            errs.append(validation_error(model, val.samples))
        out.append(CurvePoint(count, float(np.mean(errs)), float(np.std(errs))))
    return out
