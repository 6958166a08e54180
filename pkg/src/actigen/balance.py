"""Dataset balancing by iterative proportional fitting over chain features.

Each sample is summarized by three categorical features: the mode activity
type, its duration bin, and the chain length.  The working target starts
at the data's own distribution and is relaxed step by step toward the
uniform (ideal) distribution over realized classes; after every relaxation
the sample weights are raked so the weighted marginals match the working
target.  Balanced datasets are drawn by weighted resampling with
replacement.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import mode_features
from .errors import BalanceError
from .ingest import EncodedSample

FEATURES = ("mode_type", "mode_duration", "length")


@dataclass(frozen=True)
class Distribution:
    """Discrete distribution of one feature over its realized classes."""

    feature: str
    classes: tuple[int, ...]
    shares: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.classes) != len(self.shares):
            raise ValueError("classes and shares must align")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("duplicate classes")
        arr = np.asarray(self.shares, dtype=float)
        if (arr < 0).any():
            raise ValueError("negative share")
        if arr.size and abs(arr.sum() - 1.0) > 1e-9:
            raise ValueError(f"shares sum to {arr.sum():.12f}, not 1")

    def share_of(self, cls: int) -> float:
        try:
            return self.shares[self.classes.index(cls)]
        except ValueError:
            return 0.0

    def as_array(self) -> np.ndarray:
        return np.asarray(self.shares, dtype=float)


@dataclass(frozen=True)
class SampleWeights:
    """Per-sample raking weights, aligned with the input sample order."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(v < 0 for v in self.values):
            raise ValueError("weights must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class BalanceConfig:
    step_size: float = 0.1
    threshold: float = 0.05
    max_iterations: int = 50
    rake_tol: float = 1e-6
    max_sweeps: int = 100

    def __post_init__(self) -> None:
        if not 0.0 < self.step_size <= 1.0:
            raise BalanceError(f"step_size {self.step_size} outside (0, 1]")
        if self.threshold <= 0:
            raise BalanceError("threshold must be positive")
        if self.max_iterations < 1 or self.max_sweeps < 1:
            raise BalanceError("iteration limits must be >= 1")
        if self.rake_tol <= 0:
            raise BalanceError("rake_tol must be positive")


def extract_features(samples: Sequence[EncodedSample]) -> np.ndarray:
    """(N, 3) int array of (mode type, mode duration bin, chain length)."""
    out = np.empty((len(samples), 3), dtype=np.int64)
    for i, s in enumerate(samples):
        out[i] = mode_features(s.chain)
    return out


def _feature_column(feature: str) -> int:
    try:
        return FEATURES.index(feature)
    except ValueError:
        raise BalanceError(f"unknown feature {feature!r}; expected one of {FEATURES}") from None


def compute_distribution(
    samples: Sequence[EncodedSample],
    feature: str,
    weights: np.ndarray | SampleWeights | None = None,
) -> Distribution:
    """Weighted share of each realized class of a feature."""
    col = _feature_column(feature)
    values = extract_features(samples)[:, col]
    return _distribution_of(values, feature, _as_weight_array(weights, len(samples)))


def _as_weight_array(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    if isinstance(weights, SampleWeights):
        weights = weights.as_array()
    arr = np.asarray(weights, dtype=float)
    if arr.shape != (n,):
        raise BalanceError(f"weights shape {arr.shape} does not match {n} samples")
    return arr


def _distribution_of(values: np.ndarray, feature: str, weights: np.ndarray) -> Distribution:
    if values.size == 0:
        return Distribution(feature, (), ())
    classes = np.unique(values)
    total = weights.sum()
    if total <= 0:
        raise BalanceError("total weight is zero")
    shares = np.array([weights[values == c].sum() for c in classes]) / total
    return Distribution(feature, tuple(int(c) for c in classes), tuple(shares))


def ideal_distribution(dist: Distribution) -> Distribution:
    """Uniform distribution over the classes realized in the data."""
    k = len(dist.classes)
    if k == 0:
        return dist
    return Distribution(dist.feature, dist.classes, (1.0 / k,) * k)


def distribution_distance(a: Distribution, b: Distribution) -> float:
    """L-infinity distance over the union of class supports."""
    classes = sorted(set(a.classes) | set(b.classes))
    return max((abs(a.share_of(c) - b.share_of(c)) for c in classes), default=0.0)


def relax_target(current: Distribution, ideal: Distribution, step_size: float) -> Distribution:
    """Move the working target one step toward the ideal: T - (T - I) * step."""
    if not 0.0 < step_size <= 1.0:
        raise BalanceError(f"step_size {step_size} outside (0, 1]")
    if current.classes != ideal.classes:
        raise BalanceError("relax_target requires matching class supports")
    t = current.as_array()
    i = ideal.as_array()
    moved = np.clip(t - (t - i) * step_size, 0.0, None)
    total = moved.sum()
    if total <= 0:
        raise BalanceError("relaxed target lost all mass")
    return Distribution(current.feature, current.classes, tuple(moved / total))


@dataclass
class RakeResult:
    weights: SampleWeights
    converged: bool
    # max weighted-marginal error after each completed sweep
    sweep_errors: list[float] = field(default_factory=list)


def rake(
    samples: Sequence[EncodedSample],
    targets: dict[str, Distribution],
    max_sweeps: int = 100,
    tol: float = 1e-6,
    initial_weights: np.ndarray | None = None,
) -> RakeResult:
    """Cyclic raking of sample weights to the target feature marginals.

    Sweeps the features in FEATURES order, rescaling each class's weights
    by target share / current share.  Converged means the maximum marginal
    error dropped below tol; sweeps also stop early once an entire pass
    fails to improve that error by at least 1e-9.
    """
    feats = extract_features(samples)
    n = len(samples)
    w = np.ones(n) if initial_weights is None else np.asarray(initial_weights, dtype=float).copy()
    if w.shape != (n,):
        raise BalanceError("initial weights do not match sample count")

    plan = []
    for feature, target in targets.items():
        col = _feature_column(feature)
        values = feats[:, col]
        realized = set(int(v) for v in np.unique(values))
        for cls, share in zip(target.classes, target.shares):
            if share > 0 and cls not in realized:
                raise BalanceError(
                    f"infeasible target: feature {feature!r} class {cls} has no samples"
                )
        masks = [(values == c) for c in target.classes]
        plan.append((feature, target, masks))

    def max_error() -> float:
        total = w.sum()
        err = 0.0
        for _, target, masks in plan:
            for mask, share in zip(masks, target.shares):
                err = max(err, abs(w[mask].sum() / total - share))
        return err

    result = RakeResult(SampleWeights(tuple(w)), False)
    prev = np.inf
    for _ in range(max_sweeps):
        for _, target, masks in plan:
            total = w.sum()
            for mask, share in zip(masks, target.shares):
                cur = w[mask].sum() / total
                if cur > 0:
                    w[mask] *= share / cur
                elif share > 0:
                    raise BalanceError(
                        f"raking drove feature {target.feature!r} class mass to zero"
                    )
        err = max_error()
        result.sweep_errors.append(err)
        if err < tol:
            result.converged = True
            break
        if prev - err < 1e-9:
            break
        prev = err
    result.weights = SampleWeights(tuple(w))
    return result


@dataclass
class BalanceResult:
    weights: SampleWeights
    targets: dict[str, Distribution]
    log: list[dict]
    converged: bool


def balance(samples: Sequence[EncodedSample], config: BalanceConfig | None = None) -> BalanceResult:
    """Relax-and-rake until the working target is near uniform.

    Returns the weights of the last rake that converged; if the very first
    rake fails the weights degrade to all ones.
    """
    config = config or BalanceConfig()
    if not samples:
        raise BalanceError("no samples to balance")

    targets = {f: compute_distribution(samples, f) for f in FEATURES}
    ideals = {f: ideal_distribution(targets[f]) for f in FEATURES}

    weights = np.ones(len(samples))
    have_converged_weights = False
    log: list[dict] = []
    converged = False
    for it in range(config.max_iterations):
        targets = {f: relax_target(targets[f], ideals[f], config.step_size) for f in FEATURES}
        result = rake(samples, targets, config.max_sweeps, config.rake_tol,
                      initial_weights=weights)
        distance = max(distribution_distance(targets[f], ideals[f]) for f in FEATURES)
        log.append({
            "iteration": it,
            "target_distance": distance,
            "rake_converged": result.converged,
            "max_marginal_error": result.sweep_errors[-1] if result.sweep_errors else 0.0,
        })
        if not result.converged:
            break
        weights = result.weights.as_array()
        have_converged_weights = True
        if distance <= config.threshold:
            converged = True
            break

    if not have_converged_weights:
        weights = np.ones(len(samples))
    return BalanceResult(SampleWeights(tuple(weights)), targets, log, converged)


def resample(
    samples: Sequence[EncodedSample],
    weights: SampleWeights | np.ndarray,
    n: int,
    seed: int = 0,
) -> list[EncodedSample]:
    """Weighted draw of n samples with replacement; deterministic in seed."""
    w = _as_weight_array(weights, len(samples))
    total = w.sum()
    if total <= 0:
        raise BalanceError("cannot resample: all weights are zero")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(samples), size=n, replace=True, p=w / total)
    return [samples[int(i)] for i in idx]


def export_weights_csv(weights: SampleWeights, path) -> None:
    """CSV columns (sample_id, weight); sample_id is the input row index."""
    with open(path, "w") as fh:
        fh.write("sample_id,weight\n")
        for i, v in enumerate(weights.values):
            fh.write(f"{i},{v!r}\n")
