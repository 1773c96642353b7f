"""Chi-square fit statistics, the Z-score criterion, and compound variances.

The fit statistic sums (observed - predicted)^2 / predicted over the 24
independent channels of every experiment (unpaired singles and
coincidences).  With F fitted parameters it is approximately chi-square
with DF = n_counts - F degrees of freedom, and the standard score
Z = (X - DF) / sqrt(2 DF) rejects the model when it reaches five.

When detection probabilities vary between experiments, a count n built
from a Poisson number of opportunities N thinned with random probability x
has V(n) = E(n) + (E(n) CV(x))^2; the revised statistic divides by these
inflated variances instead.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .counts import PREDICTION_FLOOR, CountTable, Prediction
from .errors import DegenerateInputError, InvalidInputError

TOTAL_COUNTS = 984          # 24 channels x 41 experiments
FREE_PARAMETERS = {1: 20, 2: 24, 3: 39, 4: 39}
Z_REJECT = 5.0
SMALL_COUNT_WARN = 10.0


def _channel_arrays(observed: CountTable, predicted: Prediction):
    ua, ub = observed.unpaired()
    obs = np.concatenate([ua.ravel(), ub.ravel(), observed.c.ravel()])
    pred = np.concatenate([predicted.ua.ravel(), predicted.ub.ravel(), predicted.c.ravel()])
    return obs, pred


def chi_square_contributions(observed, predicted, floor: float = PREDICTION_FLOOR,
                             warn_small: bool = False) -> np.ndarray:
    """Per-channel terms (obs - pred)^2 / pred, shape (n_experiments, 24).

    Channel order per experiment: ua_00..ua_11, ub_00..ub_11, c_0000..c_1111.
    Predicted denominators are floored at `floor`.
    """
    if len(observed) != len(predicted):
        raise InvalidInputError("observed and predicted lists differ in length")
    rows = []
    for obs_t, pred_t in zip(observed, predicted):
        obs, pred = _channel_arrays(obs_t, pred_t)
        if pred.min() <= 0:
            raise DegenerateInputError("non-positive predicted count in chi-square")
        if warn_small and pred.min() < SMALL_COUNT_WARN:
            warnings.warn("predicted count below 10; Normal approximation is poor",
                          stacklevel=2)
        rows.append((obs - pred) ** 2 / np.maximum(pred, floor))
    return np.array(rows)


def chi_square_X(observed, predicted, floor: float = PREDICTION_FLOOR) -> float:
    """The chi-square statistic over all experiments and channels."""
    return float(chi_square_contributions(observed, predicted, floor=floor).sum())


def chi_square_Xrev(observed, predicted) -> float:
    """Chi-square with model-4 variances: sum (obs - pred)^2 / v."""
    if len(observed) != len(predicted):
        raise InvalidInputError("observed and predicted lists differ in length")
    total = 0.0
    for obs_t, pred_t in zip(observed, predicted):
        if pred_t.var_ua is None or pred_t.var_ub is None or pred_t.var_c is None:
            raise InvalidInputError("chi_square_Xrev needs predictions with variances")
        obs, pred = _channel_arrays(obs_t, pred_t)
        v = np.concatenate([pred_t.var_ua.ravel(), pred_t.var_ub.ravel(),
                            pred_t.var_c.ravel()])
        if v.min() <= 0:
            raise DegenerateInputError("non-positive variance in revised chi-square")
        total += float((((obs - pred) ** 2) / v).sum())
    return total


def degrees_of_freedom(model_id: int, n_counts: int = TOTAL_COUNTS) -> int:
    """n_counts minus the model's fitted-parameter count.

    Model 4's cv values are set by hand rather than fitted, so it shares
    model 3's parameter count of 39.
    """
    if model_id not in FREE_PARAMETERS:
        raise InvalidInputError(f"unknown model_id {model_id}")
    df = n_counts - FREE_PARAMETERS[model_id]
    if df <= 0:
        raise InvalidInputError("degrees of freedom must be positive")
    return df


def z_score(x: float, df: int) -> float:
    """Standard score (X - DF) / sqrt(2 DF)."""
    if df <= 0:
        raise InvalidInputError("DF must be positive")
    return (x - df) / np.sqrt(2.0 * df)


def is_acceptable(z: float) -> bool:
    """Acceptance criterion |Z| < 5 (a model can also explain *too* well)."""
    return abs(z) < Z_REJECT


@dataclass
class FitStatistics:
    """Goodness-of-fit summary for one model on one data set."""

    model_id: int
    x: float
    df: int
    z: float = field(init=False)
    accepted: bool = field(init=False)
    contributions: np.ndarray | None = None  # (n_experiments, 24)

    def __post_init__(self):
        self.z = float(z_score(self.x, self.df))
        self.accepted = is_acceptable(self.z)

    def to_json(self) -> dict:
        out = {"model": self.model_id, "X": self.x, "DF": self.df,
               "Z": self.z, "accepted": self.accepted}
        if self.contributions is not None:
            out["contributions"] = self.contributions.tolist()
        return out


# --- compound variance (random count of random-probability detections) ------

@dataclass(frozen=True)
class CompoundCountSpec:
    """A Poisson number of opportunities thinned with a random probability."""

    expected_events: float   # E(N)
    mean_prob: float         # E(x)
    cv_prob: float           # CV(x) = sd(x) / E(x)

    def __post_init__(self):
        if self.expected_events < 0:
            raise InvalidInputError("expected_events must be nonnegative")
        if not 0.0 <= self.mean_prob <= 1.0:
            raise InvalidInputError("mean_prob must lie in [0, 1]")
        if self.cv_prob < 0:
            raise InvalidInputError("cv_prob must be nonnegative")


def binomial_conditional_mean(n_events: float, x: float) -> float:
    """E(n | N, x) = N x."""
    return n_events * x


def binomial_conditional_variance(n_events: float, x: float) -> float:
    """V(n | N, x) = N x (1 - x)."""
    return n_events * x * (1.0 - x)


def compound_variance(spec: CompoundCountSpec) -> tuple[float, float]:
    """Mean and variance of the count: E(n) = E(N)E(x), V(n) = E(n) + (E(n)CV(x))^2."""
    e_n = spec.expected_events * spec.mean_prob
    return e_n, e_n + (e_n * spec.cv_prob) ** 2


def _beta_moment_matched(mean: float, cv: float):
    """Beta(a, b) with the given mean and coefficient of variation."""
    var = (mean * cv) ** 2
    cap = mean * (1.0 - mean)
    if var >= cap:
        raise InvalidInputError("cv too large for a Beta distribution on [0, 1]")
    scale = cap / var - 1.0
    return mean * scale, (1.0 - mean) * scale


def compound_variance_mc_oracle(spec: CompoundCountSpec, trials: int,
                                seed: int) -> tuple[float, float]:
    """Empirical check of the compound-variance law by direct simulation.

    Samples N ~ Poisson(E(N)), x from a Beta matched to (E(x), CV(x))
    (a point mass when CV = 0, keeping x in [0, 1]), n ~ Binomial(N, x);
    returns the sample mean and variance of n.
    """
    if trials < 10_000:
        raise InvalidInputError("use at least 10,000 trials")
    rng = np.random.default_rng(seed)
    n_events = rng.poisson(spec.expected_events, size=trials)
    if spec.cv_prob == 0.0 or spec.mean_prob == 0.0:
        x = np.full(trials, spec.mean_prob)
    else:
        a, b = _beta_moment_matched(spec.mean_prob, spec.cv_prob)
        x = rng.beta(a, b, size=trials)
    n = rng.binomial(n_events, x)
    return float(n.mean()), float(n.var(ddof=1))
