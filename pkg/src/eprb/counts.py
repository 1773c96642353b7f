"""Count tables and the four filter models that predict them.

A count table holds the 24 observations from one experiment: Alice's four
singles a[i, j], Bob's four singles b[k, l], and the sixteen coincidences
c[i, j, k, l].  Unpaired singles are singles minus the coincidences they
participate in; every pulse is an unpaired single or belongs to exactly one
coincidence.

Model ladder (each generalizes the previous):
  1. per-setting detection probabilities pa_i, pb_k
  2. per-setting-and-result probabilities pa_ij, pb_kl
  3. independent coincidence-identification products N*pc_ijkl plus an
     accidental (false-positive) term a_hat*b_hat*w/T
  4. model 3 means with between-experiment parameter noise expressed as
     coefficients of variation, inflating the count variances
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataInconsistencyError, DegenerateInputError, InvalidInputError
from .quantum import QuantumProbs

DEFAULT_DURATION_NS = 5e9
PREDICTION_FLOOR = 1e-6


def _as_array(x, shape, name) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != shape:
        raise InvalidInputError(f"{name} must have shape {shape}, got {arr.shape}")
    return arr


@dataclass
class CountTable:
    """Observed or predicted counts for one experiment."""

    a: np.ndarray  # (2, 2) Alice singles, [setting, result]
    b: np.ndarray  # (2, 2) Bob singles
    c: np.ndarray  # (2, 2, 2, 2) coincidences, [i, j, k, l]

    def __post_init__(self):
        self.a = _as_array(self.a, (2, 2), "a")
        self.b = _as_array(self.b, (2, 2), "b")
        self.c = _as_array(self.c, (2, 2, 2, 2), "c")
        if (self.a < 0).any() or (self.b < 0).any() or (self.c < 0).any():
            raise InvalidInputError("counts must be nonnegative")

    def unpaired(self) -> tuple[np.ndarray, np.ndarray]:
        """Unpaired singles (ua, ub); raises if any would be negative."""
        ua = self.a - self.c.sum(axis=(2, 3))
        ub = self.b - self.c.sum(axis=(0, 1))
        if ua.min() < 0 or ub.min() < 0:
            raise DataInconsistencyError(
                "coincidences exceed singles: negative unpaired singles")
        return ua, ub


def unpaired_singles(table: CountTable) -> tuple[np.ndarray, np.ndarray]:
    return table.unpaired()


@dataclass
class FilterParams:
    """Parameters of one filter model.

    Models 1-2 store true probabilities pa, pb together with the expected
    pairs per quadrant n_pairs.  Models 3-4 store the products N*pa_ij,
    N*pb_kl, N*pc_ijkl directly (only the products are identifiable), with
    n_pairs unused.  Model 4 additionally carries coefficients of variation.
    """

    model_id: int
    pa: np.ndarray               # (2,) model 1; (2,2) models 2-4 (products for 3-4)
    pb: np.ndarray
    n_pairs: float | None = None
    pc: np.ndarray | None = None  # (2,2,2,2) N*pc_ijkl, models 3-4
    window_w: float = 0.0         # full coincidence-window width, ns
    duration_T: float = DEFAULT_DURATION_NS
    cva: np.ndarray | None = None  # (2,2), model 4
    cvb: np.ndarray | None = None
    cvc: np.ndarray | None = None  # (2,2,2,2)

    def __post_init__(self):
        m = self.model_id
        if m not in (1, 2, 3, 4):
            raise InvalidInputError(f"model_id must be 1..4, got {m}")
        if m == 1:
            self.pa = _as_array(self.pa, (2,), "pa")
            self.pb = _as_array(self.pb, (2,), "pb")
        else:
            self.pa = _as_array(self.pa, (2, 2), "pa")
            self.pb = _as_array(self.pb, (2, 2), "pb")
        if m in (1, 2):
            if self.n_pairs is None or self.n_pairs <= 0:
                raise InvalidInputError("models 1-2 need n_pairs > 0")
            for name, p in (("pa", self.pa), ("pb", self.pb)):
                if p.min() < 0 or p.max() > 1:
                    raise InvalidInputError(f"{name} probabilities must lie in [0, 1]")
        if m in (3, 4):
            if self.pc is None:
                raise InvalidInputError("models 3-4 need the pc product table")
            self.pc = _as_array(self.pc, (2, 2, 2, 2), "pc")
            if self.pa.min() < 0 or self.pb.min() < 0 or self.pc.min() < 0:
                raise InvalidInputError("product parameters must be nonnegative")
            if self.duration_T <= 0:
                raise InvalidInputError("duration_T must be positive")
            if self.window_w < 0 or self.window_w >= self.duration_T:
                raise InvalidInputError("need 0 <= window_w << duration_T")
        if m == 4:
            if self.cva is None or self.cvb is None or self.cvc is None:
                raise InvalidInputError("model 4 needs cva, cvb, cvc")
            self.cva = _as_array(self.cva, (2, 2), "cva")
            self.cvb = _as_array(self.cvb, (2, 2), "cvb")
            self.cvc = _as_array(self.cvc, (2, 2, 2, 2), "cvc")
            if self.cva.min() < 0 or self.cvb.min() < 0 or self.cvc.min() < 0:
                raise InvalidInputError("coefficients of variation must be nonnegative")


@dataclass
class Prediction:
    """Predicted counts for one experiment (plus variances for model 4)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    ua: np.ndarray = field(init=False)
    ub: np.ndarray = field(init=False)
    var_ua: np.ndarray | None = None
    var_ub: np.ndarray | None = None
    var_c: np.ndarray | None = None

    def __post_init__(self):
        self.ua = self.a - self.c.sum(axis=(2, 3))
        self.ub = self.b - self.c.sum(axis=(0, 1))


def predict_model1(params: FilterParams, qp: QuantumProbs) -> Prediction:
    """a_hat = 2N pa_i qa_ij, b_hat = 2N pb_k qb_kl, c_hat = N pa_i pb_k qc_ijkl."""
    if params.model_id != 1:
        raise InvalidInputError("predict_model1 needs model_id 1")
    n = params.n_pairs
    a = 2.0 * n * params.pa[:, None] * qp.qa
    b = 2.0 * n * params.pb[:, None] * qp.qb
    c = n * params.pa[:, None, None, None] * params.pb[None, None, :, None] * qp.qc
    return Prediction(a=a, b=b, c=c)


def predict_model2(params: FilterParams, qp: QuantumProbs) -> Prediction:
    """Same structure as model 1 with per-result probabilities pa_ij, pb_kl."""
    if params.model_id != 2:
        raise InvalidInputError("predict_model2 needs model_id 2")
    n = params.n_pairs
    a = 2.0 * n * params.pa * qp.qa
    b = 2.0 * n * params.pb * qp.qb
    c = n * params.pa[:, :, None, None] * params.pb[None, None, :, :] * qp.qc
    return Prediction(a=a, b=b, c=c)


def predict_model3(params: FilterParams, qp: QuantumProbs) -> Prediction:
    """Product parametrization with an accidental-coincidence term.

    a_hat = 2 (N pa_ij) qa_ij and c_hat = (N pc_ijkl) qc_ijkl
    + a_hat b_hat w / T, where w is the full coincidence-window width and T
    the experiment duration.
    """
    if params.model_id not in (3, 4):
        raise InvalidInputError("predict_model3 needs model_id 3 or 4")
    a = 2.0 * params.pa * qp.qa
    b = 2.0 * params.pb * qp.qb
    accidental = (a[:, :, None, None] * b[None, None, :, :]
                  * (params.window_w / params.duration_T))
    c = params.pc * qp.qc + accidental
    return Prediction(a=a, b=b, c=c)


def predict_model4(params: FilterParams, qp: QuantumProbs) -> Prediction:
    """Model 3 means plus cv-inflated variances v = mean + (mean*cv)^2."""
    if params.model_id != 4:
        raise InvalidInputError("predict_model4 needs model_id 4")
    pred = predict_model3(params, qp)
    pred.var_ua = pred.ua + (pred.ua * params.cva) ** 2
    pred.var_ub = pred.ub + (pred.ub * params.cvb) ** 2
    pred.var_c = pred.c + (pred.c * params.cvc) ** 2
    return pred


_PREDICTORS = {1: predict_model1, 2: predict_model2, 3: predict_model3, 4: predict_model4}


def predict(params: FilterParams, qp: QuantumProbs) -> Prediction:
    return _PREDICTORS[params.model_id](params, qp)


def fair_sampling_ratios(pred: Prediction) -> np.ndarray:
    """Within-quadrant coincidence fractions c_ijkl / sum_jl c_ijkl.

    Under fair sampling these equal the quantum probabilities qc_ijkl.
    """
    quad = pred.c.sum(axis=(1, 3), keepdims=True)
    if np.min(quad) <= 0:
        raise DegenerateInputError("zero quadrant sum in fair-sampling ratio")
    return pred.c / quad


# --- persistence ------------------------------------------------------------

_CSV_HEADER = (["experiment_id"]
               + [f"a_{i}{j}" for i in range(2) for j in range(2)]
               + [f"b_{k}{l}" for k in range(2) for l in range(2)]
               + [f"c_{i}{j}{k}{l}" for i in range(2) for j in range(2)
                  for k in range(2) for l in range(2)])


def write_count_tables(path, tables: list[tuple[str, CountTable]]) -> None:
    """One CSV row per experiment: id, 4 a, 4 b, 16 c (lexicographic ijkl)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for exp_id, t in tables:
            row = [exp_id] + [repr(float(v)) for v in
                              np.concatenate([t.a.ravel(), t.b.ravel(), t.c.ravel()])]
            writer.writerow(row)


def read_count_tables(path) -> list[tuple[str, CountTable]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _CSV_HEADER:
            raise InvalidInputError(f"unexpected count CSV header in {path}")
        out = []
        for row in reader:
            if len(row) != 25:
                raise InvalidInputError(f"count CSV row has {len(row)} columns, expected 25")
            vals = np.array([float(v) for v in row[1:]])
            out.append((row[0], CountTable(a=vals[:4].reshape(2, 2),
                                           b=vals[4:8].reshape(2, 2),
                                           c=vals[8:].reshape(2, 2, 2, 2))))
    return out


def count_table_to_json(table: CountTable) -> dict:
    return {"a": table.a.tolist(), "b": table.b.tolist(), "c": table.c.tolist()}


def count_table_from_json(data: dict) -> CountTable:
    return CountTable(a=np.asarray(data["a"]), b=np.asarray(data["b"]),
                      c=np.asarray(data["c"]))


def dump_count_tables_json(path, tables: list[tuple[str, CountTable]]) -> None:
    payload = [{"experiment_id": eid, **count_table_to_json(t)} for eid, t in tables]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
