"""Simultaneous fit of the density matrix and filter parameters.

All experiments are fitted at once: one shared density matrix and one
shared set of filter parameters must explain every experiment's 24
channels.  The optimizer works in unconstrained space (density factor
entries raw, probabilities through a logistic transform, rates and
products through logs), so every iterate maps to a valid model.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .counts import (PREDICTION_FLOOR, CountTable, FilterParams, Prediction,
                     predict)
from .errors import EprbError, InvalidInputError
from .quantum import (ExperimentGeometry, decode_density, encode_density,
                      probs_from_coincidence_ops, singlet_state)
from .stats import FitStatistics, chi_square_X, chi_square_Xrev, degrees_of_freedom

N_DENSITY_PARAMS = 16


@dataclass(frozen=True)
class ParameterLayout:
    """Mapping between the optimizer vector and (density, filter) parameters.

    The vector starts with the 16 density-factor entries (one overall scale
    redundant); the model block follows: log N and logit probabilities for
    models 1-2, log products for model 3.
    """

    model_id: int
    n_raw: int
    n_effective: int
    names: tuple[str, ...]

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_raw,):
            raise InvalidInputError(f"vector must have shape ({self.n_raw},), got {x.shape}")
        return x[:N_DENSITY_PARAMS], x[N_DENSITY_PARAMS:]


def pack_parameters(model_id: int) -> ParameterLayout:
    density = tuple(f"L_{k}" for k in range(N_DENSITY_PARAMS))
    if model_id == 1:
        names = density + ("log_N", "logit_pa_0", "logit_pa_1", "logit_pb_0", "logit_pb_1")
        return ParameterLayout(1, 21, 20, names)
    if model_id == 2:
        names = (density + ("log_N",)
                 + tuple(f"logit_pa_{i}{j}" for i in range(2) for j in range(2))
                 + tuple(f"logit_pb_{k}{l}" for k in range(2) for l in range(2)))
        return ParameterLayout(2, 25, 24, names)
    if model_id == 3:
        names = (density
                 + tuple(f"log_Npa_{i}{j}" for i in range(2) for j in range(2))
                 + tuple(f"log_Npb_{k}{l}" for k in range(2) for l in range(2))
                 + tuple(f"log_Npc_{i}{j}{k}{l}" for i in range(2) for j in range(2)
                         for k in range(2) for l in range(2)))
        return ParameterLayout(3, 40, 39, names)
    raise InvalidInputError(f"pack_parameters supports models 1-3, got {model_id}")


def filter_params_from_block(model_id: int, block: np.ndarray, window_w: float,
                             duration_T: float) -> FilterParams:
    if model_id == 1:
        return FilterParams(model_id=1, n_pairs=float(np.exp(block[0])),
                            pa=expit(block[1:3]), pb=expit(block[3:5]))
    if model_id == 2:
        return FilterParams(model_id=2, n_pairs=float(np.exp(block[0])),
                            pa=expit(block[1:5]).reshape(2, 2),
                            pb=expit(block[5:9]).reshape(2, 2))
    if model_id == 3:
        return FilterParams(model_id=3, pa=np.exp(block[0:4]).reshape(2, 2),
                            pb=np.exp(block[4:8]).reshape(2, 2),
                            pc=np.exp(block[8:24]).reshape(2, 2, 2, 2),
                            window_w=window_w, duration_T=duration_T)
    raise InvalidInputError(f"unsupported model_id {model_id}")


def block_from_filter_params(params: FilterParams) -> np.ndarray:
    if params.model_id == 1:
        return np.concatenate([[np.log(params.n_pairs)], logit(params.pa), logit(params.pb)])
    if params.model_id == 2:
        return np.concatenate([[np.log(params.n_pairs)],
                               logit(params.pa.ravel()), logit(params.pb.ravel())])
    if params.model_id == 3:
        return np.log(np.concatenate([params.pa.ravel(), params.pb.ravel(),
                                      params.pc.ravel()]))
    raise InvalidInputError(f"unsupported model_id {params.model_id}")


@dataclass
class OptimizerConfig:
    max_iter: int = 3000
    tol: float = 1e-10
    restarts: int = 3
    seed: int = 0
    method: str = "gradient"       # "gradient" (L-BFGS-B, 2-point) or "nelder-mead"
    nm_max_evals: int = 100_000
    init_noise: float = 0.05       # restart perturbation, model block
    density_init_noise: float = 1e-3  # restart perturbation, density block


@dataclass
class FitProblem:
    model_id: int
    observed: list[CountTable]
    geometries: list[ExperimentGeometry]
    window_w: float = 0.0
    duration_T: float = 5e9
    config: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if len(self.observed) < 1:
            raise InvalidInputError("need at least one experiment")
        if len(self.observed) != len(self.geometries):
            raise InvalidInputError("observed and geometries must align")


class _Compiled:
    """Stacked arrays for fast repeated objective evaluation."""

    def __init__(self, problem: FitProblem):
        self.problem = problem
        self.layout = pack_parameters(problem.model_id)
        self.ops = np.stack([g.coincidence_ops() for g in problem.geometries])
        ua, ub = zip(*(t.unpaired() for t in problem.observed))
        self.obs_ua = np.stack(ua)                       # (n, 2, 2)
        self.obs_ub = np.stack(ub)
        self.obs_c = np.stack([t.c for t in problem.observed])
        self.n_exp = len(problem.observed)

    def predictions(self, x: np.ndarray):
        """Stacked (a, b, c) predictions, each with leading experiment axis."""
        density, block = self.layout.split(np.asarray(x, dtype=float))
        rho = decode_density(density)
        qp = probs_from_coincidence_ops(self.ops, rho)
        m = self.problem.model_id
        if m == 1:
            n = np.exp(block[0])
            pa, pb = expit(block[1:3]), expit(block[3:5])
            a = 2.0 * n * pa[None, :, None] * qp.qa
            b = 2.0 * n * pb[None, :, None] * qp.qb
            c = n * pa[None, :, None, None, None] * pb[None, None, None, :, None] * qp.qc
        elif m == 2:
            n = np.exp(block[0])
            pa = expit(block[1:5]).reshape(2, 2)
            pb = expit(block[5:9]).reshape(2, 2)
            a = 2.0 * n * pa[None] * qp.qa
            b = 2.0 * n * pb[None] * qp.qb
            c = n * pa[None, :, :, None, None] * pb[None, None, None, :, :] * qp.qc
        elif m == 3:
            na = np.exp(block[0:4]).reshape(2, 2)
            nb = np.exp(block[4:8]).reshape(2, 2)
            nc = np.exp(block[8:24]).reshape(2, 2, 2, 2)
            a = 2.0 * na[None] * qp.qa
            b = 2.0 * nb[None] * qp.qb
            ratio = self.problem.window_w / self.problem.duration_T
            c = (nc[None] * qp.qc
                 + a[:, :, :, None, None] * b[:, None, None, :, :] * ratio)
        else:
            raise InvalidInputError(f"unsupported model_id {m}")
        return a, b, c

    def objective(self, x: np.ndarray) -> float:
        a, b, c = self.predictions(x)
        ua = a - c.sum(axis=(3, 4))
        ub = b - c.sum(axis=(1, 2))
        total = 0.0
        for obs, pred in ((self.obs_ua, ua), (self.obs_ub, ub), (self.obs_c, c)):
            denom = np.maximum(pred, PREDICTION_FLOOR)
            total += float((((obs - pred) ** 2) / denom).sum())
        return total


def objective(problem: FitProblem, x) -> float:
    """The chi-square statistic at an optimizer vector (finite for finite x)."""
    return _Compiled(problem).objective(x)


MIXED_INIT_FRACTION = 0.05


def initial_guess(problem: FitProblem, compiled: _Compiled | None = None) -> np.ndarray:
    """Moment-based starting point: near-singlet state, scale set from the data.

    The state starts at the singlet with a small white-noise admixture: all
    measurement directions lie in the x-z plane, so several state components
    are invisible to the data and the fit keeps whatever the start point put
    there; a full-rank start also keeps the Cholesky factor away from the
    rank-deficient boundary where those directions have zero gradient.
    """
    compiled = compiled or _Compiled(problem)
    rho0 = ((1.0 - MIXED_INIT_FRACTION) * singlet_state()
            + MIXED_INIT_FRACTION * np.eye(4) / 4.0)
    density0 = encode_density(rho0)
    mean_a = np.mean([t.a for t in problem.observed], axis=0)  # (2, 2)
    mean_b = np.mean([t.b for t in problem.observed], axis=0)
    mean_c = np.mean([t.c for t in problem.observed], axis=0)  # (2, 2, 2, 2)
    quad = mean_c.sum(axis=(1, 3))                             # (2, 2) by (i, k)
    a_i = mean_a.sum(axis=1) / 2.0                             # N pa_i
    b_k = mean_b.sum(axis=1) / 2.0                             # N pb_k
    eps = 1e-12
    n_est = float(np.mean(a_i[:, None] * b_k[None, :] / np.maximum(quad, eps)))
    n_est = max(n_est, 1.0)
    qp0 = probs_from_coincidence_ops(compiled.ops, singlet_state())
    mean_qc = np.maximum(qp0.qc.mean(axis=0), 1e-4)
    if problem.model_id == 1:
        pa = np.clip(a_i / n_est, 1e-6, 1 - 1e-6)
        pb = np.clip(b_k / n_est, 1e-6, 1 - 1e-6)
        block = np.concatenate([[np.log(n_est)], logit(pa), logit(pb)])
    elif problem.model_id == 2:
        pa = np.clip(mean_a / n_est, 1e-6, 1 - 1e-6)     # a_hat = 2 N pa qa, qa ~ 0.5
        pb = np.clip(mean_b / n_est, 1e-6, 1 - 1e-6)
        block = np.concatenate([[np.log(n_est)], logit(pa.ravel()), logit(pb.ravel())])
    elif problem.model_id == 3:
        na = np.maximum(mean_a, 1.0)                      # a_hat = 2 (N pa) qa, qa ~ 0.5
        nb = np.maximum(mean_b, 1.0)
        ratio = problem.window_w / problem.duration_T
        accid = (na[:, :, None, None] * nb[None, None, :, :]) * ratio
        nc = np.maximum((mean_c - accid) / mean_qc, 1.0)
        block = np.log(np.concatenate([na.ravel(), nb.ravel(), nc.ravel()]))
    else:
        raise InvalidInputError(f"unsupported model_id {problem.model_id}")
    return np.concatenate([density0, block])


@dataclass
class FitResult:
    model_id: int
    params: FilterParams
    rho: np.ndarray
    x_vector: np.ndarray
    statistics: FitStatistics
    trace: list[tuple[int, float]]
    converged: bool
    n_evaluations: int


def _run_single(compiled: _Compiled, x0: np.ndarray, cfg: OptimizerConfig):
    trace: list[tuple[int, float]] = []
    state = {"n": 0, "best": np.inf}

    def wrapped(x):
        val = compiled.objective(x)
        state["n"] += 1
        if val < state["best"] - 0.0:
            state["best"] = val
            trace.append((state["n"], val))
        return val

    if cfg.method == "nelder-mead":
        res = minimize(wrapped, x0, method="Nelder-Mead",
                       options={"maxfev": cfg.nm_max_evals, "fatol": max(cfg.tol, 1e-8),
                                "xatol": 1e-8})
        x_start = res.x
    else:
        x_start = x0
    res = minimize(wrapped, x_start, method="L-BFGS-B",
                   options={"maxiter": cfg.max_iter, "ftol": cfg.tol, "gtol": 1e-9,
                            "maxfun": 10 * cfg.max_iter * (compiled.layout.n_raw + 1)})
    if not np.isfinite(res.fun):
        raise EprbError(f"optimizer diverged to non-finite objective; trace tail {trace[-3:]}")
    return res.x, float(res.fun), bool(res.success), trace, state["n"]


def fit(problem: FitProblem) -> FitResult:
    """Minimize the chi-square over density and filter parameters.

    Runs the configured number of restarts (the first from the moment-based
    initial guess, the rest from perturbed copies) and keeps the best.
    """
    compiled = _Compiled(problem)
    cfg = problem.config
    rng = np.random.default_rng(cfg.seed)
    x0 = initial_guess(problem, compiled)
    best = None
    total_evals = 0
    noise_scale = np.concatenate([np.full(N_DENSITY_PARAMS, cfg.density_init_noise),
                                  np.full(x0.size - N_DENSITY_PARAMS, cfg.init_noise)])
    for r in range(max(cfg.restarts, 1)):
        start = x0 if r == 0 else x0 + noise_scale * rng.standard_normal(x0.shape)
        x, fun, success, trace, n_evals = _run_single(compiled, start, cfg)
        total_evals += n_evals
        if best is None or fun < best[1]:
            best = (x, fun, success, trace)
    x, fun, success, trace = best
    density, block = compiled.layout.split(x)
    rho = decode_density(density)
    params = filter_params_from_block(problem.model_id, block,
                                      problem.window_w, problem.duration_T)
    preds = predictions_for(problem, params, rho)
    x_check = chi_square_X(problem.observed, preds)
    stats = FitStatistics(model_id=problem.model_id, x=x_check,
                          df=degrees_of_freedom(problem.model_id,
                                                n_counts=24 * compiled.n_exp))
    return FitResult(model_id=problem.model_id, params=params, rho=rho,
                     x_vector=x, statistics=stats, trace=trace,
                     converged=success, n_evaluations=total_evals)


def predictions_for(problem: FitProblem, params: FilterParams,
                    rho: np.ndarray) -> list[Prediction]:
    from .quantum import quantum_probs
    return [predict(params, quantum_probs(rho, g)) for g in problem.geometries]


def evaluate_model4(problem: FitProblem, fit3: FitResult, cva, cvb, cvc,
                    refit: bool = False) -> tuple[FitStatistics, FilterParams]:
    """Model 4: model 3's fitted means with hand-set coefficients of variation.

    By default reuses the model 3 optimum and only recomputes the revised
    statistic; with refit=True the means are re-optimized against the
    variance-inflated objective.
    """
    p3 = fit3.params
    params4 = FilterParams(model_id=4, pa=p3.pa, pb=p3.pb, pc=p3.pc,
                           window_w=p3.window_w, duration_T=p3.duration_T,
                           cva=np.asarray(cva, dtype=float),
                           cvb=np.asarray(cvb, dtype=float),
                           cvc=np.asarray(cvc, dtype=float))
    rho = fit3.rho
    if refit:
        compiled = _Compiled(problem)

        def xrev_objective(x):
            density, block = compiled.layout.split(x)
            r = decode_density(density)
            p3x = filter_params_from_block(3, block, problem.window_w, problem.duration_T)
            p4x = FilterParams(model_id=4, pa=p3x.pa, pb=p3x.pb, pc=p3x.pc,
                               window_w=p3x.window_w, duration_T=p3x.duration_T,
                               cva=params4.cva, cvb=params4.cvb, cvc=params4.cvc)
            try:
                return chi_square_Xrev(problem.observed, predictions_for(problem, p4x, r))
            except EprbError:
                return 1e12
        res = minimize(xrev_objective, fit3.x_vector, method="L-BFGS-B",
                       options={"maxiter": problem.config.max_iter,
                                "ftol": problem.config.tol})
        density, block = pack_parameters(3).split(res.x)
        rho = decode_density(density)
        p3r = filter_params_from_block(3, block, problem.window_w, problem.duration_T)
        params4 = FilterParams(model_id=4, pa=p3r.pa, pb=p3r.pb, pc=p3r.pc,
                               window_w=p3r.window_w, duration_T=p3r.duration_T,
                               cva=params4.cva, cvb=params4.cvb, cvc=params4.cvc)
    preds = predictions_for(problem, params4, rho)
    xrev = chi_square_Xrev(problem.observed, preds)
    stats = FitStatistics(model_id=4, x=xrev,
                          df=degrees_of_freedom(4, n_counts=24 * len(problem.observed)))
    return stats, params4
