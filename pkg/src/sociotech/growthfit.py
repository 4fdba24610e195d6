"""Parametric growth laws and least-squares fitting.

Five model families are supported:

* ``exponential``  A * exp(r*t)
* ``logistic``     K / (1 + exp(-r*(t - t_mid)))
* ``hyperbolic``   C / (t0 - t)**alpha, a finite-time pole at ``t0``
* ``escalation``   a sum of logistics, each shorter than the one before
* ``coupled``      population from the coupled population/technology ODE

Fitting minimizes the sum of squared residuals in linear or log space with a
Nelder-Mead simplex plus a fixed restart schedule, so identical inputs always
give identical fits. Internally every family is mapped to an unconstrained
parameter vector expressed in units of the data span, which keeps the
simplex well-scaled and makes the result independent of where the time axis
starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .errors import (
    BeyondSingularity,
    DegenerateData,
    InfeasibleStages,
    NoConvergence,
    NonPositiveValue,
    TooFewPoints,
)
from .macrodynamics import MacroParams, MacroState, solve_at
from .timeseries import TimeSeries

FitSpace = Literal["linear", "log"]

LN81 = 2.0 * math.log(9.0)  # logistic 10%->90% rise time is LN81 / r
T0_RANGE_SPANS = 10.0  # pole searched in (t_max, t_max + 10 * span)


# ---------------------------------------------------------------- models


@dataclass(frozen=True)
class Exponential:
    A: float
    r: float
    kind = "exponential"

    def value(self, t):
        return self.A * np.exp(self.r * np.asarray(t, dtype=float))

    def params(self) -> dict:
        return {"A": self.A, "r": self.r}


@dataclass(frozen=True)
class Logistic:
    K: float
    r: float
    t_mid: float
    kind = "logistic"

    def value(self, t):
        return self.K * expit(self.r * (np.asarray(t, dtype=float) - self.t_mid))

    @property
    def duration(self) -> float:
        """Time to rise from 10% to 90% of ``K``."""
        return LN81 / self.r

    def params(self) -> dict:
        return {"K": self.K, "r": self.r, "t_mid": self.t_mid}


@dataclass(frozen=True)
class Hyperbolic:
    C: float
    t0: float
    alpha: float = 1.0
    kind = "hyperbolic"

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t >= self.t0):
            raise BeyondSingularity(f"hyperbolic law evaluated at or past t0={self.t0}")
        return self.C / (self.t0 - t) ** self.alpha

    def params(self) -> dict:
        return {"C": self.C, "t0": self.t0, "alpha": self.alpha}


@dataclass(frozen=True)
class LogisticEscalation:
    stages: tuple[Logistic, ...]
    kind = "escalation"

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise ValueError("escalation needs at least one stage")
        if any(s.K <= 0 for s in self.stages):
            raise ValueError("stage K values must be positive")
        durations = [s.duration for s in self.stages]
        if any(b >= a for a, b in zip(durations, durations[1:])):
            raise ValueError(f"stage durations must strictly decrease: {durations}")

    def value(self, t):
        return sum(s.value(t) for s in self.stages)

    def params(self) -> dict:
        return {"stages": [s.params() for s in self.stages]}


@dataclass(frozen=True)
class CoupledODE:
    """Population curve of the coupled system started from ``init``."""

    params_: MacroParams
    init: MacroState
    max_step: float
    kind = "coupled"

    def value(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        order = np.argsort(t, kind="stable")
        if t[order[0]] < self.init.t:
            raise ValueError("coupled model cannot be evaluated before its start time")
        sol = solve_at(self.init, self.params_, t[order], self.max_step)
        out = np.empty(len(t))
        out[order] = sol[:, 0]
        if np.any(np.isnan(out)):
            raise BeyondSingularity("coupled trajectory blew up inside the requested range")
        return out

    def params(self) -> dict:
        p, s = self.params_, self.init
        return {"a": p.a, "b": p.b, "c": p.c, "N0": s.N, "T0": s.T, "t_start": s.t}


GrowthModel = Union[Exponential, Logistic, Hyperbolic, LogisticEscalation, CoupledODE]


def eval_model(model: GrowthModel, t):
    """Evaluate ``model`` at scalar or array ``t``."""
    out = model.value(t)
    return float(out) if np.ndim(t) == 0 else out


# ---------------------------------------------------------------- results


@dataclass(frozen=True)
class FitOptions:
    fit_space: Optional[FitSpace] = None  # None: log if data span >= 3 decades
    max_iterations: int = 20000
    restarts: int = 3
    alpha: Optional[float] = None  # fixes the hyperbolic exponent when set
    n_stages: int = 2
    xatol: float = 1e-10
    fatol: float = 1e-15
    ode_steps: int = 400  # RK4 steps across the data span for ``coupled``
    seed: int = 0
    n_resamples: int = 200
    ci_level: float = 0.90
    bootstrap_restarts: int = 1


@dataclass
class FitResult:
    kind: str
    model: GrowthModel
    sse: float
    r_squared: float
    n_points: int
    converged: bool
    iterations: int
    fit_space: FitSpace
    n_params: int = 0

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.model.params(),
            "sse": self.sse,
            "r_squared": self.r_squared,
            "fit_space": self.fit_space,
            "converged": self.converged,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class SingularityEstimate:
    t0_hat: float
    ci_low: float
    ci_high: float
    n_resamples: int
    seed: int
    samples: tuple[float, ...] = field(default=(), repr=False)

    def to_json(self) -> dict:
        return {
            "t0_hat": self.t0_hat,
            "ci": [self.ci_low, self.ci_high],
            "n_resamples": self.n_resamples,
            "seed": self.seed,
        }


@dataclass
class ModelComparison:
    kind: str
    result: Optional[FitResult]
    aic: float
    n_params: int
    error: Optional[str] = None


# ---------------------------------------------------------------- fit space


def default_fit_space(values: np.ndarray) -> FitSpace:
    if np.all(values > 0) and values.max() / values.min() >= 1e3:
        return "log"
    return "linear"


def _to_space(y: np.ndarray, space: FitSpace) -> np.ndarray:
    if space == "linear":
        return y
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(y > 0, np.log(np.where(y > 0, y, 1.0)), -np.inf)


def _ss_total(y_fs: np.ndarray) -> float:
    return float(np.sum((y_fs - y_fs.mean()) ** 2))


def r_squared(series: TimeSeries, model: GrowthModel, fit_space: FitSpace = "linear") -> float:
    """Coefficient of determination of ``model`` on ``series`` in ``fit_space``."""
    y = series.values
    if fit_space == "log":
        series.require_positive()
    y_fs = _to_space(y, fit_space)
    f_fs = _to_space(np.asarray(model.value(series.t), dtype=float), fit_space)
    sst = _ss_total(y_fs)
    if sst == 0:
        raise DegenerateData("series is constant; R^2 is undefined")
    return 1.0 - float(np.sum((y_fs - f_fs) ** 2)) / sst


# ---------------------------------------------------------------- problems
#
# A problem maps an internal vector x to model predictions on the scaled time
# axis u = (t - t_ref) / span, where t_ref is the last data time (so u <= 0).


@dataclass
class _Problem:
    kind: str
    n_free: int
    predict: Callable[[np.ndarray], np.ndarray]
    to_model: Callable[[np.ndarray], GrowthModel]
    candidates: Callable[[], list[np.ndarray]]


def _linreg(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and intercept of y on x."""
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx) if sxx > 0 else 0.0
    return slope, ym - slope * xm


def _exponential_problem(t, y, t_ref, span):
    u = (t - t_ref) / span

    def predict(x):
        return np.exp(x[0] + x[1] * u)

    def to_model(x):
        return Exponential(A=math.exp(x[0] - x[1] * t_ref / span), r=float(x[1] / span))

    def candidates():
        if np.all(y > 0):
            k, lv = _linreg(u, np.log(y))
            return [np.array([lv, k])]
        return [np.array([math.log(np.abs(y).mean() or 1.0), 0.0])]

    return _Problem("exponential", 2, predict, to_model, candidates)


def _logistic_init(u, y) -> list[np.ndarray]:
    """(log K, log k, m) guesses from linearizing log(K/y - 1) for trial K."""
    out = []
    if not np.all(y > 0):
        return [np.array([math.log(max(np.abs(y).max(), 1e-300) * 2), math.log(5.0), 0.0])]
    for mult in (1.02, 1.1, 1.3, 1.6, 2.0, 3.0, 5.0, 10.0, 30.0, 100.0):
        K = y.max() * mult
        slope, icpt = _linreg(u, np.log(K / y - 1.0))
        k = -slope
        if k <= 0:
            continue
        out.append(np.array([math.log(K), math.log(k), icpt / k]))
    return out or [np.array([math.log(y.max() * 2), math.log(5.0), 0.0])]


def _logistic_problem(t, y, t_ref, span):
    u = (t - t_ref) / span

    def predict(x):
        return math.exp(x[0]) * expit(math.exp(x[1]) * (u - x[2]))

    def to_model(x):
        return Logistic(K=math.exp(x[0]), r=math.exp(x[1]) / span, t_mid=float(t_ref + x[2] * span))

    return _Problem("logistic", 3, predict, to_model, lambda: _logistic_init(u, y))


def _hyperbolic_problem(t, y, t_ref, span, alpha_fixed, space):
    # value = v_ref * (d / (d - u))**alpha with d = (t0 - t_ref)/span in (0, 10)
    u = (t - t_ref) / span
    fixed = alpha_fixed is not None

    def unpack(x):
        d = T0_RANGE_SPANS * float(expit(x[1]))
        alpha = alpha_fixed if fixed else math.exp(x[2])
        return x[0], d, alpha

    def predict(x):
        lv, d, alpha = unpack(x)
        if d <= 0:
            return np.full_like(u, np.nan)
        return np.exp(lv + alpha * np.log(d / (d - u)))

    def to_model(x):
        lv, d, alpha = unpack(x)
        t0 = float(t_ref + d * span)
        # C / (t0 - t_ref)**alpha == v_ref
        C = math.exp(lv + alpha * math.log(d * span))
        return Hyperbolic(C=C, t0=t0, alpha=float(alpha))

    def candidates():
        if not np.all(y > 0):
            return [np.array([0.0, 0.0] if fixed else [0.0, 0.0, 0.0])]
        ly = np.log(y)
        best, best_sse = None, math.inf
        y_fs = _to_space(y, space)
        for d in np.geomspace(1e-4, 0.999 * T0_RANGE_SPANS, 400):
            X = np.log(d / (d - u))
            if fixed:
                alpha = alpha_fixed
                lv = float(np.mean(ly - alpha * X))
            else:
                alpha, lv = _linreg(X, ly)
                if alpha <= 0:
                    continue
            f = np.exp(lv + alpha * X)
            if space == "linear":
                # best scale for this shape in linear space
                lv += math.log(float(f @ y) / float(f @ f)) if f @ y > 0 else 0.0
                f = np.exp(lv + alpha * X)
            sse = float(np.sum((y_fs - _to_space(f, space)) ** 2))
            if sse < best_sse:
                g = float(logit(d / T0_RANGE_SPANS))
                best_sse = sse
                best = [lv, g] if fixed else [lv, g, math.log(alpha)]
        return [np.array(best if best is not None else ([0.0, 0.0] if fixed else [0.0, 0.0, 0.0]))]

    return _Problem("hyperbolic", 2 if fixed else 3, predict, to_model, candidates)


def _escalation_problem(t, y, t_ref, span, n):
    # x = [log K_1..K_n, m_1..m_n, log k_1, q_2..q_n]; k_j = k_{j-1} / sigmoid(q_j)
    u = (t - t_ref) / span

    def unpack(x):
        K = np.exp(x[:n])
        m = x[n : 2 * n]
        k = np.empty(n)
        k[0] = math.exp(x[2 * n])
        for j in range(1, n):
            k[j] = k[j - 1] / expit(x[2 * n + j])
        return K, m, k

    def predict(x):
        K, m, k = unpack(x)
        return np.sum(K[:, None] * expit(k[:, None] * (u[None, :] - m[:, None])), axis=0)

    def to_model(x):
        K, m, k = unpack(x)
        return LogisticEscalation(
            tuple(
                Logistic(K=float(K[j]), r=float(k[j] / span), t_mid=float(t_ref + m[j] * span))
                for j in range(n)
            )
        )

    def candidates():
        if n == 1:
            return _logistic_init(u, y)
        lo, hi = float(y.min()), float(y.max())
        mids = []
        for j in range(n):
            level = lo + (j + 0.5) / n * (hi - lo)
            idx = int(np.argmax(y >= level))
            mids.append(u[idx])
        out = []
        for first in (0.5, 0.25, 0.1):
            for ratio in (0.5, 0.3, 0.7):
                k1 = LN81 / (first / n)
                x = [math.log(max(hi, 1e-300) / n)] * n + mids + [math.log(k1)]
                x += [float(logit(ratio))] * (n - 1)
                out.append(np.array(x))
        return out

    return _Problem("escalation", 3 * n, predict, to_model, candidates)


def _coupled_problem(t, y, t_ref, span, space, opts):
    # x = log of (a*Ns*span, b/Ns, c*Ns*span, N0/Ns) with T0 fixed at 1;
    # b and T0 only enter through b*T0, so T0 carries no information
    Ns = float(y[0]) if y[0] > 0 else float(np.abs(y).mean() or 1.0)
    t_start = float(t[0])
    max_step = span / opts.ode_steps

    def unpack(x):
        e = [math.exp(v) for v in x]
        return MacroParams(a=e[0] / (Ns * span), b=e[1] * Ns, c=e[2] / (Ns * span)), e[3] * Ns

    def predict(x):
        if not np.all(np.isfinite(x)) or np.any(np.abs(x) > 700):
            return np.full_like(t, np.nan)
        params, N0 = unpack(x)
        return solve_at(MacroState(t_start, N0, 1.0), params, t, max_step)[:, 0]

    def to_model(x):
        params, N0 = unpack(x)
        return CoupledODE(params, MacroState(t_start, N0, 1.0), max_step)

    def candidates():
        hyp = _fit_problem(
            _hyperbolic_problem(t, y, t_ref, span, 1.0, space),
            y, space, replace(opts, restarts=0),
        )
        t0 = hyp[0].t0 if isinstance(hyp[0], Hyperbolic) else t_ref + span
        b = Ns
        c = 1.0 / (b * (t0 - t_start))
        out = []
        for ratio in (10.0, 100.0, 1000.0):
            a = ratio * c
            out.append(np.log([a * Ns * span, b / Ns, c * Ns * span, 1.0]))
        return out

    return _Problem("coupled", 4, predict, to_model, candidates)


# ---------------------------------------------------------------- minimizer


def _objective(problem: _Problem, y_fs: np.ndarray, space: FitSpace, sst: float):
    def obj(x):
        with np.errstate(all="ignore"):
            f = problem.predict(x)
            r = y_fs - _to_space(f, space)
            val = float(r @ r) / sst
        return val if math.isfinite(val) else math.inf

    return obj


def _simplex(obj, x0, maxiter, opts):
    n = len(x0)
    sim = np.vstack([x0] + [x0 + 0.1 * np.eye(n)[i] for i in range(n)])
    return minimize(
        obj,
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": sim,
            "maxiter": maxiter,
            "maxfev": 4 * maxiter,
            "xatol": opts.xatol,
            "fatol": opts.fatol,
            "adaptive": n > 3,
        },
    )


def _minimize(obj, starts: Sequence[np.ndarray], opts: FitOptions, restarts: int):
    """Simplex descent from the best start, then ``restarts`` perturbed re-runs.

    Perturbations come from fixed-seed generators so the schedule is the same
    on every call. Returns (x, fun, converged, iterations).
    """
    x0 = min(starts, key=obj)
    budget = opts.max_iterations
    res = _simplex(obj, np.asarray(x0, dtype=float), budget, opts)
    best_x, best_f, converged, used = res.x, res.fun, bool(res.success), int(res.nit)
    for k in range(restarts):
        left = budget - used
        if left <= 0:
            converged = False
            break
        kick = np.random.default_rng(k).normal(0.0, 0.1, size=len(best_x))
        res = _simplex(obj, best_x + kick, left, opts)
        used += int(res.nit)
        if res.fun <= best_f:
            best_x, best_f, converged = res.x, res.fun, bool(res.success)
    return best_x, best_f, converged, used


def _fit_problem(problem, y, space, opts, x_start=None, restarts=None):
    y_fs = _to_space(y, space)
    sst = _ss_total(y_fs)
    obj = _objective(problem, y_fs, space, sst)
    starts = [x_start] if x_start is not None else problem.candidates()
    restarts = opts.restarts if restarts is None else restarts
    x, fun, converged, nit = _minimize(obj, starts, opts, restarts)
    return problem.to_model(x), x, fun * sst, converged, nit


# ---------------------------------------------------------------- public API

KINDS = ("exponential", "logistic", "hyperbolic", "escalation", "coupled")


def _build_problem(kind, t, y, opts, space):
    t_ref = float(t[-1])
    span = float(t[-1] - t[0])
    if kind == "exponential":
        return _exponential_problem(t, y, t_ref, span)
    if kind == "logistic":
        return _logistic_problem(t, y, t_ref, span)
    if kind == "hyperbolic":
        return _hyperbolic_problem(t, y, t_ref, span, opts.alpha, space)
    if kind == "escalation":
        return _escalation_problem(t, y, t_ref, span, opts.n_stages)
    if kind == "coupled":
        return _coupled_problem(t, y, t_ref, span, space, opts)
    raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")


def _prepare(kind, series, opts):
    if kind == "escalation":
        if opts.n_stages < 1:
            raise InfeasibleStages("n_stages must be at least 1")
        if len(series) < 3 * opts.n_stages + 1:
            raise InfeasibleStages(
                f"{opts.n_stages} stages need {3 * opts.n_stages + 1} points, have {len(series)}"
            )
    t, y = series.t, series.values
    space = opts.fit_space or default_fit_space(y)
    if space == "log":
        series.require_positive()
    if kind == "coupled" and not np.all(y > 0):
        raise NonPositiveValue("coupled model needs a positive population series")
    if _ss_total(_to_space(y, space)) == 0:
        raise DegenerateData(f"constant series carries no growth information for {kind}")
    problem = _build_problem(kind, t, y, opts, space)
    series.require_fit_ready(max(3, problem.n_free + 1))
    return t, y, space, problem


def _result(kind, series, space, model, sse, converged, nit, n_free):
    sst = _ss_total(_to_space(series.values, space))
    return FitResult(
        kind=kind,
        model=model,
        sse=sse,
        r_squared=1.0 - sse / sst,
        n_points=len(series),
        converged=converged,
        iterations=nit,
        fit_space=space,
        n_params=n_free,
    )


def fit(kind: str, series: TimeSeries, opts: Optional[FitOptions] = None) -> FitResult:
    """Least-squares fit of one model family to ``series``.

    Never raises on non-convergence: the best point found is returned with
    ``converged=False``.
    """
    opts = opts or FitOptions()
    t, y, space, problem = _prepare(kind, series, opts)
    model, _, sse, converged, nit = _fit_problem(problem, y, space, opts)
    return _result(kind, series, space, model, sse, converged, nit, problem.n_free)


def fit_escalation(series: TimeSeries, n_stages: int, opts: Optional[FitOptions] = None) -> FitResult:
    opts = replace(opts or FitOptions(), n_stages=n_stages)
    return fit("escalation", series, opts)


def estimate_singularity(
    series: TimeSeries, alpha: Optional[float] = None, opts: Optional[FitOptions] = None
) -> SingularityEstimate:
    """Pole date of the best hyperbolic fit with a residual-bootstrap interval.

    ``alpha=None`` leaves the exponent free. Resample ``i`` draws from a
    generator seeded with ``(opts.seed, i)``, so the interval does not depend
    on the order in which resamples are evaluated.
    """
    opts = replace(opts or FitOptions(), alpha=alpha)
    t, y, space, problem = _prepare("hyperbolic", series, opts)
    model, x_hat, sse, converged, nit = _fit_problem(problem, y, space, opts)
    if not converged:
        raise NoConvergence(
            "hyperbolic fit did not converge",
            _result("hyperbolic", series, space, model, sse, converged, nit, problem.n_free),
        )

    fitted_fs = _to_space(problem.predict(x_hat), space)
    resid = _to_space(y, space) - fitted_fs
    n = len(y)
    t0s = np.empty(opts.n_resamples)
    for i in range(opts.n_resamples):
        rng = np.random.default_rng([opts.seed, i])
        y_fs = fitted_fs + resid[rng.integers(0, n, size=n)]
        y_star = np.exp(y_fs) if space == "log" else y_fs
        boot = _build_problem("hyperbolic", t, y_star, opts, space)
        m, *_ = _fit_problem(boot, y_star, space, opts, x_start=x_hat,
                             restarts=opts.bootstrap_restarts)
        t0s[i] = m.t0

    tail = (1.0 - opts.ci_level) / 2.0 * 100.0
    lo, hi = np.percentile(t0s, [tail, 100.0 - tail])
    t0_hat = model.t0
    return SingularityEstimate(
        t0_hat=t0_hat,
        ci_low=min(float(lo), t0_hat),
        ci_high=max(float(hi), t0_hat),
        n_resamples=opts.n_resamples,
        seed=opts.seed,
        samples=tuple(float(v) for v in t0s),
    )


def aic(sse: float, n: int, k: int, ss_total: float) -> float:
    # residuals below double-precision resolution of the data count as equal
    sse = max(sse, np.finfo(float).eps * ss_total)
    return n * math.log(sse / n) + 2 * k


def compare_models(
    series: TimeSeries, kinds: Sequence[str], opts: Optional[FitOptions] = None
) -> list[ModelComparison]:
    """Fit every kind and rank by AIC (ties go to fewer parameters).

    A kind that fails to fit is kept in the list with ``aic=inf`` and the
    error message, ranked last.
    """
    opts = opts or FitOptions()
    space = opts.fit_space or default_fit_space(series.values)
    opts = replace(opts, fit_space=space)
    rows = []
    for kind in kinds:
        try:
            res = fit(kind, series, opts)
        except (DegenerateData, InfeasibleStages, TooFewPoints, NonPositiveValue, ValueError) as exc:
            rows.append(ModelComparison(kind, None, math.inf, 0, f"{type(exc).__name__}: {exc}"))
            continue
        sst = _ss_total(_to_space(series.values, space))
        score = aic(res.sse, res.n_points, res.n_params, sst)
        rows.append(ModelComparison(kind, res, score, res.n_params))
    rows.sort(key=lambda r: (r.aic, r.n_params if r.result else math.inf))
    return rows
