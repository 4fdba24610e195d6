"""Coupled population/technology dynamics.

Population ``N`` relaxes logistically toward a carrying capacity ``b*T`` that
scales with the technology level ``T``; technology grows at a rate
proportional to both population and itself::

    dN/dt = a * (b*T - N) * N
    dT/dt = c * N * T

When ``N`` tracks ``b*T`` closely the system reduces to ``dT/dt = c*b*T**2``,
which has a pole at finite time. The integrators here detect that pole and
estimate its date.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence

import numpy as np

from .errors import BeyondSingularity, ConfigInvalid, NonFiniteInput


@dataclass(frozen=True)
class MacroParams:
    a: float
    b: float
    c: float

    def __post_init__(self):
        for name in ("a", "b", "c"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise NonFiniteInput(f"{name}={v}")
            # c = 0 is allowed: it freezes T and leaves a pure logistic in N
            if v < 0 or (v == 0 and name != "c"):
                raise ConfigInvalid(f"{name} must be positive, got {v}")


@dataclass(frozen=True)
class MacroState:
    t: float
    N: float
    T: float

    def is_valid(self) -> bool:
        return (
            math.isfinite(self.t)
            and math.isfinite(self.N)
            and math.isfinite(self.T)
            and self.N > 0
            and self.T > 0
        )


@dataclass(frozen=True)
class IntegratorConfig:
    method: Literal["rk4", "adaptive"] = "adaptive"
    h0: float = 1e-3
    t_end: float = 1.0
    blowup_threshold: float = 1e12
    min_step: float = 1e-9
    rel_tol: float = 1e-8

    def validate(self, init: MacroState) -> None:
        if self.method not in ("rk4", "adaptive"):
            raise ConfigInvalid(f"unknown method {self.method!r}")
        if not (self.h0 > self.min_step > 0):
            raise ConfigInvalid(f"need h0 > min_step > 0, got {self.h0}, {self.min_step}")
        if not self.rel_tol > 0:
            raise ConfigInvalid("rel_tol must be positive")
        if not init.is_valid():
            raise ConfigInvalid(f"initial state {init} is not valid")
        if not self.blowup_threshold > max(init.N, init.T):
            raise ConfigInvalid("blowup_threshold must exceed the initial state")
        if not self.t_end > init.t:
            raise ConfigInvalid(f"t_end={self.t_end} is not after t={init.t}")


@dataclass(frozen=True)
class RegimeSwitch:
    """Post-transition population dynamics: logistic toward ``K_pop``."""

    t_switch: float = 1962.0
    K_pop: float = 1.0
    r_pop: float = 0.03

    def __post_init__(self):
        if not (self.K_pop > 0 and self.r_pop > 0):
            raise ConfigInvalid("K_pop and r_pop must be positive")


@dataclass(frozen=True)
class Termination:
    kind: Literal["ReachedEnd", "BlowUp", "StepUnderflow"]
    t_est: Optional[float] = None

    def __str__(self):
        if self.t_est is None:
            return self.kind
        return f"{self.kind},t_est={self.t_est!r}"


@dataclass
class Trajectory:
    samples: list[MacroState] = field(default_factory=list)
    termination: Termination = Termination("ReachedEnd")

    @property
    def t(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def N(self) -> np.ndarray:
        return np.array([s.N for s in self.samples])

    @property
    def T(self) -> np.ndarray:
        return np.array([s.T for s in self.samples])

    @property
    def final(self) -> MacroState:
        return self.samples[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,N,T\n")
        for s in self.samples:
            buf.write(f"{s.t!r},{s.N!r},{s.T!r}\n")
        buf.write(f"# termination={self.termination}\n")
        return buf.getvalue()


def derivatives(state: MacroState, params: MacroParams) -> tuple[float, float]:
    N, T = state.N, state.T
    if not (math.isfinite(N) and math.isfinite(T)):
        raise NonFiniteInput(f"state {state} is not finite")
    dN = params.a * (params.b * T - N) * N
    dT = params.c * N * T
    if not (math.isfinite(dN) and math.isfinite(dT)):
        raise NonFiniteInput(f"derivatives overflow at {state}")
    return dN, dT


# Right-hand sides work on plain (N, T) floats inside the stepping loops.
Rhs = Callable[[float, float, float], tuple[float, float]]


def _coupled_rhs(params: MacroParams) -> Rhs:
    a, b, c = params.a, params.b, params.c

    def rhs(t, N, T):
        return a * (b * T - N) * N, c * N * T

    return rhs


def _transition_rhs(params: MacroParams, switch: RegimeSwitch) -> Rhs:
    c, K, r = params.c, switch.K_pop, switch.r_pop

    def rhs(t, N, T):
        return r * N * (1.0 - N / K), c * N * T

    return rhs


def _rk4_step(rhs: Rhs, t, N, T, h):
    k1 = rhs(t, N, T)
    k2 = rhs(t + h / 2, N + h / 2 * k1[0], T + h / 2 * k1[1])
    k3 = rhs(t + h / 2, N + h / 2 * k2[0], T + h / 2 * k2[1])
    k4 = rhs(t + h, N + h * k3[0], T + h * k3[1])
    N1 = N + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    T1 = T + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return N1, T1


def _ok(N, T) -> bool:
    return math.isfinite(N) and math.isfinite(T) and N > 0 and T > 0


def _remaining_time(rhs: Rhs, s: MacroState) -> float:
    # T / (dT/dt); for T ~ (t* - t)**-alpha this equals (t* - t) / alpha
    _, dT = rhs(s.t, s.N, s.T)
    return s.T / dT if dT > 0 else math.inf


def _estimate_pole(rhs: Rhs, samples: Sequence[MacroState]) -> float:
    """Extrapolate the remaining-time function linearly to zero.

    Exact for a pure power-law pole; falls back to the last time when the
    remaining time is not shrinking (e.g. exponential growth past the
    threshold).
    """
    last = samples[-1]
    if len(samples) < 2:
        return last.t
    prev = samples[-2]
    r1, r2 = _remaining_time(rhs, prev), _remaining_time(rhs, last)
    if not (math.isfinite(r1) and math.isfinite(r2)) or r1 <= r2:
        return last.t
    return last.t + r2 * (last.t - prev.t) / (r1 - r2)


def _run(rhs: Rhs, init: MacroState, cfg: IntegratorConfig, t_stop: float) -> Trajectory:
    """Integrate ``rhs`` from ``init`` to ``t_stop`` (<= cfg.t_end)."""
    samples = [init]
    t, N, T = init.t, init.N, init.T
    h = cfg.h0
    adaptive = cfg.method == "adaptive"
    # |dT/dt| at the last two accepted states
    prev_growth = cur_growth = abs(rhs(t, N, T)[1])
    thresh = cfg.blowup_threshold

    while t < t_stop:
        h_try = min(h, t_stop - t)
        landing = h_try == t_stop - t

        if adaptive:
            N_big, T_big = _rk4_step(rhs, t, N, T, h_try)
            N_mid, T_mid = _rk4_step(rhs, t, N, T, h_try / 2)
            if _ok(N_mid, T_mid):
                N_new, T_new = _rk4_step(rhs, t + h_try / 2, N_mid, T_mid, h_try / 2)
            else:
                N_new = T_new = math.nan
            if _ok(N_new, T_new) and _ok(N_big, T_big):
                err = max(abs(N_new - N_big) / N_new, abs(T_new - T_big) / T_new) / 15.0
            else:
                err = math.inf
            accept = err <= cfg.rel_tol
            if accept:
                # local extrapolation of the step-doubling pair
                N_ex = N_new + (N_new - N_big) / 15.0
                T_ex = T_new + (T_new - T_big) / 15.0
                if _ok(N_ex, T_ex):
                    N_new, T_new = N_ex, T_ex
            if err == 0:
                factor = 4.0
            elif math.isfinite(err):
                factor = min(4.0, max(0.1, 0.9 * (cfg.rel_tol / err) ** 0.2))
            else:
                factor = 0.5
        else:
            N_new, T_new = _rk4_step(rhs, t, N, T, h_try)
            accept = _ok(N_new, T_new)
            factor = 1.0 if accept else 0.5

        if not accept:
            h = h_try * factor
            if h < cfg.min_step:
                if cur_growth > prev_growth:
                    return Trajectory(samples, Termination("BlowUp", _estimate_pole(rhs, samples)))
                return Trajectory(samples, Termination("StepUnderflow"))
            continue

        t = t_stop if landing else t + h_try
        N, T = N_new, T_new
        samples.append(MacroState(t, N, T))
        prev_growth, cur_growth = cur_growth, abs(rhs(t, N, T)[1])
        if adaptive:
            # don't let a short landing step shrink the next one
            h = max(h, h_try) * factor if landing else h_try * factor
        if N >= thresh or T >= thresh:
            return Trajectory(samples, Termination("BlowUp", _estimate_pole(rhs, samples)))

    return Trajectory(samples, Termination("ReachedEnd"))


def integrate(init: MacroState, params: MacroParams, cfg: IntegratorConfig) -> Trajectory:
    """Integrate the coupled system from ``init`` until ``cfg.t_end`` or blow-up.

    The trajectory records every accepted step. Steps producing a
    non-positive or non-finite state are rejected and halved; if the step
    would fall below ``cfg.min_step`` the run ends in ``BlowUp`` when the
    technology growth rate was still increasing, else in ``StepUnderflow``.
    """
    cfg.validate(init)
    return _run(_coupled_rhs(params), init, cfg, cfg.t_end)


def integrate_with_transition(
    init: MacroState, params: MacroParams, switch: RegimeSwitch, cfg: IntegratorConfig
) -> Trajectory:
    """Coupled dynamics up to ``switch.t_switch``, then logistic population.

    After the switch population follows ``r_pop*N*(1 - N/K_pop)`` while
    technology keeps growing as ``c*N*T``. The switch time is hit exactly, so
    the trajectory is continuous there.
    """
    cfg.validate(init)
    if not init.t < switch.t_switch:
        raise ConfigInvalid(f"init.t={init.t} must precede t_switch={switch.t_switch}")

    first = _run(_coupled_rhs(params), init, cfg, min(switch.t_switch, cfg.t_end))
    if first.termination.kind != "ReachedEnd" or switch.t_switch >= cfg.t_end:
        return first

    at_switch = first.final
    if switch.K_pop < at_switch.N:
        raise ConfigInvalid(
            f"K_pop={switch.K_pop} is below N={at_switch.N} at the switch"
        )
    second = _run(_transition_rhs(params, switch), at_switch, cfg, cfg.t_end)
    return Trajectory(first.samples + second.samples[1:], second.termination)


def blowup_time(T0: float, params: MacroParams) -> float:
    """Pole of the fast-relaxation limit ``dT/dt = c*b*T**2``."""
    rate = params.c * params.b * T0
    return math.inf if rate == 0 else 1.0 / rate


def quasi_equilibrium(T0: float, params: MacroParams, t: float) -> float:
    """Technology level ``T0 / (1 - c*b*T0*t)`` when population sits at ``b*T``.

    ``t`` is measured from the moment ``T == T0``.
    """
    t_star = blowup_time(T0, params)
    if t >= t_star:
        raise BeyondSingularity(f"t={t} is at or past the pole t*={t_star}")
    return T0 / (1.0 - params.c * params.b * T0 * t)


def solve_at(
    init: MacroState, params: MacroParams, times: Sequence[float], max_step: float
) -> np.ndarray:
    """Fixed-step RK4 solution sampled exactly at ``times`` (all >= init.t).

    Returns an ``(len(times), 2)`` array of ``(N, T)``; rows after a blow-up
    or positivity failure are ``nan``. Used as the model evaluator when the
    coupled system is fitted to data.
    """
    rhs = _coupled_rhs(params)
    out = np.full((len(times), 2), np.nan)
    t, N, T = init.t, init.N, init.T
    for i, target in enumerate(times):
        gap = target - t
        if gap < 0:
            raise ValueError("times must be non-decreasing and start at or after init.t")
        n_sub = max(1, math.ceil(gap / max_step)) if gap > 0 else 0
        h = gap / n_sub if n_sub else 0.0
        for _ in range(n_sub):
            N, T = _rk4_step(rhs, t, N, T, h)
            t += h
            if not _ok(N, T):
                return out
        t = target
        out[i] = N, T
    return out
