"""Box-constrained limited-memory BFGS with finite-difference gradients.

Search directions come from the two-loop recursion restricted to the free
variables (those not pinned at a bound by the gradient); steps are projected
onto the box and accepted by Armijo backtracking.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

COST_TOLERANCE = "CostTolerance"
MAX_EVALS = "MaxEvals"
GRADIENT_STALL = "GradientStall"

BOUND_SLACK = 1e-12
# relative step per scheme: ~sqrt(machine eps) one-sided, ~cbrt(machine eps) central
STEP_DEFAULTS = {"forward": 1e-8, "central": 1e-6}


class NonFiniteCost(FloatingPointError):
    pass


@dataclass
class OptimizerConfig:
    max_evals: int = 5000
    cost_tolerance: float = 1e-10
    gradient_step: float | None = None
    gradient_scheme: str = "forward"
    history_size: int = 30
    bounds: tuple[float, float] | Sequence[tuple[float, float]] = (-2 * math.pi, 2 * math.pi)
    seed: int = 0
    gradient_tolerance: float = 1e-9
    armijo: float = 1e-4
    max_backtracks: int = 40

    def __post_init__(self):
        if self.cost_tolerance <= 0:
            raise ValueError("cost_tolerance must be positive")
        if self.gradient_scheme not in STEP_DEFAULTS:
            raise ValueError(f"gradient_scheme must be one of {sorted(STEP_DEFAULTS)}")
        if self.gradient_step is None:
            self.gradient_step = STEP_DEFAULTS[self.gradient_scheme]
        if self.gradient_step <= 0:
            raise ValueError("gradient_step must be positive")
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")
        if self.history_size < 1:
            raise ValueError("history_size must be >= 1")

    def box(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        b = np.asarray(self.bounds, dtype=float)
        if b.shape == (2,):
            lo, hi = np.full(dim, b[0]), np.full(dim, b[1])
        elif b.shape == (dim, 2):
            lo, hi = b[:, 0].copy(), b[:, 1].copy()
        else:
            raise ValueError(f"bounds of shape {b.shape} do not fit {dim} parameters")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        return lo, hi


@dataclass
class Evaluation:
    eval_index: int
    cost: float
    theta: np.ndarray | None = None


@dataclass
class OptimizerTrace:
    evaluations: list[Evaluation] = field(default_factory=list)
    best_theta: np.ndarray | None = None
    best_cost: float = math.inf
    termination_reason: str | None = None
    iterations: int = 0
    # cost at the start point and at every accepted line-search step
    iterates: list[float] = field(default_factory=list)

    @property
    def costs(self) -> np.ndarray:
        return np.array([e.cost for e in self.evaluations])

    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate(self.costs)

    def to_csv(self, fh):
        fh.write("eval_index,cost\n")
        for e in self.evaluations:
            fh.write(f"{e.eval_index},{e.cost!r}\n")

    def to_jsonl(self, fh):
        import json
        for e in self.evaluations:
            fh.write(json.dumps({"eval_index": e.eval_index, "cost": e.cost}) + "\n")

    def summary(self) -> dict:
        return {
            "evaluations": len(self.evaluations),
            "iterations": self.iterations,
            "best_cost": self.best_cost,
            "termination_reason": self.termination_reason,
        }


class _Stop(Exception):
    def __init__(self, reason: str):
        self.reason = reason


class _Objective:
    """Budgeted, bound-checked, recording wrapper around the user cost."""

    def __init__(self, fn, trace: OptimizerTrace, config: OptimizerConfig, lo, hi, record_theta: bool):
        self.fn, self.trace, self.config = fn, trace, config
        self.lo, self.hi = lo, hi
        self.record_theta = record_theta

    def __call__(self, theta: np.ndarray) -> float:
        if len(self.trace.evaluations) >= self.config.max_evals:
            raise _Stop(MAX_EVALS)
        if np.any(theta < self.lo - BOUND_SLACK) or np.any(theta > self.hi + BOUND_SLACK):
            raise AssertionError("evaluation outside the box")
        value = float(self.fn(theta.copy()))
        if not math.isfinite(value):
            raise NonFiniteCost(f"cost function returned {value} at evaluation "
                                f"{len(self.trace.evaluations)}; theta={theta.tolist()}")
        idx = len(self.trace.evaluations)
        self.trace.evaluations.append(Evaluation(idx, value, theta.copy() if self.record_theta else None))
        if value < self.trace.best_cost:
            self.trace.best_cost = value
            self.trace.best_theta = theta.copy()
        if value <= self.config.cost_tolerance:
            raise _Stop(COST_TOLERANCE)
        return value


def fd_gradient(cost_fn: Callable[[np.ndarray], float], theta, h, f0: float | None = None,
                bounds: tuple[np.ndarray, np.ndarray] | None = None, scheme: str = "central") -> np.ndarray:
    """Finite-difference gradient.

    ``central`` costs two evaluations per coordinate, ``forward`` one (plus
    ``f0`` if not supplied).  Steps that would leave the box fall back to the
    one-sided difference pointing inwards.
    """
    if scheme not in STEP_DEFAULTS:
        raise ValueError(f"unknown scheme {scheme!r}")
    theta = np.asarray(theta, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), theta.shape)
    if np.any(h <= 0):
        raise ValueError("finite-difference step must be positive")
    lo, hi = bounds if bounds is not None else (np.full_like(theta, -np.inf), np.full_like(theta, np.inf))
    grad = np.empty_like(theta)
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += h[i]
        down[i] -= h[i]
        can_up, can_down = up[i] <= hi[i], down[i] >= lo[i]
        if scheme == "forward" and can_up:
            if f0 is None:
                f0 = cost_fn(theta)
            grad[i] = (cost_fn(up) - f0) / h[i]
        elif can_up and can_down:
            fu, fd = cost_fn(up), cost_fn(down)
            grad[i] = (fu - fd) / (2 * h[i])
        else:
            if f0 is None:
                f0 = cost_fn(theta)
            base = f0
            if can_up:
                grad[i] = (cost_fn(up) - base) / h[i]
            elif can_down:
                grad[i] = (base - cost_fn(down)) / h[i]
            else:
                grad[i] = 0.0
        if not math.isfinite(grad[i]):
            raise NonFiniteCost(f"non-finite gradient component {i}")
    return grad


def initial_point(dim: int, seed: int = 0, low: float = -math.pi, high: float = math.pi) -> np.ndarray:
    return np.random.default_rng(seed).uniform(low, high, dim)


def _two_loop(g: np.ndarray, S: list[np.ndarray], Y: list[np.ndarray]) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        rho = 1.0 / y.dot(s)
        a = rho * s.dot(q)
        q -= a * y
        alphas.append((rho, a))
    if S:
        q *= S[-1].dot(Y[-1]) / Y[-1].dot(Y[-1])
    for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
        q += s * (a - rho * y.dot(q))
    return q


def minimize(cost_fn: Callable[[np.ndarray], float], theta0, config: OptimizerConfig | None = None,
             record_theta: bool = False) -> tuple[np.ndarray, OptimizerTrace]:
    """Minimise ``cost_fn`` over the box; returns the best point seen and the trace."""
    config = config or OptimizerConfig()
    x = np.array(theta0, dtype=float).reshape(-1)
    lo, hi = config.box(x.size)
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError("theta0 lies outside the bounds")
    trace = OptimizerTrace()
    F = _Objective(cost_fn, trace, config, lo, hi, record_theta)

    def grad(point, fval):
        step = config.gradient_step * (1.0 + np.abs(point))
        return fd_gradient(F, point, step, f0=fval, bounds=(lo, hi), scheme=config.gradient_scheme)

    S: list[np.ndarray] = []
    Yh: list[np.ndarray] = []
    try:
        f = F(x)
        trace.iterates.append(f)
        g = grad(x, f)
        while True:
            pg = x - np.clip(x - g, lo, hi)
            if np.max(np.abs(pg)) < config.gradient_tolerance:
                raise _Stop(GRADIENT_STALL)
            pinned = ((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0))
            gf = np.where(pinned, 0.0, g)
            d = -_two_loop(gf, S, Yh)
            d[pinned] = 0.0
            if gf.dot(d) >= 0:
                S.clear(), Yh.clear()
                d = -gf
            alpha = 1.0 if S else min(1.0, 1.0 / max(np.max(np.abs(d)), 1e-300))
            accepted = None
            for _ in range(config.max_backtracks):
                xn = np.clip(x + alpha * d, lo, hi)
                step = xn - x
                slope = g.dot(step)
                if not np.any(step) or slope >= 0:
                    break
                fn = F(xn)
                if fn <= f + config.armijo * slope:
                    accepted = (xn, fn)
                    break
                # safeguarded quadratic interpolation of the step length
                denom = 2.0 * (fn - f - slope)
                shrink = -slope / denom if denom > 0 else 0.5
                alpha *= min(0.5, max(0.1, shrink))
            if accepted is None:
                if S:
                    S.clear(), Yh.clear()
                    continue
                raise _Stop(GRADIENT_STALL)
            xn, fn = accepted
            gn = grad(xn, fn)
            s, y = xn - x, gn - g
            if s.dot(y) > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
                S.append(s)
                Yh.append(y)
                if len(S) > config.history_size:
                    S.pop(0), Yh.pop(0)
            x, f, g = xn, fn, gn
            trace.iterates.append(f)
            trace.iterations += 1
    except _Stop as stop:
        trace.termination_reason = stop.reason
    log.debug("minimize: %s after %d evaluations, best %.3e", trace.termination_reason,
              len(trace.evaluations), trace.best_cost)
    return trace.best_theta.copy(), trace
