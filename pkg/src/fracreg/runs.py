"""Run records and the stopping bookkeeping shared by all iterative solvers."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .problems import ProblemInstance, l2_relative_error
from .stopping import StoppingRule

__all__ = ["DivergenceError", "RunRecord"]

STOP_REASONS = ("discrepancy", "apriori", "max_iter", "breakdown")


class DivergenceError(FloatingPointError):
    """An iterate became non-finite; ``record`` holds the run up to the last finite step."""

    def __init__(self, message: str, record: "RunRecord"):
        super().__init__(message)
        self.record = record


@dataclass
class RunRecord:
    """Outcome of one iterative solver run.

    ``residual_norms[k]`` is ``||y_delta - A x_k||`` for ``k = 0 .. k_star``;
    ``x_final`` is ``x_{k_star}`` in orthonormal coordinates.
    """

    method: str
    theta: float | None
    dt: float | None
    residual_norms: np.ndarray
    k_star: int
    x_final: np.ndarray
    l2err: float
    stop_reason: str
    delta: float
    tau: float | None = None
    iterates_kept: str = "final"
    iterates: np.ndarray | None = None
    flags: tuple[str, ...] = ()
    wall_time: float = 0.0

    def discrepancy_values(self) -> np.ndarray:
        """``chi_k = ||A x_k - y_delta|| - tau * delta`` along the run."""
        if self.tau is None:
            raise ValueError("run was not stopped by the discrepancy principle")
        return self.residual_norms - self.tau * self.delta

    def to_dict(self, include_history: bool = True) -> dict:
        out = {
            "method": self.method,
            "theta": self.theta,
            "dt": self.dt,
            "k_star": self.k_star,
            "l2err": self.l2err,
            "stop_reason": self.stop_reason,
            "delta": self.delta,
            "tau": self.tau,
            "iterates_kept": self.iterates_kept,
            "flags": list(self.flags),
            "wall_time": self.wall_time,
            "x_final": self.x_final.tolist(),
        }
        if include_history:
            out["residual_norms"] = self.residual_norms.tolist()
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass
class _Monitor:
    """Residual history, stopping decisions and record assembly for one run."""

    instance: ProblemInstance
    stop: StoppingRule
    method: str
    theta: float | None
    dt: float | None
    max_iter: int
    keep_iterates: bool = False
    residuals: list = field(default_factory=list)
    history: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    budget: int | None = None
    last: np.ndarray | None = None
    started: float = field(default_factory=time.perf_counter)

    def __post_init__(self):
        if int(self.max_iter) != self.max_iter or self.max_iter < 0:
            raise ValueError(f"max_iter must be a nonnegative integer, got {self.max_iter!r}")
        step = self.dt if self.dt is not None else 1.0
        self.budget = self.stop.step_budget(1.0 if self.theta is None else self.theta, self.instance.delta, step)

    def start(self, x0: np.ndarray, residual_norm: float) -> str | None:
        """Register ``x_0``; returns a stop reason if no iteration is needed."""
        self.residuals.append(residual_norm)
        self.last = x0.copy()
        if self.keep_iterates:
            self.history.append(x0.copy())
        if self.stop.is_discrepancy:
            if self.instance.delta == 0:
                self.flags.append("noise_free")
            if self.stop.should_stop(residual_norm, self.instance.delta):
                self.flags.append("immediate")
                return "discrepancy"
        if self.budget == 0:
            return "apriori"
        if self.max_iter == 0:
            return "max_iter"
        return None

    def step(self, x: np.ndarray, residual_norm: float) -> str | None:
        """Register the next iterate; returns a stop reason or ``None`` to continue."""
        if not (math.isfinite(residual_norm) and np.all(np.isfinite(x))):
            record = self.finish(self.last, "max_iter")
            raise DivergenceError(f"{self.method}: non-finite iterate at step {len(self.residuals)}", record)
        self.residuals.append(residual_norm)
        self.last = x.copy()
        if self.keep_iterates:
            self.history.append(x.copy())
        k = len(self.residuals) - 1
        if self.stop.should_stop(residual_norm, self.instance.delta):
            return "discrepancy"
        if self.budget is not None and k >= self.budget:
            return "apriori"
        if k >= self.max_iter:
            return "max_iter"
        return None

    def finish(self, x: np.ndarray, reason: str) -> RunRecord:
        if reason not in STOP_REASONS:
            raise ValueError(f"unknown stop reason {reason!r}")
        x = np.asarray(x, dtype=float).copy()
        try:
            err = l2_relative_error(x, self.instance)
        except ValueError:
            err = math.nan
        return RunRecord(
            method=self.method,
            theta=self.theta,
            dt=self.dt,
            residual_norms=np.asarray(self.residuals, dtype=float),
            k_star=len(self.residuals) - 1,
            x_final=x,
            l2err=err,
            stop_reason=reason,
            delta=self.instance.delta,
            tau=self.stop.tau,
            iterates_kept="all" if self.keep_iterates else "final",
            iterates=np.array(self.history) if self.keep_iterates else None,
            flags=tuple(self.flags),
            wall_time=time.perf_counter() - self.started,
        )
