"""Stopping rules for continuous and iterated fractional asymptotical regularization.

A-priori rules give a terminating time ``T(delta)``; an iteration with step
``dt`` then runs ``ceil(T / dt)`` steps.  The a-posteriori rule is the
discrepancy principle: stop at the first iterate whose residual satisfies
``||y_delta - A x_k|| <= tau * delta``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

from .spectral import FractionalOrder

__all__ = [
    "DEFAULT_TAU",
    "StoppingRule",
    "apriori_time_holder",
    "apriori_time_log",
    "discrepancy_check",
    "predicted_kstar",
    "w_solve",
]

log = logging.getLogger(__name__)

DEFAULT_TAU = 3.1


def discrepancy_check(residual_norm: float, tau: float, delta: float) -> bool:
    """``True`` iff the discrepancy principle says stop: ``residual_norm <= tau * delta``.

    With ``delta = 0`` this only fires at an exactly vanishing residual.
    """
    if delta < 0:
        raise ValueError(f"noise level must be nonnegative, got {delta}")
    return residual_norm <= tau * delta


def apriori_time_holder(theta, p: float, delta: float, c: float = 1.0) -> float:
    """``T = c * delta**(-2 / (theta (2p + 1)))``, the order-optimal time under a Hölder source condition.

    For ``theta != 1`` the rate only holds for ``p <= 1`` (saturation); larger ``p``
    triggers a warning but the time is still returned.
    """
    th = FractionalOrder.coerce(theta).theta
    if not p > 0:
        raise ValueError(f"smoothness index must be positive, got {p}")
    if not (delta > 0 and c > 0):
        raise ValueError(f"need delta > 0 and c > 0, got delta={delta}, c={c}")
    if th != 1.0 and p > 1.0:
        warnings.warn(f"p={p} exceeds the qualification 1 for theta={th}; rate not guaranteed", stacklevel=2)
    return c * delta ** (-2.0 / (th * (2.0 * p + 1.0)))


def apriori_time_log(theta, kappa: float, delta: float, c: float = 1.0) -> float:
    """``T = c * delta**(-kappa / theta)`` for logarithmic source conditions, ``0 < kappa < 2``."""
    th = FractionalOrder.coerce(theta).theta
    if not 0.0 < kappa < 2.0:
        raise ValueError(f"kappa must lie in (0, 2), got {kappa}")
    if not (delta > 0 and c > 0):
        raise ValueError(f"need delta > 0 and c > 0, got delta={delta}, c={c}")
    return c * delta ** (-kappa / th)


def _steps_for(time: float, dt: float) -> int:
    # ceil with a relative guard so T/dt = 100.00000000000001 still gives 100
    ratio = time / dt
    nearest = round(ratio)
    if abs(ratio - nearest) <= 1e-12 * max(1.0, abs(ratio)):
        return int(nearest)
    return int(math.ceil(ratio))


def predicted_kstar(theta, p: float, delta: float, dt: float, c: float = 1.0) -> int:
    """Number of steps ``ceil(T / dt)`` for the Hölder a-priori time."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return _steps_for(apriori_time_holder(theta, p, delta, c), dt)


def w_solve(a: float, z: float) -> float:
    """Solve ``zeta * log(zeta)**a = z`` on the branch ``zeta >= e``.

    Works with ``u = log(zeta)``: ``F(u) = u + a log(u) - log(z)`` is increasing
    and concave for ``u >= 1``, so Newton's method is safeguarded by the bracket
    ``[1, max(1, log z)]`` and falls back to bisection when a step leaves it.
    """
    if not a >= 0:
        raise ValueError(f"exponent must be nonnegative, got {a}")
    if not (math.isfinite(z) and z >= math.e * (1.0 - 1e-15)):
        raise ValueError(f"no root with zeta >= e: need z >= e, got {z}")
    if a == 0:
        return float(z)
    target = math.log(z)
    lo, hi = 1.0, max(1.0, target)

    def f(u):
        return u + a * math.log(u) - target

    if f(lo) >= 0:
        return math.e
    u = 0.5 * (lo + hi)
    for _ in range(200):
        fu = f(u)
        if fu == 0.0:
            break
        if fu > 0:
            hi = u
        else:
            lo = u
        step = fu / (1.0 + a / u)
        nxt = u - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - u) <= 4e-16 * u:
            u = nxt
            break
        u = nxt
    return math.exp(u)


@dataclass(frozen=True)
class StoppingRule:
    """Stopping rule shared by every iterative solver.

    Build one with :meth:`discrepancy`, :meth:`apriori_holder`,
    :meth:`apriori_log` or :meth:`fixed_time`.
    """

    kind: str
    tau: float | None = None
    p: float | None = None
    kappa: float | None = None
    c: float = 1.0
    time: float | None = None

    @classmethod
    def discrepancy(cls, tau: float = DEFAULT_TAU) -> "StoppingRule":
        if not tau > 1.0:
            raise ValueError(f"tau must exceed 1, got {tau}")
        if tau <= 3.0:
            warnings.warn(f"tau={tau} <= 3: convergence theory assumes tau > 3", stacklevel=2)
        return cls("discrepancy", tau=float(tau))

    @classmethod
    def apriori_holder(cls, p: float, c: float = 1.0) -> "StoppingRule":
        if not (p > 0 and c > 0):
            raise ValueError(f"need p > 0 and c > 0, got p={p}, c={c}")
        return cls("apriori_holder", p=float(p), c=float(c))

    @classmethod
    def apriori_log(cls, kappa: float, c: float = 1.0) -> "StoppingRule":
        if not (0.0 < kappa < 2.0 and c > 0):
            raise ValueError(f"need 0 < kappa < 2 and c > 0, got kappa={kappa}, c={c}")
        return cls("apriori_log", kappa=float(kappa), c=float(c))

    @classmethod
    def fixed_time(cls, time: float) -> "StoppingRule":
        if not time > 0:
            raise ValueError(f"time must be positive, got {time}")
        return cls("fixed_time", time=float(time))

    @property
    def is_discrepancy(self) -> bool:
        return self.kind == "discrepancy"

    def stopping_time(self, theta, delta: float) -> float | None:
        """Terminating time of an a-priori rule (``None`` for the discrepancy principle)."""
        if self.kind == "discrepancy":
            return None
        if self.kind == "fixed_time":
            return self.time
        if self.kind == "apriori_holder":
            return apriori_time_holder(theta, self.p, delta, self.c)
        if self.kind == "apriori_log":
            return apriori_time_log(theta, self.kappa, delta, self.c)
        raise ValueError(f"unknown stopping rule {self.kind!r}")

    def step_budget(self, theta, delta: float, dt: float) -> int | None:
        """Number of steps prescribed by an a-priori rule, ``None`` for discrepancy."""
        time = self.stopping_time(theta, delta)
        return None if time is None else _steps_for(time, dt)

    def should_stop(self, residual_norm: float, delta: float) -> bool:
        return self.kind == "discrepancy" and discrepancy_check(residual_norm, self.tau, delta)

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}
