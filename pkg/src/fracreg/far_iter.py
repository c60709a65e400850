"""Iterated fractional asymptotical regularization.

Discretizes the Caputo flow ``D^theta x = A*(y_delta - A x)`` with zero initial
data by the fractional one-step Adams-Moulton predictor-corrector (product
trapezoid rule).  With ``r_j = A*(y_delta - A x_j)``::

    x^P_{k+1} = 1/Gamma(theta) * sum_{j=0}^{k} b_{j,k+1} r_j
    x_{k+1}   = 1/Gamma(theta) * (a_{k+1,k+1} A*(y_delta - A x^P_{k+1}) + sum_{j=0}^{k} a_{j,k+1} r_j)

    b_{j,k+1} = dt**theta / theta * ((k-j+1)**theta - (k-j)**theta)
    a_{j,k+1} = dt**theta / (theta (theta+1)) * d_{j,k+1}
    d_{0,k+1}   = k**(theta+1) - (k-theta) (k+1)**theta
    d_{j,k+1}   = (k-j+2)**(theta+1) + (k-j)**(theta+1) - 2 (k-j+1)**(theta+1),  1 <= j <= k
    d_{k+1,k+1} = 1

The scheme has full memory: every cached ``r_j`` enters every later step.  At
``theta = 1`` the weights reduce to the trapezoid rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .problems import ProblemInstance
from .runs import RunRecord, _Monitor
from .spectral import FractionalOrder, spectral_solve
from .stopping import StoppingRule

__all__ = [
    "AMWeights",
    "DEFAULT_DT",
    "DEFAULT_MAX_ITER",
    "am_weights",
    "empirical_order",
    "far_run",
    "far_vs_spectral",
    "trapezoid_reference_run",
]

DEFAULT_DT = 19.4850
DEFAULT_MAX_ITER = 200_000

# below this index the plain power formulas lose at most a couple of digits
_DIRECT_BELOW = 8


def _is_integer(c: float) -> bool:
    return float(c).is_integer()


def _first_diff(c: float, m: np.ndarray) -> np.ndarray:
    """``(m+1)**c - m**c`` for integers ``m >= 0``."""
    m = np.asarray(m, dtype=float)
    if _is_integer(c):
        return (m + 1.0) ** c - m**c
    out = np.ones_like(m)
    pos = m > 0
    mp = m[pos]
    out[pos] = mp**c * np.expm1(c * np.log1p(1.0 / mp))
    return out


def _second_diff(c: float, m: np.ndarray) -> np.ndarray:
    """``(m+2)**c + m**c - 2 (m+1)**c`` for integers ``m >= 0``.

    For large ``m`` uses ``u**c [(1+x)**c + (1-x)**c - 2] = 2 u**c sum_k binom(c, 2k) x**(2k)``
    with ``u = m + 1``, ``x = 1/u``, which avoids cancelling huge powers.
    """
    m = np.asarray(m, dtype=float)
    direct = (m + 2.0) ** c + m**c - 2.0 * (m + 1.0) ** c
    if _is_integer(c):
        return direct
    far = m >= _DIRECT_BELOW
    if np.any(far):
        u = m[far] + 1.0
        x2 = u**-2.0
        total = np.zeros_like(u)
        coef = 1.0
        power = np.ones_like(u)
        for k in range(1, 16):
            coef *= (c - 2 * k + 2) * (c - 2 * k + 1) / ((2 * k - 1) * (2 * k))
            power = power * x2
            total += coef * power
        direct[far] = 2.0 * u**c * total
    return direct


def _initial_d(theta: float, k: np.ndarray) -> np.ndarray:
    """``d_{0,k+1} = k**(theta+1) - (k-theta) (k+1)**theta``.

    For large ``k``: ``-k**(theta+1) expm1(log1p(-theta/k) + theta log1p(1/k))``
    where the logarithm is summed as a series whose first-order terms cancel exactly.
    """
    k = np.asarray(k, dtype=float)
    direct = k ** (theta + 1.0) - (k - theta) * (k + 1.0) ** theta
    if _is_integer(theta):
        return direct
    far = k >= _DIRECT_BELOW
    if np.any(far):
        kf = k[far]
        x = 1.0 / kf
        s = np.zeros_like(kf)
        xi = x.copy()
        for i in range(2, 40):
            xi = xi * x
            s += ((-1) ** (i + 1) / i) * (theta + (-theta) ** i) * xi
        direct[far] = -(kf ** (theta + 1.0)) * np.expm1(s)
    return direct


@dataclass(frozen=True)
class AMWeights:
    """Predictor weights ``b_{j,k+1}`` (``j = 0..k``) and corrector weights ``a_{j,k+1}`` (``j = 0..k+1``)."""

    theta: FractionalOrder
    dt: float
    k: int
    b: np.ndarray
    a: np.ndarray


def am_weights(theta, dt: float, k: int) -> AMWeights:
    """Adams-Moulton weights for the step ``k -> k+1``.

    Examples
    --------
    >>> w = am_weights(1.0, 0.5, 3)
    >>> w.b.tolist(), w.a.tolist()
    ([0.5, 0.5, 0.5, 0.5], [0.25, 0.5, 0.5, 0.5, 0.25])
    """
    order = FractionalOrder.coerce(theta)
    th = order.theta
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    k = int(k)
    scale_b = dt**th / th
    scale_a = dt**th / (th * (th + 1.0))
    m = np.arange(k, -1, -1)  # k - j for j = 0..k
    b = scale_b * _first_diff(th, m)
    d = np.empty(k + 2)
    d[0] = _initial_d(th, np.array([k]))[0]
    d[1 : k + 1] = _second_diff(th + 1.0, np.arange(k - 1, -1, -1))
    d[k + 1] = 1.0
    return AMWeights(order, float(dt), k, b, scale_a * d)


class _WeightTable:
    """Weights indexed by lag ``m = k - j``, grown on demand; shared by all steps of a run."""

    def __init__(self, theta: float, dt: float):
        self.theta = theta
        self.scale_b = dt**theta / theta
        self.scale_a = dt**theta / (theta * (theta + 1.0))
        self.size = 0
        self.b = np.empty(0)
        self.interior = np.empty(0)
        self.initial = np.empty(0)

    def ensure(self, k: int):
        if k < self.size:
            return
        size = max(2 * self.size, k + 1, 64)
        m = np.arange(size)
        self.b = self.scale_b * _first_diff(self.theta, m)
        self.interior = self.scale_a * _second_diff(self.theta + 1.0, m)
        self.initial = self.scale_a * _initial_d(self.theta, m)
        self.size = size


def far_run(
    instance: ProblemInstance,
    theta,
    dt: float = DEFAULT_DT,
    stop: StoppingRule | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    keep_iterates: bool = False,
) -> RunRecord:
    """Run the fractional Adams-Moulton iteration from ``x_0 = 0``.

    Parameters
    ----------
    instance : ProblemInstance
        Problem in orthonormal coordinates; ``instance.y_noisy`` and
        ``instance.delta`` drive the iteration and the discrepancy principle.
    theta : float or FractionalOrder
        Order in ``(0, 2)``.
    dt : float
        Step size.
    stop : StoppingRule, optional
        Defaults to the discrepancy principle with ``tau = 3.1``.
    max_iter : int
        Hard cap on the number of steps.
    keep_iterates : bool
        Store every iterate in the returned record.

    Returns
    -------
    RunRecord
        The residual history covers ``x_0 .. x_{k_star}``; the discrepancy
        principle is evaluated on the corrector iterates.
    """
    th = FractionalOrder.coerce(theta).theta
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    stop = StoppingRule.discrepancy() if stop is None else stop
    a = instance.op.coords_matrix
    y = instance.y_noisy
    n = y.size
    monitor = _Monitor(instance, stop, "far", th, float(dt), max_iter, keep_iterates)

    x = np.zeros(n)
    residual = y.copy()
    reason = monitor.start(x, float(np.linalg.norm(residual)))
    if reason:
        return monitor.finish(x, reason)

    weights = _WeightTable(th, float(dt))
    inv_gamma = 1.0 / special.gamma(th)
    cap = 256
    grads = np.empty((cap, n))  # grads[j] = r_j = A*(y - A x_j)
    grads[0] = a @ residual
    k = 0
    while True:
        weights.ensure(k + 1)
        # predictor and corrector sums in one pass over the history
        coef = np.empty((2, k + 1))
        coef[0] = weights.b[k::-1]
        coef[1, 0] = weights.initial[k]
        coef[1, 1:] = weights.interior[k - 1 :: -1] if k > 0 else ()
        sums = coef @ grads[: k + 1]
        predictor = inv_gamma * sums[0]
        grad_p = a @ (y - a @ predictor)
        x = inv_gamma * (sums[1] + weights.scale_a * grad_p)
        residual = y - a @ x
        reason = monitor.step(x, float(np.linalg.norm(residual)))
        if reason:
            return monitor.finish(x, reason)
        k += 1
        if k == cap:
            cap *= 2
            grown = np.empty((cap, n))
            grown[:k] = grads[:k]
            grads = grown
        grads[k] = a @ residual


def trapezoid_reference_run(
    instance: ProblemInstance,
    dt: float = DEFAULT_DT,
    stop: StoppingRule | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    keep_iterates: bool = False,
) -> RunRecord:
    """Dedicated ``theta = 1`` predictor-corrector with O(1) memory.

    Keeps the running sum ``S_k = r_0 + ... + r_k`` instead of the history::

        x^P_{k+1} = dt S_k
        x_{k+1}   = dt (S_k - r_0 / 2) + dt / 2 * A*(y - A x^P_{k+1})
    """
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    stop = StoppingRule.discrepancy() if stop is None else stop
    a = instance.op.coords_matrix
    y = instance.y_noisy
    monitor = _Monitor(instance, stop, "far_trapezoid", 1.0, float(dt), max_iter, keep_iterates)
    x = np.zeros(y.size)
    residual = y.copy()
    reason = monitor.start(x, float(np.linalg.norm(residual)))
    if reason:
        return monitor.finish(x, reason)
    first = a @ residual
    running = first.copy()
    half = 0.5 * dt
    while True:
        predictor = dt * running
        x = dt * (running - 0.5 * first) + half * (a @ (y - a @ predictor))
        residual = y - a @ x
        reason = monitor.step(x, float(np.linalg.norm(residual)))
        if reason:
            return monitor.finish(x, reason)
        running += a @ residual


def far_vs_spectral(instance: ProblemInstance, theta, dt_list, t_final: float) -> list[dict]:
    """Distance between the iteration at ``t_final`` and the exact continuous trajectory.

    For each ``dt`` runs ``t_final / dt`` steps (which must be an integer) and
    reports ``||x_k - x(t_final)||``.  Rows come back in the order of ``dt_list``.
    """
    th = FractionalOrder.coerce(theta).theta
    exact = spectral_solve(instance.op, instance.y_noisy, th, t_final)
    rows = []
    for dt in dt_list:
        steps = t_final / dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"t_final={t_final} is not a multiple of dt={dt}")
        steps = int(round(steps))
        rule = StoppingRule.fixed_time(steps * dt)
        record = far_run(instance, th, dt, stop=rule, max_iter=steps)
        rows.append({
            "dt": float(dt),
            "steps": steps,
            "error": float(np.linalg.norm(record.x_final - exact)),
            "residual": float(record.residual_norms[-1]),
        })
    return rows


def empirical_order(rows: list[dict]) -> float:
    """Least-squares slope of ``log error`` against ``log dt``."""
    dt = np.array([r["dt"] for r in rows])
    err = np.array([r["error"] for r in rows])
    if dt.size < 2 or np.any(err <= 0):
        raise ValueError("need at least two rows with positive errors")
    return float(np.polyfit(np.log(dt), np.log(err), 1)[0])
