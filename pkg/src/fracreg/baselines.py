"""Classical iterative regularization methods used as comparison baselines.

All methods start from ``x_0 = 0``, work in the orthonormal coordinates of a
:class:`~fracreg.problems.ProblemInstance` and share the stopping interface of
:func:`~fracreg.far_iter.far_run`.

Recursions (``A`` symmetric, so ``A* = A``):

* Landweber: ``x_{k+1} = x_k + dt A*(y - A x_k)``.
* Nesterov: ``z_k = x_k + (k-1)/(k+2) (x_k - x_{k-1})``, ``x_{k+1} = z_k + dt A*(y - A z_k)``.
* nu-method (Brakhage), for ``||A|| = 1``; in general ``omega_k`` is multiplied by
  a step ``dt <= 1/||A||**2``::

      mu_1 = 0,  omega_1 = (4 nu + 2) / (4 nu + 1)
      mu_k = (k-1)(2k-3)(2k+2nu-1) / ((k+2nu-1)(2k+4nu-1)(2k+2nu-3))
      omega_k = 4 (2k+2nu-1)(k+nu-1) / ((k+2nu-1)(2k+4nu-1))
      x_k = x_{k-1} + mu_k (x_{k-1} - x_{k-2}) + omega_k A*(y - A x_{k-1})

* CGNE: conjugate gradients on ``A*A x = A*y`` (the CGLS arrangement), without
  re-orthogonalization.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .problems import ProblemInstance
from .runs import RunRecord, _Monitor
from .stopping import StoppingRule

__all__ = [
    "BaselineConfig",
    "cgne_run",
    "chebyshev_run",
    "landweber_run",
    "nesterov_run",
    "nu_method_coefficients",
    "run_baseline",
]

METHODS = ("landweber", "nesterov", "chebyshev", "cgne")


@dataclass(frozen=True)
class BaselineConfig:
    """Settings of a baseline run.

    ``dt=None`` selects ``0.9 * 2 / ||A||**2`` for Landweber and
    ``1 / ||A||**2`` for Nesterov and the nu-method.  Nesterov accepts the
    Landweber range but warns above ``1 / ||A||**2``, where the momentum
    iteration is no longer guaranteed to stay bounded.  The nu-method
    coefficients assume a normalized operator; any ``dt <= 1 / ||A||**2`` is a
    valid normalization there.  CGNE ignores ``dt``.
    """

    method: str = "landweber"
    dt: float | None = None
    nu: float = 1.0
    max_iter: int = 200_000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")

    def step_size(self, instance: ProblemInstance) -> float:
        norm2 = instance.op.operator_norm**2
        if self.method == "chebyshev":
            dt = 1.0 / norm2 if self.dt is None else float(self.dt)
            if not 0 < dt <= 1.0 / norm2 * (1 + 1e-12):
                raise ValueError(f"dt={dt} outside the admissible range (0, {1.0 / norm2:.6g}]")
            return dt
        limit = 2.0 / norm2
        if self.dt is not None:
            dt = float(self.dt)
        else:
            dt = 1.0 / norm2 if self.method == "nesterov" else 0.9 * limit
        if not 0 < dt < limit:
            raise ValueError(f"dt={dt} outside the stable range (0, {limit:.6g})")
        if self.method == "nesterov" and dt > 1.0 / norm2 * (1 + 1e-12):
            warnings.warn(f"nesterov with dt={dt:.6g} > 1/||A||^2 may diverge", stacklevel=2)
        return dt


def _setup(instance, stop):
    stop = StoppingRule.discrepancy() if stop is None else stop
    return stop, instance.op.coords_matrix, instance.y_noisy


def landweber_run(instance: ProblemInstance, config: BaselineConfig | None = None, stop: StoppingRule | None = None,
                  keep_iterates: bool = False) -> RunRecord:
    """Landweber iteration ``x_{k+1} = x_k + dt A*(y_delta - A x_k)``."""
    config = BaselineConfig("landweber") if config is None else config
    stop, a, y = _setup(instance, stop)
    dt = config.step_size(instance)
    monitor = _Monitor(instance, stop, "landweber", None, dt, config.max_iter, keep_iterates)
    x = np.zeros(y.size)
    residual = y.copy()
    reason = monitor.start(x, float(np.linalg.norm(residual)))
    while not reason:
        x = x + dt * (a @ residual)
        residual = y - a @ x
        reason = monitor.step(x, float(np.linalg.norm(residual)))
    return monitor.finish(x, reason)


def nesterov_run(instance: ProblemInstance, config: BaselineConfig | None = None, stop: StoppingRule | None = None,
                 keep_iterates: bool = False) -> RunRecord:
    """Landweber with Nesterov momentum ``(k-1)/(k+2)``."""
    config = BaselineConfig("nesterov") if config is None else config
    stop, a, y = _setup(instance, stop)
    dt = config.step_size(instance)
    monitor = _Monitor(instance, stop, "nesterov", None, dt, config.max_iter, keep_iterates)
    x = np.zeros(y.size)
    x_prev = x.copy()
    reason = monitor.start(x, float(np.linalg.norm(y)))
    k = 0
    while not reason:
        z = x + ((k - 1.0) / (k + 2.0)) * (x - x_prev)
        x_prev, x = x, z + dt * (a @ (y - a @ z))
        reason = monitor.step(x, float(np.linalg.norm(y - a @ x)))
        k += 1
    return monitor.finish(x, reason)


def nu_method_coefficients(k: int, nu: float) -> tuple[float, float]:
    """``(mu_k, omega_k)`` of the nu-method for ``k >= 1`` (operator scaled to norm 1)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k == 1:
        return 0.0, (4.0 * nu + 2.0) / (4.0 * nu + 1.0)
    mu = (k - 1) * (2 * k - 3) * (2 * k + 2 * nu - 1) / ((k + 2 * nu - 1) * (2 * k + 4 * nu - 1) * (2 * k + 2 * nu - 3))
    omega = 4 * (2 * k + 2 * nu - 1) * (k + nu - 1) / ((k + 2 * nu - 1) * (2 * k + 4 * nu - 1))
    return float(mu), float(omega)


def chebyshev_run(instance: ProblemInstance, config: BaselineConfig | None = None, stop: StoppingRule | None = None,
                  keep_iterates: bool = False) -> RunRecord:
    """Brakhage's nu-method, a Chebyshev-type semi-iterative acceleration of Landweber."""
    config = BaselineConfig("chebyshev") if config is None else config
    stop, a, y = _setup(instance, stop)
    scale = config.step_size(instance)
    monitor = _Monitor(instance, stop, "chebyshev", None, scale, config.max_iter, keep_iterates)
    x = np.zeros(y.size)
    x_prev = x.copy()
    residual = y.copy()
    reason = monitor.start(x, float(np.linalg.norm(residual)))
    k = 1
    while not reason:
        mu, omega = nu_method_coefficients(k, config.nu)
        x_prev, x = x, x + mu * (x - x_prev) + (omega * scale) * (a @ residual)
        residual = y - a @ x
        reason = monitor.step(x, float(np.linalg.norm(residual)))
        k += 1
    return monitor.finish(x, reason)


def cgne_run(instance: ProblemInstance, stop: StoppingRule | None = None, max_iter: int = 200_000,
             keep_iterates: bool = False) -> RunRecord:
    """Conjugate gradients on the normal equations.

    Stops with reason ``"breakdown"`` when the normal-equation residual
    ``A*(y - A x_k)`` has vanished to rounding level or the search direction
    has zero curvature; the flag ``"breakdown"`` is set as well.
    """
    stop, a, y = _setup(instance, stop)
    monitor = _Monitor(instance, stop, "cgne", None, None, max_iter, keep_iterates)
    x = np.zeros(y.size)
    r = y.copy()
    reason = monitor.start(x, float(np.linalg.norm(r)))
    s = a @ r
    p = s.copy()
    gamma = float(s @ s)
    tiny = (64.0 * np.finfo(float).eps * instance.op.operator_norm * float(np.linalg.norm(y))) ** 2
    while not reason:
        if gamma <= tiny:
            monitor.flags.append("breakdown")
            reason = "breakdown"
            break
        q = a @ p
        curvature = float(q @ q)
        if curvature == 0.0 or not math.isfinite(curvature):
            monitor.flags.append("breakdown")
            reason = "breakdown"
            break
        alpha = gamma / curvature
        x = x + alpha * p
        r = r - alpha * q
        reason = monitor.step(x, float(np.linalg.norm(r)))
        s = a @ r
        gamma_new = float(s @ s)
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    return monitor.finish(x, reason)


def run_baseline(instance: ProblemInstance, config: BaselineConfig, stop: StoppingRule | None = None,
                 keep_iterates: bool = False) -> RunRecord:
    """Dispatch on ``config.method``."""
    if config.method == "cgne":
        return cgne_run(instance, stop, config.max_iter, keep_iterates)
    runner = {"landweber": landweber_run, "nesterov": nesterov_run, "chebyshev": chebyshev_run}[config.method]
    return runner(instance, config, stop, keep_iterates)
