"""Arbitrary-precision reference values for the Mittag-Leffler function.

Independent of ``fracreg.mittag_leffler``: partial sums of the defining series
in mpmath at a working precision chosen from the largest term, stopped with a
rigorous geometric tail bound.  Used offline to freeze test fixtures.
"""

from __future__ import annotations

import math

import mpmath


def reference_ml(a: float, b: float, z: float, tol: float = 1e-20) -> tuple[float, float]:
    """Return ``(E_{a,b}(z), tail_bound)`` using the exact binary values of the inputs."""
    am, bm = mpmath.mpf(a), mpmath.mpf(b)
    x = abs(z)
    if x == 0:
        return float(mpmath.rgamma(bm)), 0.0
    # locate the peak term in double precision (only used to size the precision)
    k, peak = 0, -math.inf
    while True:
        lt = k * math.log(x) - math.lgamma(a * k + b)
        peak = max(peak, lt)
        if k > 2 and lt < peak - 5 and lt < 0:
            break
        k += 1
    dps = int(peak / math.log(10)) + int(-math.log10(tol)) + 15
    with mpmath.workdps(dps):
        zm = mpmath.mpf(z)
        total = mpmath.mpf(0)
        power = mpmath.mpf(1)
        # when a = 1/m exactly, Gamma(a*(k+m) + b) = (a*k + b) * Gamma(a*k + b)
        m = round(1 / a)
        recur = a * m == 1.0 and m <= 8
        rg = [mpmath.rgamma(am * j + bm) for j in range(m + 1)] if recur else None
        k = 0
        while True:
            if recur:
                if k + 1 >= len(rg):
                    rg.append(rg[k + 1 - m] / (am * (k + 1 - m) + bm))
                t = power * rg[k]
            else:
                t = power * mpmath.rgamma(am * k + bm)
            total += t
            nxt = abs(power * zm) * (rg[k + 1] if recur else mpmath.rgamma(am * (k + 1) + bm))
            if abs(t) > 0 and nxt < abs(t):
                q = nxt / abs(t)
                # term ratios decrease monotonically, so the tail is geometric-bounded
                bound = nxt / (1 - q)
                if bound < tol:
                    return float(total), float(bound)
            power *= zm
            k += 1
