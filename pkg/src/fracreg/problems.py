"""Test problems: the Green's-function integral operator on ``[0, 1]``.

The operator

    (A x)(s) = int_0^1 K(s, t) x(t) dt,   K(s, t) = s (1 - t) for s <= t, t (1 - s) otherwise

inverts ``-d^2/ds^2`` with Dirichlet conditions, so its eigenpairs are
``((j pi)**-2, sqrt(2) sin(j pi s))``.  It is discretized with piecewise-linear
hat functions ``phi_0 .. phi_{n-1}`` on a uniform grid (boundary hats included)::

    [A_n]_ij = int int K(s, t) phi_i(s) phi_j(t) ds dt,    [y_n]_j = int y(t) phi_j(t) dt

Solvers work in L2-orthonormal coordinates: with the mass matrix ``M``, a
function with nodal vector ``x`` has coordinates ``M**(1/2) x``, the operator
becomes ``M**(-1/2) A_n M**(-1/2)`` and the data ``M**(-1/2) y_n``.  Euclidean
norms of coordinate vectors are L2 norms of the represented functions, so the
discrete spectrum approximates ``(j pi)**-2`` directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import linalg

__all__ = [
    "EXAMPLES",
    "EigenOperator",
    "ProblemInstance",
    "add_noise",
    "assemble_operator",
    "calibrate_noise_magnitude",
    "l2_relative_error",
    "make_example",
    "operator_from_matrix",
]


def _gauss01(m: int):
    """``m``-point Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True, eq=False)
class EigenOperator:
    """Discretized self-adjoint positive operator with its eigendecomposition.

    Attributes
    ----------
    matrix : ndarray
        Galerkin matrix ``A_n`` (nodal basis).
    mass_matrix : ndarray
        ``M_ij = int phi_i phi_j``.
    coords_matrix : ndarray
        ``M**(-1/2) A_n M**(-1/2)``, the operator in orthonormal coordinates.
    sqrt_mass, inv_sqrt_mass : ndarray
        Symmetric square roots of ``M`` and ``M**-1``.
    eigenvalues : ndarray
        Eigenvalues of ``coords_matrix`` (equivalently of ``A_n v = mu M v``),
        positive and nonincreasing.  Since the operator is positive these are
        also its singular values.
    eigenvectors : ndarray
        Orthonormal eigenvectors of ``coords_matrix`` as columns.
    """

    matrix: np.ndarray
    mass_matrix: np.ndarray
    coords_matrix: np.ndarray
    sqrt_mass: np.ndarray
    inv_sqrt_mass: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def operator_norm(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)

    def to_coords(self, x: np.ndarray) -> np.ndarray:
        """Nodal values to orthonormal coordinates."""
        return self.sqrt_mass @ x

    def from_coords(self, xc: np.ndarray) -> np.ndarray:
        """Orthonormal coordinates to nodal values."""
        return self.inv_sqrt_mass @ xc

    def apply(self, xc: np.ndarray) -> np.ndarray:
        return self.coords_matrix @ xc

    def reconstruct(self) -> np.ndarray:
        """``V diag(mu) V^T``; equals :attr:`coords_matrix` up to rounding."""
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def _sym_sqrt(m: np.ndarray):
    w, q = linalg.eigh(m)
    if w[0] <= 0:
        raise linalg.LinAlgError("mass matrix is not positive definite")
    root = np.sqrt(w)
    return (q * root) @ q.T, (q / root) @ q.T


def operator_from_matrix(a: np.ndarray, mass: np.ndarray | None = None) -> EigenOperator:
    """Wrap a symmetric positive definite matrix as an :class:`EigenOperator`.

    With ``mass=None`` the coordinates are the plain Euclidean ones, which is
    convenient for small synthetic problems.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"operator matrix must be square, got shape {a.shape}")
    if mass is None:
        mass = np.eye(a.shape[0])
        root = inv_root = np.eye(a.shape[0])
    else:
        root, inv_root = _sym_sqrt(mass)
    coords = inv_root @ a @ inv_root
    coords = 0.5 * (coords + coords.T)
    mu, vectors = linalg.eigh(coords)
    order = np.argsort(mu)[::-1]
    mu, vectors = mu[order], vectors[:, order]
    if mu[-1] <= 0:
        raise linalg.LinAlgError(f"operator is not positive definite (smallest eigenvalue {mu[-1]:.3e})")
    return EigenOperator(
        matrix=a,
        mass_matrix=np.asarray(mass, dtype=float),
        coords_matrix=coords,
        sqrt_mass=root,
        inv_sqrt_mass=inv_root,
        eigenvalues=mu,
        eigenvectors=vectors,
    )


def _mass_matrix(n: int) -> np.ndarray:
    h = 1.0 / (n - 1)
    main = np.full(n, 2.0 * h / 3.0)
    main[[0, -1]] = h / 3.0
    off = np.full(n - 1, h / 6.0)
    return np.diag(main) + np.diag(off, 1) + np.diag(off, -1)


def _galerkin_matrix(n: int) -> np.ndarray:
    """Exact Galerkin matrix of the Green's kernel in the hat basis.

    ``w_j(s) = int K(s, t) phi_j(t) dt`` is a cubic on each element, so 3-point
    Gauss integrates ``phi_i w_j`` exactly.  The partial moments
    ``int_0^s t phi_j`` and ``int_0^s (1-t) phi_j`` are quadratic integrands and
    2-point Gauss on ``[x_e, s]`` is exact for them.
    """
    h = 1.0 / (n - 1)
    x = np.linspace(0.0, 1.0, n)
    ne = n - 1
    left = x[:-1]
    q2, w2 = _gauss01(2)
    q3, w3 = _gauss01(3)

    def local_moments(e0, s):
        # int_{e0}^{s} t * phi and (1-t) * phi for the two hats of the element
        length = s - e0
        tq = e0[..., None] + length[..., None] * q2
        wq = length[..., None] * w2
        up = (tq - e0[..., None]) / h  # rising hat phi_{e+1}
        down = 1.0 - up  # falling hat phi_e
        out = np.empty(s.shape + (2, 2))
        for k, weight in enumerate((tq, 1.0 - tq)):
            out[..., k, 0] = np.sum(wq * weight * down, axis=-1)
            out[..., k, 1] = np.sum(wq * weight * up, axis=-1)
        return out

    # full-element moments, shape (ne, 2 kinds, 2 local hats)
    full = local_moments(left, left + h)
    # cumulative moments at element starts: prefix[e, kind, j] = int_0^{x_e}
    per_elem = np.zeros((ne, 2, n))
    idx = np.arange(ne)
    per_elem[idx, :, idx] = full[:, :, 0]
    per_elem[idx, :, idx + 1] = full[:, :, 1]
    prefix = np.concatenate([np.zeros((1, 2, n)), np.cumsum(per_elem, axis=0)[:-1]])
    total = per_elem.sum(axis=0)  # int_0^1, shape (2, n)

    a = np.zeros((n, n))
    for q, wq in zip(q3, w3):
        s = left + q * h
        partial = local_moments(left, s)
        mom = prefix.copy()
        mom[idx, :, idx] += partial[:, :, 0]
        mom[idx, :, idx + 1] += partial[:, :, 1]
        # w_j(s) = (1-s) int_0^s t phi_j + s int_s^1 (1-t) phi_j
        w = (1.0 - s)[:, None] * mom[:, 0, :] + s[:, None] * (total[1][None, :] - mom[:, 1, :])
        wq_h = wq * h
        a[idx] += wq_h * (1.0 - q) * w
        a[idx + 1] += wq_h * q * w
    return 0.5 * (a + a.T)


def assemble_operator(n: int = 100) -> EigenOperator:
    """Linear finite-element discretization of the Green's-function operator.

    Parameters
    ----------
    n : int
        Number of grid nodes (step ``1/(n-1)``), at least 3.
    """
    if int(n) != n or n < 3:
        raise ValueError(f"need an integer n >= 3, got {n!r}")
    n = int(n)
    return operator_from_matrix(_galerkin_matrix(n), _mass_matrix(n))


def _load_vector(func: Callable[[np.ndarray], np.ndarray], n: int) -> np.ndarray:
    """``int f phi_j`` by 5-point Gauss per element (exact for polynomials of degree <= 8)."""
    h = 1.0 / (n - 1)
    left = np.linspace(0.0, 1.0, n)[:-1]
    q, w = _gauss01(5)
    t = left[:, None] + h * q[None, :]
    fw = func(t) * w[None, :] * h
    out = np.zeros(n)
    out[:-1] += np.sum(fw * (1.0 - q), axis=1)
    out[1:] += np.sum(fw * q, axis=1)
    return out


def _ex2_solution(t):
    return -6.0 * t**2 * (1.0 - t) * (2.0 - 8.0 * t + 7.0 * t**2)


# (data y(s), exact solution x(t)) with x = -y''
EXAMPLES: dict[str, tuple[Callable, Callable]] = {
    "ex1": (lambda s: s * (1.0 - s), lambda t: np.full_like(np.asarray(t, dtype=float), 2.0)),
    "ex2": (lambda s: s**4 * (1.0 - s) ** 3, _ex2_solution),
}


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Discrete problem ``A x = y`` in orthonormal coordinates, possibly with noisy data.

    ``x_dagger`` holds nodal values of the exact solution; ``x_dagger_coords``,
    ``y_exact`` and ``y_noisy`` are coordinate vectors.  ``delta`` is the
    realized noise level ``||y_noisy - y_exact||_2`` (an L2 norm) and
    ``noise_magnitude`` the multiplicative amplitude that produced it.
    """

    op: EigenOperator
    x_dagger: np.ndarray
    y_exact: np.ndarray
    y_noisy: np.ndarray
    delta: float = 0.0
    noise_magnitude: float = 0.0
    seed: int | None = None
    example: str = "custom"

    def __post_init__(self):
        realized = float(np.linalg.norm(self.y_noisy - self.y_exact))
        if not math.isclose(realized, self.delta, rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError(f"delta={self.delta} does not match realized noise {realized}")

    @property
    def x_dagger_coords(self) -> np.ndarray:
        return self.op.to_coords(self.x_dagger)

    @property
    def n(self) -> int:
        return self.op.n

    @classmethod
    def from_matrix(cls, a, y, x_dagger=None, y_noisy=None) -> "ProblemInstance":
        """Instance on a plain Euclidean space (identity mass matrix)."""
        op = operator_from_matrix(a)
        y = np.atleast_1d(np.asarray(y, dtype=float))
        y_noisy = y.copy() if y_noisy is None else np.atleast_1d(np.asarray(y_noisy, dtype=float))
        if x_dagger is None:
            x_dagger = np.linalg.solve(op.coords_matrix, y)
        delta = float(np.linalg.norm(y_noisy - y))
        return cls(op, np.atleast_1d(np.asarray(x_dagger, dtype=float)), y, y_noisy, delta=delta, example="custom")


def make_example(example: str, n: int = 100, op: EigenOperator | None = None) -> ProblemInstance:
    """Noise-free instance of ``ex1`` (``x = 2``) or ``ex2`` on ``n`` nodes.

    The load vector is integrated with Gauss quadrature that is exact for the
    polynomial data; ``x_dagger`` is the nodal interpolant of the exact solution.
    """
    if example not in EXAMPLES:
        raise ValueError(f"unknown example {example!r}; choose from {sorted(EXAMPLES)}")
    op = assemble_operator(n) if op is None else op
    data, solution = EXAMPLES[example]
    y = op.inv_sqrt_mass @ _load_vector(data, op.n)
    x = np.asarray(solution(op.nodes), dtype=float)
    return ProblemInstance(op, x, y, y.copy(), example=example)


def add_noise(instance: ProblemInstance, noise_magnitude: float, seed: int = 0) -> ProblemInstance:
    """Multiplicative uniform noise ``y_j (1 + d' (2 U_j - 1))`` on the coordinate data.

    ``U_j`` comes from numpy's PCG64 generator seeded with ``seed``, so results
    are reproducible across platforms.
    """
    if not noise_magnitude >= 0:
        raise ValueError(f"noise magnitude must be nonnegative, got {noise_magnitude}")
    y = instance.y_exact
    if noise_magnitude == 0:
        noisy = y.copy()
    else:
        u = np.random.default_rng(seed).random(y.shape)
        noisy = y * (1.0 + noise_magnitude * (2.0 * u - 1.0))
    return replace(
        instance,
        y_noisy=noisy,
        delta=float(np.linalg.norm(noisy - y)),
        noise_magnitude=float(noise_magnitude),
        seed=int(seed),
    )


def calibrate_noise_magnitude(instance: ProblemInstance, target_delta: float) -> float:
    """Magnitude whose expected realized noise level is ``target_delta``.

    Uniform noise on ``[-1, 1]`` has variance 1/3, so ``E||noise||^2 = d'^2 ||y||^2 / 3``.
    """
    return float(target_delta) * math.sqrt(3.0) / float(np.linalg.norm(instance.y_exact))


def l2_relative_error(x: np.ndarray, instance: ProblemInstance, coords: bool = True) -> float:
    """``||x - x_dagger||_{L2} / ||x_dagger||_{L2}``.

    ``x`` is a coordinate vector by default (what the solvers return); pass
    ``coords=False`` for nodal values, which are then measured in the mass norm.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != instance.x_dagger.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {instance.x_dagger.shape}")
    ref = instance.x_dagger_coords
    denom = float(np.linalg.norm(ref))
    if denom == 0.0:
        raise ValueError("relative error undefined for a zero exact solution")
    xc = x if coords else instance.op.to_coords(x)
    return float(np.linalg.norm(xc - ref)) / denom
