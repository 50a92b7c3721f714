"""Small dense complex linear algebra, torus quadrature and seeded RNG.

All matrices handled here are tiny (dimension <= ~16), so everything is
dense and clarity wins over speed.  The random-state generator is the
Ginibre construction G G^dag / Tr(G G^dag).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceFailure, NonHermitian, OutOfRange

HERMITICITY_TOL = 1e-12


class Rng:
    """Deterministic random stream (PCG64 under the hood).

    The same seed always reproduces the same stream within this package;
    no cross-version or cross-language reproducibility is promised.  An
    ``Rng`` is advanced in place and must not be shared across concurrent
    tasks; use :meth:`derive` to hand independent child streams to
    parallel work.
    """

    algorithm = "pcg64"

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def derive(self, index: int) -> "Rng":
        """Independent child stream, deterministic in (seed, index)."""
        child = Rng.__new__(Rng)
        child.seed = self.seed
        child._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed, int(index)]))
        )
        return child

    def normal(self, size=None) -> np.ndarray | float:
        return self._gen.normal(size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size=size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def complex_normal(self, shape) -> np.ndarray:
        """Standard complex Gaussian entries (unit-variance real parts)."""
        return self._gen.normal(size=shape) + 1j * self._gen.normal(size=shape)


def as_complex_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def hermiticity_defect(m: np.ndarray) -> float:
    """Largest entry of |m - m^dag|."""
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def require_hermitian(m: np.ndarray, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Return the symmetrized matrix (m + m^dag)/2, or raise NonHermitian.

    Symmetrizing absorbs roundoff without masking real asymmetry, which
    the tolerance check rejects first.
    """
    defect = hermiticity_defect(m)
    if defect > tol:
        raise NonHermitian(f"matrix deviates from Hermitian by {defect:.3e} (tol {tol:.1e})")
    return (m + m.conj().T) / 2


def hermitian_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and
    eigenvectors as orthonormal columns, so that
    ``m = sum_k w[k] * outer(v[:, k], v[:, k].conj())``.
    """
    a = require_hermitian(as_complex_matrix(m))
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigh on tiny dims
        raise ConvergenceFailure(str(exc)) from exc
    return w, v


def trace_power(rho, m: int) -> float:
    """Tr(rho^m) for Hermitian rho, by repeated multiplication.

    Independent of any eigendecomposition on purpose: tests cross-check it
    against the spectral route.
    """
    a = require_hermitian(as_complex_matrix(rho))
    if m < 1:
        raise OutOfRange(f"power must be >= 1, got {m}")
    acc = a
    for _ in range(m - 1):
        acc = acc @ a
    tr = complex(np.trace(acc))
    if abs(tr.imag) > 1e-12:
        raise NonHermitian(f"trace of power has imaginary residue {tr.imag:.3e}")
    return tr.real


def random_density(n: int, rank: int, rng: Rng) -> np.ndarray:
    """Random n x n density matrix of the given rank (Ginibre construction)."""
    if not 1 <= rank <= n:
        raise OutOfRange(f"rank must be in 1..{n}, got {rank}")
    g = rng.complex_normal((n, rank))
    w = g @ g.conj().T
    return w / np.trace(w).real


def random_unit_vector(d: int, rng: Rng) -> np.ndarray:
    v = rng.complex_normal(d)
    return v / np.linalg.norm(v)


def torus_average(f: Callable[[np.ndarray], float], n: int, grid: int) -> float:
    """Average of f over the n-torus of phases, uniform product grid.

    Exact (to roundoff) for trigonometric polynomials of degree < grid.
    Averaging over all n phases rather than the n-1 physical differences
    is equivalent whenever f depends on phase differences only.
    """
    if grid < 8:
        raise OutOfRange(f"grid must be >= 8, got {grid}")
    axis = 2 * np.pi * np.arange(grid) / grid
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    phases = np.stack([g.ravel() for g in mesh], axis=-1)
    total = 0.0
    for p in phases:
        total += f(p)
    return total / phases.shape[0]


def fibonacci_sphere(count: int) -> np.ndarray:
    """`count` roughly uniform unit vectors on S^2 (Fibonacci lattice)."""
    k = np.arange(count)
    z = 1.0 - (2 * k + 1.0) / count
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = k * np.pi * (3.0 - np.sqrt(5.0))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def nelder_mead(
    f: Callable[[np.ndarray], float],
    x0: Sequence[float],
    step: float | Sequence[float] = 0.1,
    xtol: float = 1e-9,
    maxiter: int = 2000,
) -> tuple[np.ndarray, float, bool]:
    """Derivative-free simplex minimization of ``f``.

    Standard Nelder-Mead with reflection/expansion/contraction/shrink
    coefficients (1, 2, 0.5, 0.5).  Terminates when the simplex diameter
    (max coordinate spread) drops below ``xtol`` or after ``maxiter``
    iterations.  Returns ``(x_best, f_best, converged)``.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    steps = np.broadcast_to(np.asarray(step, dtype=float), (dim,))
    simplex = np.tile(x0, (dim + 1, 1))
    for i in range(dim):
        simplex[i + 1, i] += steps[i] if steps[i] != 0 else 0.1
    values = [f(p) for p in simplex]
    order = sorted(range(dim + 1), key=values.__getitem__)
    total = simplex.sum(axis=0)  # running sum, so the centroid is O(1)

    def replace_worst(point, value):
        worst = order[-1]
        total[:] += point - simplex[worst]
        simplex[worst] = point
        values[worst] = value
        # re-insert the changed vertex into the sorted order
        k = len(order) - 1
        while k > 0 and values[order[k - 1]] > value:
            order[k] = order[k - 1]
            k -= 1
        order[k] = worst

    converged = False
    for _ in range(maxiter):
        best, worst = order[0], order[-1]
        if np.max(np.abs(simplex - simplex[best])) <= xtol:
            converged = True
            break
        centroid = (total - simplex[worst]) / dim
        reflected = 2.0 * centroid - simplex[worst]
        fr = f(reflected)
        if fr < values[best]:
            expanded = 3.0 * centroid - 2.0 * simplex[worst]
            fe = f(expanded)
            if fe < fr:
                replace_worst(expanded, fe)
            else:
                replace_worst(reflected, fr)
        elif fr < values[order[-2]]:
            replace_worst(reflected, fr)
        else:
            contracted = 0.5 * (centroid + simplex[worst])
            fc = f(contracted)
            if fc < values[worst]:
                replace_worst(contracted, fc)
            else:
                simplex[:] = simplex[best] + 0.5 * (simplex - simplex[best])
                for k in range(dim + 1):
                    if k != best:
                        values[k] = f(simplex[k])
                order = sorted(range(dim + 1), key=values.__getitem__)
                total = simplex.sum(axis=0)
    best = order[0]
    return simplex[best].copy(), float(values[best]), converged


def compass_search(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    f0: float | None = None,
    step: float = 0.03,
    step_min: float = 1e-6,
    shrink: float = 0.4,
    max_evals: int = 4000,
) -> tuple[np.ndarray, float]:
    """Coordinate-descent polish: sweep +-step moves, shrink on failure.

    Used after :func:`nelder_mead` because a simplex can stall on
    landscapes whose optimum sits on a constraint manifold; single
    coordinate moves with a shrinking step drain the remaining error.
    """
    x = np.asarray(x0, dtype=float).copy()
    fx = f(x) if f0 is None else f0
    evals = 0
    while step > step_min and evals < max_evals:
        improved = False
        for i in range(x.size):
            for sign in (1.0, -1.0):
                y = x.copy()
                y[i] += sign * step
                fy = f(y)
                evals += 1
                if fy < fx - 1e-14:
                    x, fx = y, fy
                    improved = True
        if not improved:
            step *= shrink
    return x, fx
