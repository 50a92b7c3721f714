"""Beam states of an n-beam interferometer and their fringe quantities.

The state in front of the recombining beam splitter is an n x n density
matrix: diagonals are the beam populations, off-diagonals feed the
interference pattern

    I(phi) = (1/n) * (1 + sum_{i != j} exp(i(phi_i - phi_j)) rho_ij).

This module computes the output intensity, the traditional max/min fringe
contrast, the rms (generalized) visibility, two predictability measures,
phase-averaged intensity moments, and the effect of entangling the beams
with an environment (Hadamard product with the environment overlap Gram
matrix).
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import (
    DegenerateFringeWarning,
    DimensionMismatch,
    IndexOutOfRange,
    InvalidGram,
    NotPositive,
    OutOfRange,
    SameIndex,
    TraceNotOne,
    UnsupportedMoment,
)

TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-12

# grid resolution per torus axis for the exhaustive fringe scan; the
# intensity is a degree-1 trigonometric polynomial in each phase
# difference, so these coarse grids bracket every extremum
_SCAN_POINTS = {2: 64, 3: 64, 4: 24}
_DEFAULT_SCAN = 16


@dataclass(frozen=True)
class BeamState:
    """Validated beam density matrix.

    ``rho`` is Hermitian, unit-trace and positive semidefinite (eigenvalues
    above -1e-12 are accepted and treated as zero in derived quantities).
    """

    rho: np.ndarray

    def __post_init__(self):
        rho = numerics.as_complex_matrix(self.rho)
        rho = numerics.require_hermitian(rho)
        n = rho.shape[0]
        if n < 2:
            raise DimensionMismatch("a beam state needs at least 2 beams")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise TraceNotOne(f"trace is {tr!r}, must be 1 within {TRACE_TOL:.0e}")
        lowest = float(np.linalg.eigvalsh(rho)[0])
        if lowest < -POSITIVITY_TOL:
            raise NotPositive(f"most negative eigenvalue {lowest:.3e}")
        object.__setattr__(self, "rho", rho)

    @property
    def n(self) -> int:
        return self.rho.shape[0]

    @property
    def zetas(self) -> np.ndarray:
        """Beam populations (real diagonal)."""
        return self.rho.diagonal().real.copy()

    def purity(self) -> float:
        return numerics.trace_power(self.rho, 2)


def new_beam_state(rho) -> BeamState:
    """Validate a matrix as a beam state.

    Raises NonHermitian / TraceNotOne / NotPositive with the offending
    figure in the message.
    """
    return BeamState(np.asarray(rho, dtype=complex))


def intensity(s: BeamState, phi) -> float:
    """Output probability for phase settings ``phi`` (one per beam)."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (s.n,):
        raise DimensionMismatch(f"expected {s.n} phases, got shape {phi.shape}")
    v = np.exp(1j * phi)
    val = complex(v.conj() @ s.rho @ v) / s.n
    if abs(val.imag) > 1e-12:
        raise ValueError(f"intensity has imaginary residue {val.imag:.3e}")
    return val.real


def _intensity_on_grid(s: BeamState, points: int) -> tuple[np.ndarray, np.ndarray]:
    """Intensity on the (n-1)-torus grid, first phase pinned to 0."""
    axis = 2 * np.pi * np.arange(points) / points
    mesh = np.meshgrid(*([axis] * (s.n - 1)), indexing="ij")
    free = np.stack([g.ravel() for g in mesh], axis=-1)
    phases = np.concatenate([np.zeros((free.shape[0], 1)), free], axis=1)
    w = np.exp(1j * phases)
    vals = np.einsum("ki,ij,kj->k", w.conj(), s.rho, w).real / s.n
    return phases, vals


@dataclass(frozen=True)
class FringeContrast:
    """Result of the traditional max/min fringe-contrast search."""

    value: float
    phase_max: np.ndarray
    phase_min: np.ndarray
    i_max: float
    i_min: float
    degenerate: bool = False


def traditional_visibility(s: BeamState, scan_points: int | None = None) -> FringeContrast:
    """(I_max - I_min) / (I_max + I_min) over all phase settings.

    The extrema are located by an exhaustive grid over the (n-1)-torus
    (first phase pinned to 0) followed by derivative-free local
    refinement to phase tolerance ~1e-10.  A pattern with vanishing total
    intensity is flagged degenerate and given contrast 0.
    """
    points = scan_points or _SCAN_POINTS.get(s.n, _DEFAULT_SCAN)
    phases, vals = _intensity_on_grid(s, points)

    def refine(start: np.ndarray, sign: float) -> tuple[np.ndarray, float]:
        def objective(x):
            full = np.concatenate([[0.0], x])
            return sign * intensity(s, full)

        x, fx, _ = numerics.nelder_mead(
            objective, start[1:], step=2 * np.pi / points, xtol=1e-11, maxiter=600
        )
        return np.concatenate([[0.0], x]), sign * fx

    phase_max, i_max = refine(phases[int(np.argmax(vals))], -1.0)
    phase_min, i_min = refine(phases[int(np.argmin(vals))], +1.0)

    total = i_max + i_min
    if total <= 1e-14:
        warnings.warn("fringe pattern has vanishing intensity", DegenerateFringeWarning)
        return FringeContrast(0.0, phase_max, phase_min, i_max, i_min, degenerate=True)
    return FringeContrast((i_max - i_min) / total, phase_max, phase_min, i_max, i_min)


def generalized_visibility(s: BeamState) -> float:
    """rms fringe visibility sqrt(n/(n-1) * sum_{i != j} |rho_ij|^2)."""
    off = s.rho - np.diag(s.rho.diagonal())
    s2 = float(np.sum(np.abs(off) ** 2))
    return float(np.sqrt(s.n / (s.n - 1) * s2))


def generalized_predictability(s: BeamState) -> float:
    """rms path predictability sqrt(n/(n-1) * (sum_i z_i^2 - 1/n))."""
    z = s.zetas
    arg = s.n / (s.n - 1) * (np.sum(z * z) - 1.0 / s.n)
    return float(np.sqrt(max(arg, 0.0)))


def betting_predictability(s: BeamState) -> float:
    """Betting predictability 1 - n/(n-1) * (probability of a wrong guess).

    One always bets on the most populated beam (lowest index on ties).
    """
    z = s.zetas
    best = int(np.argmax(z))  # argmax returns the first (lowest) index on ties
    lose = float(np.sum(z) - z[best])
    return max(1.0 - s.n / (s.n - 1) * lose, 0.0)


def pairwise_visibility(s: BeamState, i: int, j: int) -> float:
    """Two-beam fringe contrast 2|rho_ij| of the (i, j) subpattern.

    This is the unnormalized convention: a single surviving coherence
    rho_ij produces the pattern (1/n)(1 + 2|rho_ij| cos(...)), whose
    contrast is 2|rho_ij| for any n.
    """
    for k in (i, j):
        if not 0 <= k < s.n:
            raise IndexOutOfRange(f"index {k} outside 0..{s.n - 1}")
    if i == j:
        raise SameIndex("need two distinct beams")
    return 2.0 * float(np.abs(s.rho[i, j]))


def phase_moment(s: BeamState, m: int, method: str = "analytic", grid: int = 16) -> float:
    """Phase-averaged central moment <(I - 1/n)^m> for m in {2, 3}.

    ``analytic`` sums the index tuples whose phase factors cancel:

        m=2:  (1/n^2) sum_{i != j} |rho_ij|^2
        m=3:  (6/n^3) sum_{a<b<c} 2 Re(rho_ab rho_bc rho_ca)

    (for m=3 the only surviving tuples are directed three-cycles, each
    realized by 3! orderings).  ``quadrature`` averages the integrand on a
    product grid; the two agree to ~1e-12 since the integrand is a low
    degree trigonometric polynomial.
    """
    if m not in (2, 3):
        raise UnsupportedMoment(f"moment order must be 2 or 3, got {m}")
    if method == "quadrature":
        mean = 1.0 / s.n
        return numerics.torus_average(lambda p: (intensity(s, p) - mean) ** m, s.n, grid)
    if method != "analytic":
        raise ValueError(f"unknown method {method!r}")
    rho = s.rho
    n = s.n
    if m == 2:
        off = rho - np.diag(rho.diagonal())
        return float(np.sum(np.abs(off) ** 2)) / n**2
    acc = 0.0
    for a, b, c in itertools.combinations(range(n), 3):
        acc += 2.0 * (rho[a, b] * rho[b, c] * rho[c, a]).real
    return 6.0 * acc / n**3


def validate_gram(g) -> np.ndarray:
    """Check g is a valid Gram matrix of normalized vectors: Hermitian,
    unit diagonal, positive semidefinite."""
    g = numerics.as_complex_matrix(g)
    if numerics.hermiticity_defect(g) > 1e-12:
        raise InvalidGram("overlap matrix is not conjugate-symmetric")
    if np.max(np.abs(g.diagonal() - 1.0)) > 1e-12:
        raise InvalidGram("overlap matrix diagonal must be 1")
    lowest = float(np.linalg.eigvalsh((g + g.conj().T) / 2)[0])
    if lowest < -1e-10:
        raise InvalidGram(f"overlap matrix has negative eigenvalue {lowest:.3e}")
    return g


def environment_decohere(s: BeamState, g) -> BeamState:
    """State after entangling with an environment with overlap matrix g.

    rho'_ij = rho_ij * g_ij (entrywise); populations are untouched.
    """
    g = validate_gram(g)
    if g.shape != s.rho.shape:
        raise DimensionMismatch(f"overlap matrix shape {g.shape} != state shape {s.rho.shape}")
    return BeamState(s.rho * g)


def lambda_example(lam: float) -> BeamState:
    """Three-beam family (1/3) [[1, -l, l], [-l, 1, -l], [l, -l, 1]].

    Valid (positive semidefinite with room to spare) for 0 <= l < 1;
    eigenvalues are (1+2l)/3 and (1-l)/3 twice.
    """
    if not 0.0 <= lam < 1.0:
        raise OutOfRange(f"lambda must be in [0, 1), got {lam}")
    m = np.array(
        [[1.0, -lam, lam], [-lam, 1.0, -lam], [lam, -lam, 1.0]], dtype=complex
    )
    return BeamState(m / 3.0)


def lambda_decohered(lam: float) -> BeamState:
    """The lambda family after an environment marks beam 3.

    Overlaps g12 = 1, g13 = g23 = 0 wipe the coherences to beam 3 and
    keep the (1,2) fringe: (1/3) [[1, -l, 0], [-l, 1, 0], [0, 0, 1]].
    """
    g = np.array([[1, 1, 0], [1, 1, 0], [0, 0, 1]], dtype=complex)
    return environment_decohere(lambda_example(lam), g)
