"""Path distinguishability and coherence via constrained POVM optimization.

The search space is the set of rank-one qubit POVMs
{alpha_mu (1 + mhat_mu . sigma)} with sum alpha = 1 and
sum alpha mhat = 0.  Free parameters are the first M-1 weights and
directions; the closing element is solved from the constraints and may be
a general positive operator alpha_M (1 + v . sigma) with |v| <= 1, which
keeps the feasible set closed under the derivative-free simplex search.

The symmetric three-beam example (equal populations, detector states with
coplanar Bloch vectors at angle theta) has closed-form answers used
throughout the test suite:

    V(theta)  = sqrt((1 + cos t + cos^2 t) / 3)
    D(theta)  = sin(t)/sqrt(3)            for t <= 2 pi/3
              = (2/3) sin^2(t/2)          for t >= 2 pi/3
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import beams, detector, numerics
from .beams import BeamState
from .detector import DetectorStates, JointState, Povm
from .errors import (
    DomainError,
    InfeasibleStart,
    NotSymmetric,
    OutOfRange,
    TooFewPairs,
    WrongDimension,
)

_KNOWLEDGE_MEASURES = ("K", "Ktilde")
_VISIBILITY_MEASURES = ("V", "Vtilde")


# ---------------------------------------------------------------------------
# symmetric three-beam example and its closed forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetricConfig:
    """Equal-population three-beam source with coplanar detector states.

    The pure beam state is (1/3) sum_ij |psi_i><psi_j|; the detector Bloch
    vectors lie in the xz plane, n0 = z and n+- = (+-sin t, 0, cos t).
    """

    theta: float

    def __post_init__(self):
        if not -1e-12 <= self.theta <= math.pi + 1e-12:
            raise OutOfRange(f"theta must be in [0, pi], got {self.theta}")

    @property
    def nhats(self) -> np.ndarray:
        t = self.theta
        return np.array(
            [
                [math.sin(t), 0.0, math.cos(t)],
                [-math.sin(t), 0.0, math.cos(t)],
                [0.0, 0.0, 1.0],
            ]
        )

    def beam(self) -> BeamState:
        return BeamState(np.ones((3, 3), dtype=complex) / 3.0)

    def joint(self) -> JointState:
        return JointState(self.beam(), DetectorStates.from_bloch(self.nhats))


def symmetric_example(theta: float) -> JointState:
    """Joint state of the symmetric three-beam configuration at ``theta``."""
    return SymmetricConfig(theta).joint()


def analytic_V(theta: float) -> float:
    """Closed-form reduced-beam visibility of the symmetric example."""
    if not -1e-12 <= theta <= math.pi + 1e-12:
        raise OutOfRange(f"theta must be in [0, pi], got {theta}")
    c = math.cos(theta)
    return math.sqrt((1.0 + c + c * c) / 3.0)


def analytic_D(theta: float) -> float:
    """Closed-form distinguishability of the symmetric example.

    sin(t)/sqrt(3) up to t = 2 pi/3, then (2/3) sin^2(t/2); the branches
    meet at 1/2.
    """
    if not -1e-12 <= theta <= math.pi + 1e-12:
        raise OutOfRange(f"theta must be in [0, pi], got {theta}")
    if theta <= 2.0 * math.pi / 3.0:
        return math.sin(theta) / math.sqrt(3.0)
    return (2.0 / 3.0) * math.sin(theta / 2.0) ** 2


def appendix2_K2(theta: float, beta: float, gamma: float) -> float:
    """Squared which-way knowledge of the two-element PVM along (beta, gamma).

    beta/gamma are the polar/azimuthal angles of the measurement axis
    (beta from +z, gamma from +x in the xz plane).  Maximized over the
    axis this reproduces analytic_D(theta)^2.
    """
    s2 = math.sin(theta / 2.0) ** 2
    c2 = math.cos(theta / 2.0) ** 2
    return (
        (4.0 / 9.0)
        * (math.cos(beta) ** 2 * s2 + 3.0 * math.sin(beta) ** 2 * math.cos(gamma) ** 2 * c2)
        * s2
    )


def g_function(x: float, theta: float) -> float:
    """Merge-gain kernel of the symmetric POVM reduction step.

    Concave on [-1, 1] for 0 <= theta < 2 pi/3, which is what makes the
    pairwise merge in :func:`reduce_symmetric_povm` non-decreasing there.
    """
    if not -1.0 <= x <= 1.0:
        raise DomainError(f"x must be in [-1, 1], got {x}")
    denom = 6.0 + 2.0 * x * (1.0 + 2.0 * math.cos(theta))
    if denom <= 0.0:
        raise DomainError(f"denominator {denom!r} not positive")
    ct = math.cos(theta)
    st2 = math.sin(theta) ** 2
    num = (1.0 + x) ** 2 + 2.0 * (1.0 + x * ct) ** 2 + 2.0 * (1.0 - x * x) * st2
    return -(3.0 + x * (1.0 + 2.0 * ct)) / 6.0 + num / denom


# ---------------------------------------------------------------------------
# fast evaluation of knowledge measures on rank-one POVMs
# ---------------------------------------------------------------------------

def rank_one_knowledge(zetas, nhats, alphas, mhats, quadrature: bool = False):
    """K (or Ktilde) of rank-one POVMs given by Bloch data, vectorized.

    ``alphas``: (..., M) weights, ``mhats``: (..., M, 3) directions with
    norm <= 1 (sub-unit rows are rank-two closing elements).  Leading axes
    broadcast, so whole batches of candidate POVMs evaluate in one call.
    """
    zetas = np.asarray(zetas, dtype=float)
    nhats = np.asarray(nhats, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    mhats = np.asarray(mhats, dtype=float)
    n = zetas.size
    born = alphas[..., None] * (1.0 + mhats @ nhats.T)  # (..., M, n)
    weighted = zetas * born
    p = weighted.sum(axis=-1)
    safe_p = np.where(p > 1e-14, p, 1.0)
    qsq = (weighted**2).sum(axis=-1) / safe_p**2
    arg = np.clip(n / (n - 1) * (qsq - 1.0 / n), 0.0, None)
    k_mu = np.where(p > 1e-14, np.sqrt(arg), 0.0)
    if quadrature:
        return np.sqrt((p * k_mu**2).sum(axis=-1))
    return (p * k_mu).sum(axis=-1)


def _scalar_knowledge(zetas, nhats, quadrature: bool):
    """Plain-python closure evaluating K/Ktilde; the simplex hot path.

    Both measures are weight-linear: each element contributes
    alpha * phi(mhat) with phi depending on the direction only, so the
    per-element kernel is evaluated once per direction.
    """
    zs = [float(z) for z in zetas]
    nh = [tuple(float(c) for c in v) for v in nhats]
    n = len(zs)
    coeff = n / (n - 1)
    invn = 1.0 / n
    sqrt = math.sqrt

    def kernel(m) -> float:
        """phi(m): contribution per unit weight of an element along m."""
        s1 = 0.0
        s2 = 0.0
        for zi, ni in zip(zs, nh):
            pi = 1.0 + m[0] * ni[0] + m[1] * ni[1] + m[2] * ni[2]
            if pi < 0.0:
                pi = 0.0
            w = zi * pi
            s1 += w
            s2 += w * w
        if s1 <= 1e-14:
            return 0.0
        arg = coeff * (s2 / (s1 * s1) - invn)
        if arg < 0.0:
            arg = 0.0
        return s1 * arg if quadrature else s1 * sqrt(arg)

    def value(alphas, vecs) -> float:
        acc = 0.0
        for a, m in zip(alphas, vecs):
            if a > 1e-14:
                acc += a * kernel(m)
        return sqrt(acc) if quadrature else acc

    value.kernel = kernel
    value.quadrature = quadrature
    return value


def _fused_objective(kernel, m_count: int, evaluate):
    """Decode + evaluate in one pass for weight-linear measures."""
    nfree = m_count - 1
    quadrature = evaluate.quadrature
    sin, cos, sqrt = math.sin, math.cos, math.sqrt

    def objective(x) -> float:
        sx = sy = sz = 0.0
        sw = 0.0
        acc = 0.0
        for k in range(nfree):
            a = x[k] * x[k]
            b = x[nfree + 2 * k]
            g = x[nfree + 2 * k + 1]
            sb = sin(b)
            m = (sb * cos(g), sb * sin(g), cos(b))
            sw += a
            sx += a * m[0]
            sy += a * m[1]
            sz += a * m[2]
            if a > 1e-14:
                acc += a * kernel(m)
        snorm = sqrt(sx * sx + sy * sy + sz * sz)
        excess = sw + snorm - 1.0
        if excess <= 0.0:
            rest = 1.0 - sw
            if rest > 1e-14 and snorm > 0.0:
                acc += rest * kernel((-sx / rest, -sy / rest, -sz / rest))
            excess = 0.0
        elif snorm > 0.0:
            t = 1.0 / (sw + snorm)
            acc = t * acc + t * snorm * kernel((-sx / snorm, -sy / snorm, -sz / snorm))
        else:
            acc /= sw
        return -(sqrt(acc) if quadrature else acc) + 0.1 * excess

    return objective


def _scalar_visibility(j: JointState, quadrature: bool):
    """Closure evaluating V(W)/Vtilde(W) for rank-one POVM candidates."""
    rho = j.beam.rho
    chis = j.det.chis
    zetas = j.beam.zetas
    n = j.beam.n
    coeff = n / (n - 1)
    eye = np.eye(2, dtype=complex)

    def value(alphas, vecs) -> float:
        acc = 0.0
        for a, m in zip(alphas, vecs):
            if a <= 1e-14:
                continue
            op = a * (eye + detector._dot_sigma(np.asarray(m, dtype=float)))
            sandwich = chis.conj() @ op @ chis.T
            born = np.clip(sandwich.diagonal().real, 0.0, None)
            p = float(zetas @ born)
            if p <= 1e-14:
                continue
            sub = sandwich.T * rho
            off2 = float(np.sum(np.abs(sub) ** 2) - np.sum(np.abs(sub.diagonal()) ** 2))
            v_mu = math.sqrt(max(coeff * off2, 0.0)) / p
            acc += p * v_mu * v_mu if quadrature else p * v_mu
        return math.sqrt(acc) if quadrature else acc

    return value


# ---------------------------------------------------------------------------
# multi-start search over closed rank-one POVMs
# ---------------------------------------------------------------------------

@dataclass
class OptimizationResult:
    best_povm: Povm
    value: float
    measure: str
    restarts_used: int
    converged: bool
    history: list[float] = field(default_factory=list)
    supremum_only: bool = False  # set for coherence: a sup, only approximated


def _decode(x, m_count: int):
    """Parameters -> (alphas, vecs, excess); always a valid POVM.

    The first M-1 weights are squares of the parameters; the closing
    element absorbs the residual weight and Bloch vector.  When the free
    elements over-commit (sum alpha + |sum alpha mhat| > 1) the whole set
    is rescaled onto the closure boundary, so every parameter point maps
    to a valid POVM; ``excess`` measures the rescaling and feeds a gentle
    penalty that keeps the search near exact closure.
    """
    nfree = m_count - 1
    alphas = []
    vecs = []
    sx = sy = sz = 0.0
    for k in range(nfree):
        a = x[k] * x[k]
        b = x[nfree + 2 * k]
        g = x[nfree + 2 * k + 1]
        sb = math.sin(b)
        m = (sb * math.cos(g), sb * math.sin(g), math.cos(b))
        alphas.append(a)
        vecs.append(m)
        sx += a * m[0]
        sy += a * m[1]
        sz += a * m[2]
    sw = sum(alphas)
    snorm = math.sqrt(sx * sx + sy * sy + sz * sz)
    excess = sw + snorm - 1.0
    if excess <= 0.0:
        rest = 1.0 - sw
        if rest > 1e-14 and snorm > 0.0:
            vecs.append((-sx / rest, -sy / rest, -sz / rest))
        else:
            vecs.append((0.0, 0.0, 1.0))
        alphas.append(rest)
        return alphas, vecs, 0.0
    t = 1.0 / (sw + snorm)
    alphas = [a * t for a in alphas]
    if snorm > 0.0:
        vecs.append((-sx / snorm, -sy / snorm, -sz / snorm))
        alphas.append(t * snorm)
    else:  # sw > 1 with balanced vectors: pure rescale, zero closing weight
        vecs.append((0.0, 0.0, 1.0))
        alphas.append(0.0)
    return alphas, vecs, excess


def _seed_points(m_count: int, restarts: int, rng: numerics.Rng) -> list[np.ndarray]:
    """Fibonacci-lattice directions plus rng jitter; always feasible
    (free weights 1/(2(M-1)) leave the closing element enough mass)."""
    nfree = m_count - 1
    lattice = numerics.fibonacci_sphere(max(restarts * nfree, 1))
    w0 = math.sqrt(1.0 / (2.0 * nfree))
    seeds = []
    for r in range(restarts):
        x = np.empty(3 * nfree)
        x[:nfree] = w0
        for k in range(nfree):
            v = lattice[(r * nfree + k) % len(lattice)] + 0.15 * rng.normal(size=3)
            v = v / np.linalg.norm(v)
            x[nfree + 2 * k] = math.acos(np.clip(v[2], -1.0, 1.0))
            x[nfree + 2 * k + 1] = math.atan2(v[1], v[0])
        seeds.append(x)
    return seeds


def _search_rank_one(
    j: JointState,
    evaluate,
    m_count: int,
    restarts: int,
    rng: numerics.Rng,
    maxiter: int = 500,
) -> tuple[list, list, float, bool, list[float]]:
    """Multi-start maximization of ``evaluate`` over closed rank-one POVMs.

    Each restart runs a simplex descent followed by a shrinking-step
    coordinate polish; the polish matters because the optimum usually sits
    on the closure boundary (unit closing vector), where the simplex tends
    to stall with stray near-zero-weight elements.
    """
    if j.det.d != 2:
        raise WrongDimension(f"search requires a 2-dimensional detector, got d={j.det.d}")
    if m_count < 2:
        raise OutOfRange(f"need at least 2 POVM elements, got {m_count}")

    kernel = getattr(evaluate, "kernel", None)
    if kernel is not None:
        objective = _fused_objective(kernel, m_count, evaluate)
    else:

        def objective(x) -> float:
            alphas, vecs, excess = _decode(x, m_count)
            return -evaluate(alphas, vecs) + 0.1 * excess

    nfree = m_count - 1
    steps = np.concatenate([np.full(nfree, 0.12), np.full(2 * nfree, 0.4)])
    best_x = None
    best_val = -np.inf
    best_converged = False
    history = []
    for seed in _seed_points(m_count, restarts, rng):
        x, fx, converged = numerics.nelder_mead(
            objective, seed, step=steps, xtol=1e-6, maxiter=maxiter
        )
        x, fx = numerics.compass_search(objective, x, fx)
        alphas, vecs, _ = _decode(x, m_count)
        value = evaluate(alphas, vecs)
        history.append(value)
        if value > best_val:
            best_val = value
            best_x = x
            best_converged = converged
    if best_x is None or best_val < 0.0:
        raise InfeasibleStart("no usable POVM found from any restart")
    alphas, vecs, _ = _decode(best_x, m_count)
    return alphas, vecs, best_val, best_converged, history


def _build_povm(alphas, vecs) -> Povm:
    pairs = [
        (a, np.asarray(m, dtype=float)) for a, m in zip(alphas, vecs) if a > 1e-12
    ]
    return Povm.from_rank_one(pairs)


def _aggregate(report: detector.MeasurementReport, measure: str) -> float:
    return {
        "K": report.knowledge,
        "Ktilde": report.knowledge_q,
        "V": report.erasure_visibility,
        "Vtilde": report.erasure_visibility_q,
    }[measure]


def distinguishability_numeric(
    j: JointState,
    measure: str = "K",
    max_elements: int = 4,
    restarts: int = 32,
    rng: numerics.Rng | None = None,
) -> OptimizationResult:
    """Maximize K(W) or Ktilde(W) over closed rank-one POVMs.

    Multi-start simplex search; the reported value is recomputed from the
    full measurement report of the winning POVM.
    """
    if measure not in _KNOWLEDGE_MEASURES:
        raise ValueError(f"measure must be one of {_KNOWLEDGE_MEASURES}, got {measure!r}")
    rng = rng or numerics.Rng(0)
    nhats = np.array([detector.bloch_vector(c) for c in j.det.chis])
    evaluate = _scalar_knowledge(j.beam.zetas, nhats, measure == "Ktilde")
    alphas, vecs, _, converged, history = _search_rank_one(
        j, evaluate, max_elements, restarts, rng
    )
    povm = _build_povm(alphas, vecs)
    value = _aggregate(detector.measurement_report(j, povm), measure)
    return OptimizationResult(povm, value, measure, len(history), converged, history)


def coherence_numeric(
    j: JointState,
    measure: str = "V",
    max_elements: int = 4,
    restarts: int = 16,
    rng: numerics.Rng | None = None,
) -> OptimizationResult:
    """Best found V(W) or Vtilde(W) over closed rank-one POVMs.

    The coherence is a supremum and may not be attained; the result is a
    certified lower bound (``supremum_only`` is set on the result).
    """
    if measure not in _VISIBILITY_MEASURES:
        raise ValueError(f"measure must be one of {_VISIBILITY_MEASURES}, got {measure!r}")
    rng = rng or numerics.Rng(0)
    evaluate = _scalar_visibility(j, measure == "Vtilde")
    alphas, vecs, _, converged, history = _search_rank_one(
        j, evaluate, max_elements, restarts, rng
    )
    povm = _build_povm(alphas, vecs)
    value = _aggregate(detector.measurement_report(j, povm), measure)
    return OptimizationResult(
        povm, value, measure, len(history), converged, history, supremum_only=True
    )


def optimal_two_element_pvm(
    j: JointState, measure: str = "K", grid: int = 256
) -> OptimizationResult:
    """Best two-element PVM (1 +- mhat . sigma)/2 for a knowledge measure.

    Exhaustive Fibonacci-lattice scan over the measurement axis followed
    by simplex refinement of the polar angles.  For equal populations this
    attains the full POVM optimum; a warning is emitted otherwise.
    """
    if j.det.d != 2:
        raise WrongDimension(f"requires a 2-dimensional detector, got d={j.det.d}")
    if measure not in _KNOWLEDGE_MEASURES:
        raise ValueError(f"measure must be one of {_KNOWLEDGE_MEASURES}, got {measure!r}")
    zetas = j.beam.zetas
    if np.max(np.abs(zetas - 1.0 / j.beam.n)) > 1e-12:
        warnings.warn(
            "two-element optimality is only guaranteed for equal populations",
            stacklevel=2,
        )
    nhats = np.array([detector.bloch_vector(c) for c in j.det.chis])
    quad = measure == "Ktilde"

    axes = numerics.fibonacci_sphere(grid)
    both = np.stack([axes, -axes], axis=1)  # (grid, 2, 3)
    weights = np.full((grid, 2), 0.5)
    values = rank_one_knowledge(zetas, nhats, weights, both, quadrature=quad)
    start_axis = axes[int(np.argmax(values))]
    grid_best = float(np.max(values))

    evaluate = _scalar_knowledge(zetas, nhats, quad)

    def objective(x) -> float:
        b, g = x
        sb = math.sin(b)
        m = (sb * math.cos(g), sb * math.sin(g), math.cos(b))
        neg = (-m[0], -m[1], -m[2])
        return -evaluate((0.5, 0.5), (m, neg))

    x0 = np.array(
        [math.acos(np.clip(start_axis[2], -1, 1)), math.atan2(start_axis[1], start_axis[0])]
    )
    x, fx, converged = numerics.nelder_mead(objective, x0, step=0.2, xtol=1e-10)
    b, g = x
    mhat = np.array(
        [math.sin(b) * math.cos(g), math.sin(b) * math.sin(g), math.cos(b)]
    )
    povm = Povm.two_element(mhat)
    value = _aggregate(detector.measurement_report(j, povm), measure)
    return OptimizationResult(povm, value, measure, 1, converged, [grid_best, -fx])


# ---------------------------------------------------------------------------
# symmetrization and pairwise reduction of qubit POVMs
# ---------------------------------------------------------------------------

def symmetrize_povm(povm: Povm) -> Povm:
    """Split every element into an xz-mirror pair at half weight.

    For coplanar (xz) detector vectors and equal populations, both
    knowledge aggregates are untouched: the Born probabilities only see
    the xz projection of each measurement direction.
    """
    pairs = povm.require_rank_one()
    out = []
    for a, m in pairs:
        mirror = np.array([m[0], -m[1], m[2]])
        out.append((a / 2.0, np.asarray(m, dtype=float)))
        out.append((a / 2.0, mirror))
    return Povm.from_rank_one(out)


def _match_mirror_pairs(pairs, tol: float = 1e-9):
    """Group (alpha, mhat) entries into mirror pairs about the z axis."""
    for _, m in pairs:
        if abs(m[1]) > tol:
            raise NotSymmetric("element leaves the xz plane")
    used = [False] * len(pairs)
    matched = []
    for a_idx, (alpha, m) in enumerate(pairs):
        if used[a_idx]:
            continue
        partner = None
        for b_idx in range(a_idx + 1, len(pairs)):
            if used[b_idx]:
                continue
            beta, w = pairs[b_idx]
            if (
                abs(alpha - beta) <= tol
                and abs(m[2] - w[2]) <= tol
                and abs(m[0] + w[0]) <= tol
            ):
                partner = b_idx
                break
        if partner is None:
            raise NotSymmetric(f"element {a_idx} has no mirror partner")
        used[a_idx] = used[partner] = True
        matched.append((alpha, abs(m[0]), m[2]))
    return matched  # list of (alpha, |mx|, mz)


def reduce_symmetric_povm(povm: Povm, j: JointState) -> Povm:
    """Merge the last two mirror pairs of a z-symmetric qubit POVM.

    The merged pair keeps the weighted-average z component,
    u_z = (a_N m_N^z + a_{N-1} m_{N-1}^z) / (a_N + a_{N-1}), with the x
    component restored from unit norm.  While the merge kernel g stays
    concave (theta below 2 pi/3 in the symmetric example) the quadrature
    knowledge never decreases.
    """
    if j.det.d != 2 or povm.d != 2:
        raise WrongDimension("reduction is defined for 2-dimensional detectors")
    matched = _match_mirror_pairs(povm.require_rank_one())
    if len(matched) < 2:
        raise TooFewPairs(f"need at least two mirror pairs, got {len(matched)}")
    (a1, _, z1), (a2, _, z2) = matched[-2], matched[-1]
    merged_alpha = a1 + a2
    u_z = (a1 * z1 + a2 * z2) / merged_alpha
    u_x = math.sqrt(max(1.0 - u_z * u_z, 0.0))
    out = []
    for alpha, mx, mz in matched[:-2]:
        out.append((alpha, np.array([mx, 0.0, mz])))
        out.append((alpha, np.array([-mx, 0.0, mz])))
    out.append((merged_alpha, np.array([u_x, 0.0, u_z])))
    out.append((merged_alpha, np.array([-u_x, 0.0, u_z])))
    return Povm.from_rank_one(out)


# ---------------------------------------------------------------------------
# random closed rank-one POVMs (oracle sampling)
# ---------------------------------------------------------------------------

def random_rank_one_povm(elements: int, rng: numerics.Rng) -> list[tuple[float, np.ndarray]]:
    """Sample a random rank-one POVM with exact closure.

    The first M-2 elements get random weights and directions; the final
    two unit directions are solved from the residual weight/vector (a
    closing triangle), so every sample satisfies sum alpha = 1 and
    sum alpha mhat = 0 to machine precision.
    """
    if elements < 2:
        raise OutOfRange("a POVM needs at least 2 elements")

    def random_unit() -> np.ndarray:
        v = rng.normal(size=3)
        return v / np.linalg.norm(v)

    while True:
        pairs = []
        if elements > 2:
            raw = rng.uniform(0.05, 1.0, size=elements - 2)
            total = rng.uniform(0.15, 0.7)
            weights = raw / raw.sum() * total
            pairs = [(float(w), random_unit()) for w in weights]
        residual_w = 1.0 - sum(a for a, _ in pairs)
        residual_v = -sum((a * m for a, m in pairs), start=np.zeros(3))
        r = float(np.linalg.norm(residual_v))
        if r <= residual_w:
            break
    if r < 1e-12:
        u = random_unit()
        return pairs + [(residual_w / 2.0, u), (residual_w / 2.0, -u)]
    a = residual_w / 2.0 + (r / 2.0) * rng.uniform(-0.95, 0.95)
    b = residual_w - a
    rhat = residual_v / r
    perp = random_unit()
    perp -= (perp @ rhat) * rhat
    perp /= np.linalg.norm(perp)
    cos_u = np.clip((r * r + a * a - b * b) / (2.0 * a * r), -1.0, 1.0)
    u = cos_u * rhat + math.sqrt(max(1.0 - cos_u * cos_u, 0.0)) * perp
    v = (residual_v - a * u) / b
    return pairs + [(float(a), u), (float(b), v / np.linalg.norm(v))]


# ---------------------------------------------------------------------------
# probes and scans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SaturationProbe:
    gap: float
    distinguishability: float
    visibility: float


def saturation_probe(
    j: JointState,
    max_elements: int = 4,
    restarts: int = 16,
    rng: numerics.Rng | None = None,
) -> SaturationProbe:
    """Gap 1 - D^2 - V^2 of the distinguishability/visibility bound.

    D is found numerically (measure K); V is the reduced-beam visibility.
    """
    d_val = distinguishability_numeric(j, "K", max_elements, restarts, rng).value
    v_val = beams.generalized_visibility(detector.reduced_beam(j))
    return SaturationProbe(1.0 - d_val * d_val - v_val * v_val, d_val, v_val)


@dataclass(frozen=True)
class ThetaRow:
    theta: float
    visibility: float
    d_analytic: float
    duality_sum: float
    d_numeric: float | None = None
    d_tilde: float | None = None


def theta_scan(
    grid: int,
    optimize: bool = True,
    rng: numerics.Rng | None = None,
    restarts: int = 8,
    max_elements: int = 4,
    include_tilde: bool = False,
    two_element_grid: int = 256,
    cross_check: bool = True,
) -> list[ThetaRow]:
    """Tabulate V, analytic D, optional numeric D/Dtilde over theta in [0, pi].

    With ``optimize`` the numeric column comes from the two-element PVM
    scan, cross-checked against the full multi-element search (a warning
    flags any disagreement beyond 1e-5).
    """
    if grid < 2:
        raise OutOfRange("grid must be >= 2")
    rng = rng or numerics.Rng(0)
    rows = []
    for idx, theta in enumerate(np.linspace(0.0, math.pi, grid)):
        theta = float(theta)
        joint = symmetric_example(theta)
        vis = beams.generalized_visibility(detector.reduced_beam(joint))
        d_ana = analytic_D(theta)
        d_num = d_til = None
        if optimize:
            d_num = optimal_two_element_pvm(joint, "K", grid=two_element_grid).value
            if cross_check:
                full = distinguishability_numeric(
                    joint, "K", max_elements, restarts, rng.derive(idx)
                ).value
                if abs(full - d_num) > 1e-5:
                    warnings.warn(
                        f"two-element and full POVM optima disagree at theta={theta:.6f}: "
                        f"{d_num:.8f} vs {full:.8f}",
                        stacklevel=2,
                    )
                    d_num = max(d_num, full)
            if include_tilde:
                d_til = distinguishability_numeric(
                    joint, "Ktilde", max_elements, restarts, rng.derive(10_000 + idx)
                ).value
        rows.append(
            ThetaRow(
                theta=theta,
                visibility=vis,
                d_analytic=d_ana,
                duality_sum=d_ana * d_ana + vis * vis,
                d_numeric=d_num,
                d_tilde=d_til,
            )
        )
    return rows
