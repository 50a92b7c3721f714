"""Which-way detectors: joint states, POVM measurements, sorted subensembles.

A detector entangled with the beams stores one normalized (not
necessarily orthogonal) state per beam.  Measuring a POVM on the detector
sorts the quantons into subensembles; per outcome we get a conditioned
beam state, its predictability ("conditioned which-way knowledge") and
its visibility ("partial erasure visibility"), and two aggregation rules:
linear in the outcome probabilities (K, V_W) and in quadrature
(Ktilde, Vtilde_W).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import beams, numerics
from .beams import BeamState
from .errors import (
    CountMismatch,
    DimensionMismatch,
    InvalidPovm,
    NoRankOneForm,
    NotUnit,
    TooLarge,
)
from .inequalities import SATURATION_TOL, InequalityReport

ZERO_OUTCOME_TOL = 1e-14

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def _fix_global_phase(v: np.ndarray) -> np.ndarray:
    """Make the first nonzero component real-positive (reproducible phase)."""
    for c in v:
        if abs(c) > 1e-15:
            return v * (c.conjugate() / abs(c))
    return v


def bloch_state(nhat) -> np.ndarray:
    """Unit vector |chi> in C^2 with |chi><chi| = (1 + nhat . sigma)/2."""
    nhat = np.asarray(nhat, dtype=float)
    if nhat.shape != (3,):
        raise NotUnit(f"expected a 3-vector, got shape {nhat.shape}")
    norm = float(np.linalg.norm(nhat))
    if abs(norm - 1.0) > 1e-12:
        raise NotUnit(f"direction has norm {norm!r}")
    theta = np.arccos(np.clip(nhat[2], -1.0, 1.0))
    phi = np.arctan2(nhat[1], nhat[0])
    v = np.array([np.cos(theta / 2), np.sin(theta / 2) * np.exp(1j * phi)])
    return _fix_global_phase(v)


def bloch_vector(chi: np.ndarray) -> np.ndarray:
    """Bloch 3-vector of a (normalized) C^2 state."""
    c0, c1 = chi
    cross = np.conj(c0) * c1
    return np.array([2 * cross.real, 2 * cross.imag, abs(c0) ** 2 - abs(c1) ** 2])


@dataclass(frozen=True)
class DetectorStates:
    """Final detector states |chi_i>, one unit vector per beam (rows)."""

    chis: np.ndarray

    def __post_init__(self):
        chis = np.asarray(self.chis, dtype=complex)
        if chis.ndim != 2 or chis.shape[1] < 2:
            raise DimensionMismatch("detector states must be vectors of dimension >= 2")
        norms = np.linalg.norm(chis, axis=1)
        worst = float(np.max(np.abs(norms - 1.0)))
        if worst > 1e-12:
            raise NotUnit(f"detector state norm deviates by {worst:.3e}")
        object.__setattr__(self, "chis", chis)

    @classmethod
    def from_bloch(cls, nhats) -> "DetectorStates":
        return cls(np.array([bloch_state(v) for v in nhats]))

    @property
    def count(self) -> int:
        return self.chis.shape[0]

    @property
    def d(self) -> int:
        return self.chis.shape[1]

    def gram(self) -> np.ndarray:
        """Overlap matrix g_ij = <chi_j | chi_i>."""
        return self.chis @ self.chis.conj().T


@dataclass(frozen=True)
class JointState:
    """Structural pairing of a beam state with its which-way detector.

    The joint density matrix sum_ij rho_ij |chi_i><chi_j| (x) |psi_i><psi_j|
    is never materialized except through :func:`densify`.
    """

    beam: BeamState
    det: DetectorStates

    def __post_init__(self):
        if self.det.count != self.beam.n:
            raise CountMismatch(
                f"{self.det.count} detector states for {self.beam.n} beams"
            )


def entangle(beam: BeamState, det: DetectorStates) -> JointState:
    return JointState(beam, det)


def reduced_beam(j: JointState) -> BeamState:
    """Beam state after tracing out the detector: rho_ij <chi_j|chi_i>."""
    return BeamState(j.beam.rho * j.det.gram())


def detector_marginal(j: JointState) -> np.ndarray:
    """Detector state after tracing out the beams: sum_i zeta_i |chi_i><chi_i|."""
    z = j.beam.zetas
    chis = j.det.chis
    return np.einsum("i,ia,ib->ab", z, chis, chis.conj())


def densify(j: JointState) -> np.ndarray:
    """Explicit (n d) x (n d) joint matrix, detector factor first.

    Oracle for partial-trace cross checks only; refuses n*d > 64.
    """
    n, d = j.beam.n, j.det.d
    if n * d > 64:
        raise TooLarge(f"joint dimension {n * d} exceeds 64")
    chis = j.det.chis
    out = np.zeros((d * n, d * n), dtype=complex)
    for i in range(n):
        for k in range(n):
            block = j.beam.rho[i, k] * np.outer(chis[i], chis[k].conj())
            ei = np.zeros((n, n))
            ei[i, k] = 1.0
            out += np.kron(block, ei)
    return out


@dataclass(frozen=True)
class Povm:
    """Positive operators summing to the identity on the detector space.

    ``rank_one`` optionally carries the qubit decomposition
    A_mu = alpha_mu (1 + mhat_mu . sigma) as (alpha, mhat) pairs; closure
    then reads sum alpha = 1, sum alpha mhat = 0.
    """

    elements: tuple[np.ndarray, ...]
    rank_one: tuple[tuple[float, np.ndarray], ...] | None = None

    def __post_init__(self):
        elements = tuple(numerics.as_complex_matrix(a) for a in self.elements)
        if not elements:
            raise InvalidPovm("a POVM needs at least one element")
        d = elements[0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for a in elements:
            if a.shape != (d, d):
                raise InvalidPovm("POVM elements have mixed dimensions")
            if numerics.hermiticity_defect(a) > 1e-12:
                raise InvalidPovm("POVM element is not Hermitian")
            lowest = float(np.linalg.eigvalsh((a + a.conj().T) / 2)[0])
            if lowest < -1e-12:
                raise InvalidPovm(f"POVM element has negative eigenvalue {lowest:.3e}")
            total += a
        if float(np.max(np.abs(total - np.eye(d)))) > 1e-10:
            raise InvalidPovm("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", elements)
        if self.rank_one is not None:
            pairs = tuple(
                (float(a), np.asarray(m, dtype=float)) for a, m in self.rank_one
            )
            wsum = sum(a for a, _ in pairs)
            vsum = sum((a * m for a, m in pairs), start=np.zeros(3))
            if abs(wsum - 1.0) > 1e-10 or float(np.linalg.norm(vsum)) > 1e-10:
                raise InvalidPovm("rank-one weights/directions violate closure")
            for _, m in pairs:
                if abs(float(np.linalg.norm(m)) - 1.0) > 1e-9:
                    raise InvalidPovm("rank-one directions must be unit vectors")
            object.__setattr__(self, "rank_one", pairs)

    @property
    def d(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.elements)

    @classmethod
    def from_rank_one(cls, pairs) -> "Povm":
        """Build from qubit (alpha, mhat) pairs; |mhat| <= 1 allowed."""
        mats = []
        for alpha, m in pairs:
            m = np.asarray(m, dtype=float)
            if alpha < -1e-12 or np.linalg.norm(m) > 1.0 + 1e-9:
                raise InvalidPovm(f"invalid weight/direction ({alpha}, {m})")
            mats.append(alpha * (np.eye(2, dtype=complex) + _dot_sigma(m)))
        unit = all(abs(np.linalg.norm(np.asarray(m)) - 1.0) <= 1e-9 for _, m in pairs)
        return cls(tuple(mats), rank_one=tuple(pairs) if unit else None)

    @classmethod
    def two_element(cls, mhat) -> "Povm":
        """Projective pair (1 +- mhat . sigma)/2."""
        m = np.asarray(mhat, dtype=float)
        m = m / np.linalg.norm(m)
        return cls.from_rank_one(((0.5, m), (0.5, -m)))

    def require_rank_one(self) -> tuple[tuple[float, np.ndarray], ...]:
        if self.rank_one is None:
            raise NoRankOneForm("POVM carries no rank-one decomposition")
        return self.rank_one


def _dot_sigma(m: np.ndarray) -> np.ndarray:
    return m[0] * PAULI[0] + m[1] * PAULI[1] + m[2] * PAULI[2]


def pvm_from_observable(w, cluster_tol: float = 1e-8) -> Povm:
    """Spectral projectors of a Hermitian observable, one per eigenvalue
    cluster (eigenvalues closer than ``cluster_tol`` count as degenerate)."""
    vals, vecs = numerics.hermitian_eig(w)
    projectors = []
    start = 0
    for k in range(1, len(vals) + 1):
        if k == len(vals) or vals[k] - vals[k - 1] > cluster_tol:
            block = vecs[:, start:k]
            projectors.append(block @ block.conj().T)
            start = k
    return Povm(tuple(projectors))


@dataclass(frozen=True)
class OutcomeStats:
    """Per-outcome table row of a which-way measurement."""

    index: int
    p: float
    born: np.ndarray  # P_{i mu} = <chi_i| A_mu |chi_i>
    posterior: np.ndarray  # Q_{i mu} = zeta_i P_{i mu} / p_mu
    knowledge: float  # K_mu
    visibility: float  # V_mu
    state: BeamState  # conditioned beam state rho_(mu)


@dataclass(frozen=True)
class MeasurementReport:
    outcomes: tuple[OutcomeStats, ...]
    skipped: tuple[int, ...]
    knowledge: float  # K   = sum p K_mu
    knowledge_q: float  # Ktilde = sqrt(sum p K_mu^2)
    erasure_visibility: float  # V_W = sum p V_mu
    erasure_visibility_q: float  # Vtilde_W = sqrt(sum p V_mu^2)
    baseline_predictability: float  # P of the reduced beam state
    baseline_visibility: float  # V of the reduced beam state
    chain_verdicts: dict[str, bool] = field(default_factory=dict)

    @property
    def total_probability(self) -> float:
        return sum(o.p for o in self.outcomes)


def measurement_report(j: JointState, povm: Povm) -> MeasurementReport:
    """Sort the beams by a detector POVM and tabulate the outcome statistics.

    Born probabilities are P_{i mu} = <chi_i| A_mu |chi_i>; the conditioned
    beam states extend the projector formula to general positive elements,
    rho_(mu)ij = <chi_j| A_mu |chi_i> rho_ij / p_mu.  Outcomes with
    p_mu <= 1e-14 carry no weight and are skipped.
    """
    if povm.d != j.det.d:
        raise DimensionMismatch(f"POVM dimension {povm.d} != detector dimension {j.det.d}")
    chis = j.det.chis
    z = j.beam.zetas
    n = j.beam.n

    reduced = reduced_beam(j)
    base_p = beams.generalized_predictability(reduced)
    base_v = beams.generalized_visibility(reduced)

    outcomes = []
    skipped = []
    k_lin = k_sq = v_lin = v_sq = 0.0
    for idx, a in enumerate(povm.elements):
        sandwich = chis.conj() @ a @ chis.T  # [j, i] = <chi_j| A |chi_i>
        born = np.clip(sandwich.diagonal().real, 0.0, None)
        p = float(z @ born)
        if p <= ZERO_OUTCOME_TOL:
            skipped.append(idx)
            continue
        posterior = z * born / p
        sub = BeamState(sandwich.T * j.beam.rho / p)
        k_mu = beams.generalized_predictability(sub)
        v_mu = beams.generalized_visibility(sub)
        outcomes.append(OutcomeStats(idx, p, born, posterior, k_mu, v_mu, sub))
        k_lin += p * k_mu
        k_sq += p * k_mu * k_mu
        v_lin += p * v_mu
        v_sq += p * v_mu * v_mu

    k_tilde = float(np.sqrt(k_sq))
    v_tilde = float(np.sqrt(v_sq))
    verdicts = {
        "V<=V(W)": base_v <= v_lin + SATURATION_TOL,
        "V(W)<=Vtilde(W)": v_lin <= v_tilde + SATURATION_TOL,
        "P<=K(W)": base_p <= k_lin + SATURATION_TOL,
        "K(W)<=Ktilde(W)": k_lin <= k_tilde + SATURATION_TOL,
        "Ktilde2+Vtilde2<=1": k_sq + v_sq <= 1.0 + SATURATION_TOL,
    }
    return MeasurementReport(
        outcomes=tuple(outcomes),
        skipped=tuple(skipped),
        knowledge=k_lin,
        knowledge_q=k_tilde,
        erasure_visibility=v_lin,
        erasure_visibility_q=v_tilde,
        baseline_predictability=base_p,
        baseline_visibility=base_v,
        chain_verdicts=verdicts,
    )


def chain_check(j: JointState, povm: Povm) -> list[InequalityReport]:
    """The two monotonicity chains plus the quadrature bound.

    V <= V(W) <= Vtilde(W), P <= K(W) <= Ktilde(W) and
    Ktilde^2 + Vtilde^2 <= 1; the last is saturated whenever the joint
    beam-and-detector state is pure.
    """
    rep = measurement_report(j, povm)
    ks, vs = rep.knowledge, rep.erasure_visibility
    return [
        InequalityReport("V<=V(W)", rep.baseline_visibility, vs),
        InequalityReport("V(W)<=Vtilde(W)", vs, rep.erasure_visibility_q),
        InequalityReport("P<=K(W)", rep.baseline_predictability, ks),
        InequalityReport("K(W)<=Ktilde(W)", ks, rep.knowledge_q),
        InequalityReport(
            "Ktilde2+Vtilde2<=1",
            rep.knowledge_q**2 + rep.erasure_visibility_q**2,
            1.0,
            terms={"Ktilde2": rep.knowledge_q**2, "Vtilde2": rep.erasure_visibility_q**2},
        ),
    ]
