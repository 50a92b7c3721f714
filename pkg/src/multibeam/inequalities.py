"""Trace-power inequalities and duality relations for beam states.

Every check returns an :class:`InequalityReport` carrying the evaluated
left-hand side, the bound, the slack and a per-term breakdown, so batch
audits can aggregate violations and saturation counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import beams, numerics
from .beams import BeamState
from .errors import OutOfRange, WrongBeamCount

SATURATION_TOL = 1e-10

# Phase-averaged third moment of the intensity, in units of <I>^3, equals
# SIX times the cyclic coherence product 2*Re(rho_12 rho_23 rho_31): each
# unordered beam triple contributes its two directed cycles, every one
# realized by 3! orderings of the factors.  The measurable form of the
# cubic trace inequality therefore carries the coefficient 3/6 = 1/2 on
# the moment ratio.
THIRD_MOMENT_RATIO = 6.0


@dataclass(frozen=True)
class InequalityReport:
    name: str
    lhs: float
    bound: float
    terms: dict[str, float] = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.bound - self.lhs

    @property
    def saturated(self) -> bool:
        return abs(self.slack) <= SATURATION_TOL

    @property
    def violated(self) -> bool:
        return self.slack < -SATURATION_TOL


def greenberger_yasin(s: BeamState) -> InequalityReport:
    """Two-beam contrast/predictability bound V^2 + P^2 <= 1.

    Saturated exactly when Tr rho^2 = 1 (the left-hand side equals
    2 Tr rho^2 - 1 for two beams).
    """
    if s.n != 2:
        raise WrongBeamCount(f"defined for 2 beams, got {s.n}")
    vis = 2.0 * float(np.abs(s.rho[0, 1]))
    z = s.zetas
    pred = abs(float(z[0] - z[1]))
    lhs = vis**2 + pred**2
    return InequalityReport(
        "greenberger_yasin",
        lhs,
        1.0,
        terms={"V2": vis**2, "P2": pred**2, "purity": s.purity()},
    )


def duality_check(s: BeamState) -> InequalityReport:
    """Generalized visibility/predictability bound V^2 + P^2 <= 1.

    Equality holds if and only if the state is pure: the left-hand side
    is n/(n-1) * (Tr rho^2 - 1/n).
    """
    v = beams.generalized_visibility(s)
    p = beams.generalized_predictability(s)
    return InequalityReport(
        "duality",
        v * v + p * p,
        1.0,
        terms={"V2": v * v, "P2": p * p, "purity": s.purity()},
    )


def trace_power_check(s: BeamState, m: int) -> InequalityReport:
    """0 < Tr rho^m <= 1 for 2 <= m <= n."""
    if not 2 <= m <= s.n:
        raise OutOfRange(f"power must be in 2..{s.n}, got {m}")
    lhs = numerics.trace_power(s.rho, m)
    if lhs <= 0.0:
        raise OutOfRange(f"Tr rho^{m} = {lhs!r} is not positive")
    return InequalityReport(f"trace_power_m{m}", lhs, 1.0, terms={"trace_power": lhs})


def three_beam_expanded(s: BeamState) -> InequalityReport:
    """Cubic trace bound for three beams, expanded in matrix elements.

    Tr rho^3 splits into populations, population-weighted coherences and
    the cyclic coherence product:

        sum_i z_i^3 + 3 sum_i z_i sum_{j != i} |rho_ij|^2
                    + 3 (rho_12 rho_23 rho_31 + h.c.)  <= 1

    The report also evaluates the measurable form, written in pairwise
    fringe contrasts V_ij = 2|rho_ij| and the cubed-intensity moment
    ratio (coefficient 1/2, see THIRD_MOMENT_RATIO; the coefficient 3
    quoted alongside the matrix form would overcount the phase averages
    by that factor of 6):

        sum_i z_i^3 + (3/4) sum_i z_i sum_{j != i} V_ij^2
                    + (1/2) <(dI)^3> / <I>^3
    """
    if s.n != 3:
        raise WrongBeamCount(f"defined for 3 beams, got {s.n}")
    rho = s.rho
    z = s.zetas
    t_pop = float(np.sum(z**3))
    abs2 = np.abs(rho - np.diag(rho.diagonal())) ** 2
    t_mixed = 3.0 * float(z @ abs2.sum(axis=1))
    cyclic = 2.0 * (rho[0, 1] * rho[1, 2] * rho[2, 0]).real
    t_cyclic = 3.0 * cyclic
    lhs = t_pop + t_mixed + t_cyclic

    vsq = np.array([[beams.pairwise_visibility(s, i, j) ** 2 if i != j else 0.0
                     for j in range(3)] for i in range(3)])
    t_mixed_meas = 0.75 * float(z @ vsq.sum(axis=1))
    moment_ratio = beams.phase_moment(s, 3) * s.n**3
    t_cyclic_meas = (3.0 / THIRD_MOMENT_RATIO) * moment_ratio
    measurable = t_pop + t_mixed_meas + t_cyclic_meas

    return InequalityReport(
        "three_beam_cubic",
        lhs,
        1.0,
        terms={
            "populations": t_pop,
            "mixed": t_mixed,
            "cyclic": t_cyclic,
            "measurable_lhs": measurable,
            "moment_ratio": moment_ratio,
            "trace_power_3": numerics.trace_power(rho, 3),
        },
    )


def all_checks(s: BeamState) -> list[InequalityReport]:
    """Every check applicable to the given beam count."""
    reports = [duality_check(s)]
    if s.n == 2:
        reports.append(greenberger_yasin(s))
    for m in range(2, s.n + 1):
        reports.append(trace_power_check(s, m))
    if s.n == 3:
        reports.append(three_beam_expanded(s))
    return reports


@dataclass
class AuditSummary:
    n: int
    trials: int
    min_slack: float
    max_violation: float
    saturations: dict[str, int]
    checks_run: int

    @property
    def ok(self) -> bool:
        return self.max_violation <= SATURATION_TOL


def audit_random(n: int, trials: int, rng: numerics.Rng) -> AuditSummary:
    """Run every applicable check on random pure and full-rank mixed states.

    Each trial draws one pure and one mixed state from a child stream, so
    trials are independent and could run concurrently.
    """
    if trials < 1:
        raise OutOfRange("trials must be >= 1")
    min_slack = np.inf
    saturations: dict[str, int] = {}
    checks = 0
    for t in range(trials):
        child = rng.derive(t)
        for rank in (1, n):
            state = BeamState(numerics.random_density(n, rank, child))
            for rep in all_checks(state):
                checks += 1
                min_slack = min(min_slack, rep.slack)
                if rep.saturated:
                    key = f"{rep.name}:{'pure' if rank == 1 else 'mixed'}"
                    saturations[key] = saturations.get(key, 0) + 1
    return AuditSummary(
        n=n,
        trials=trials,
        min_slack=float(min_slack),
        max_violation=max(0.0, -float(min_slack)),
        saturations=saturations,
        checks_run=checks,
    )
