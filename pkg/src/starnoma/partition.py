"""
Two-stage STAR-RIS surface partitioning.

Stage one (:func:`algorithm1_nthr`) finds the smallest per-user element
count ``N_thr`` that keeps every user's high-SNR outage floor below
``epsilon`` when the whole surface interferes.  Stage two
(:func:`algorithm2_alloc`) grows each user's subsurface, weakest user
first, until its ergodic rate at a reference power meets ``r_min``.
Leftover elements go to the strongest user.

While user k is being sized, same-side users already processed interfere
with their final counts and users not yet processed with ``N_thr`` (their
stage-one reservation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import analysis
from .errors import ConfigError, InfeasibleScenarioError, PartitionError
from .model import Partition, Scenario, feasibility_check
from .sim import MIN_TRIALS, rate_curve

DEFAULT_P_REF_DBM = 40.0
DEFAULT_EPSILON = 0.5


@dataclass(frozen=True)
class PartitionRequest:
    """Inputs of the partitioning algorithms.

    ``r_min=None`` takes each user's ``UserSpec.r_min``.
    """

    epsilon: float = DEFAULT_EPSILON
    r_min: Optional[tuple[float, ...]] = None
    p_ref_dbm: float = DEFAULT_P_REF_DBM
    realizations: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ConfigError(f"epsilon must lie in (0, 1], got {self.epsilon!r}")
        if self.r_min is not None:
            r = tuple(float(x) for x in self.r_min)
            if any(x < 0 for x in r):
                raise ConfigError("rate targets must be nonnegative")
            object.__setattr__(self, "r_min", r)
        if self.realizations < MIN_TRIALS:
            raise ConfigError(f"realizations must be >= {MIN_TRIALS}")

    def targets(self, scenario: Scenario) -> np.ndarray:
        if self.r_min is None:
            return scenario.r_min
        if len(self.r_min) != scenario.K:
            raise ConfigError(f"need {scenario.K} rate targets, got {len(self.r_min)}")
        return np.array(self.r_min)


@dataclass
class PartitionPlan:
    """A partition together with the intermediate values that produced it."""

    partition: Partition
    n_thr: int
    n_t_tmp: int
    n_r_tmp: int
    required: tuple[int, ...]          # counts before the remainder step
    rates: tuple[float, ...] = field(default=())


# ---------------------------------------------------------------------------
# Stage one
# ---------------------------------------------------------------------------
def _require_feasible(scenario: Scenario):
    report = feasibility_check(scenario)
    if not report.ok:
        raise InfeasibleScenarioError(
            "power split violates the SIC condition: "
            + "; ".join(str(v) for v in report.violations), report.violations)


def _dagger(scenario: Scenario) -> np.ndarray:
    """``varrho^dagger_k`` for every user (max over stages j <= k)."""
    sums = scenario.interference_sums()
    scaled = scenario.gamma_th / (scenario.a - scenario.gamma_th * sums)
    return np.maximum.accumulate(scaled)


def floor_at(scenario: Scenario, n_thr) -> np.ndarray:
    """Outage floor of every user with ``N_k = n_thr`` and ``N_chi = N``.

    Shape ``n_thr.shape + (K,)``; the path gain cancels out.
    """
    n = np.asarray(n_thr, dtype=float)[..., None]
    N = scenario.n_total
    dagger = _dagger(scenario)
    mu = analysis.MEAN_PRODUCT * n
    nu = np.sqrt(analysis.VAR_PRODUCT * n)
    u_tilde = np.sqrt(0.5 * dagger * (N - n))
    return analysis.asymptotic_floor(mu, nu, u_tilde)


def algorithm1_nthr(scenario: Scenario, epsilon: float) -> int:
    """Smallest ``N_thr`` with every user's floor at most ``epsilon``.

    Searches ``N_thr = 1, 2, ...`` subject to ``K * N_thr <= N``.

    Raises
    ------
    PartitionError
        If no admissible ``N_thr`` reaches ``epsilon``; ``best_op`` carries
        the lowest worst-user floor found.
    """
    _require_feasible(scenario)
    if not 0 < epsilon <= 1:
        raise ConfigError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    K, N = scenario.K, scenario.n_total
    best = math.inf
    for n_thr in range(1, N // K + 1):
        worst = float(floor_at(scenario, n_thr).max())
        best = min(best, worst)
        if worst <= epsilon:
            return n_thr
    raise PartitionError(
        f"no N_thr <= {N // K} brings every outage floor below {epsilon:g} "
        f"(best worst-user floor {best:.3g})", best_op=best)


# ---------------------------------------------------------------------------
# Stage two
# ---------------------------------------------------------------------------
def _interferers(scenario: Scenario, k: int, counts: Sequence[int], n_thr: int) -> int:
    side = scenario.users[k].side
    total = 0
    for i in scenario.users_on(side):
        if i < k:
            total += counts[i]
        elif i > k:
            total += n_thr
    return total


def _budget(scenario: Scenario, k: int, counts: Sequence[int]) -> int:
    # users k..K-1 each need at least N_k elements (ordering)
    return (scenario.n_total - sum(counts[:k])) // (scenario.K - k)


def algorithm2_alloc(scenario: Scenario, n_thr: int, request: PartitionRequest,
                     users: Optional[Sequence[int]] = None) -> list[int]:
    """Smallest rate-meeting count per user, in SIC order.

    User 1 starts from ``n_thr`` and user k from ``N_{k-1}``; each count
    is raised until ``E[log2(1 + gamma_k^k)]`` at ``request.p_ref_dbm``
    reaches the user's target (ties accepted).  ``users`` limits the
    search to a prefix of the users.

    Raises
    ------
    PartitionError
        When the element budget runs out first; ``unmet_users`` lists the
        (0-based) users left without an allocation.
    """
    return _allocate(scenario, n_thr, request, users)[0]


def _allocate(scenario, n_thr, request, users=None):
    targets = request.targets(scenario)
    K = scenario.K
    users = range(K) if users is None else users
    counts: list[int] = []
    rates: list[float] = []
    for k in users:
        start = n_thr if k == 0 else max(n_thr, counts[k - 1])
        top = _budget(scenario, k, counts)
        if top < start:
            raise PartitionError(
                f"element budget exhausted before U{k + 1}",
                unmet_users=list(range(k, K)))
        cand = np.arange(start, top + 1)
        curve = rate_curve(scenario, k, cand, _interferers(scenario, k, counts, n_thr),
                           request.p_ref_dbm, request.realizations, request.seed + k)
        ok = np.flatnonzero(curve >= targets[k])
        if ok.size == 0:
            raise PartitionError(
                f"U{k + 1} reaches only {curve[-1]:.4g} bit/s/Hz with {top} elements "
                f"(target {targets[k]:.4g})", unmet_users=list(range(k, K)))
        counts.append(int(cand[ok[0]]))
        rates.append(float(curve[ok[0]]))
    return counts, tuple(rates)


def _close_budget(scenario: Scenario, counts: list[int]) -> Partition:
    counts = list(counts)
    counts[-1] += scenario.n_total - sum(counts)
    return Partition.for_scenario(scenario, counts)


def plan_partition(scenario: Scenario, request: PartitionRequest) -> PartitionPlan:
    """Run the appropriate partitioning procedure and keep its intermediates."""
    _require_feasible(scenario)
    if scenario.is_two_user:
        return _plan_two_user(scenario, request)
    n_thr = algorithm1_nthr(scenario, request.epsilon)
    required, rates = _allocate(scenario, n_thr, request)
    part = _close_budget(scenario, required)
    return PartitionPlan(part, n_thr, scenario.k_t * n_thr, scenario.k_r * n_thr,
                         tuple(required), rates)


def two_stage_partition(scenario: Scenario, request: PartitionRequest) -> Partition:
    """Two-stage partition; two-user scenarios skip stage one."""
    return plan_partition(scenario, request).partition


def _plan_two_user(scenario: Scenario, request: PartitionRequest) -> PartitionPlan:
    if not scenario.is_two_user:
        raise ConfigError("two_user_partition needs exactly one user per side")
    (n1,), (rate1,) = _allocate(scenario, 1, request, users=[0])
    n2 = scenario.n_total - n1
    target2 = request.targets(scenario)[1]
    rate2 = float(rate_curve(scenario, 1, [n2], 0, request.p_ref_dbm,
                             request.realizations, request.seed + 1)[0])
    if rate2 < target2:
        raise PartitionError(
            f"U2 reaches only {rate2:.4g} bit/s/Hz with the remaining {n2} elements "
            f"(target {target2:.4g})", unmet_users=[1])
    part = Partition.for_scenario(scenario, [n1, n2])
    return PartitionPlan(part, 1, 1, 1, (n1, n2), (rate1, rate2))


def two_user_partition(scenario: Scenario, request: PartitionRequest) -> Partition:
    """Size U1 by its rate target starting from one element; U2 gets the rest."""
    return _plan_two_user(scenario, request).partition


def uniform_partition(scenario: Scenario) -> Partition:
    """Equal split; the remainder of ``N / K`` goes to the strongest user."""
    base = scenario.n_total // scenario.K
    counts = [base] * scenario.K
    counts[-1] += scenario.n_total - base * scenario.K
    return Partition.for_scenario(scenario, counts)


# ---------------------------------------------------------------------------
# Calibration of unstated inputs
# ---------------------------------------------------------------------------
def calibrate_request(scenario: Scenario, target: Sequence[int], p_ref_dbm: float,
                      realizations: int = 10_000, seed: int = 0) -> PartitionRequest:
    """Choose ``(epsilon, r_min)`` so the algorithms reproduce ``target``.

    ``N_thr`` is pinned to the weakest user's count: ``epsilon`` is the
    geometric midpoint of the worst-user floor at ``target[0] - 1`` and
    ``target[0]``.  Each ``r_min[k]`` is the midpoint of the user's rate
    at one element below and at its required count, where the required
    count is ``target[k]`` for k < K and the starting count for the
    strongest user (who then absorbs the remainder).
    """
    target = [int(t) for t in target]
    K = scenario.K
    if len(target) != K or sum(target) != scenario.n_total:
        raise ConfigError("target counts must cover every user and sum to N")
    if any(b < a for a, b in zip(target, target[1:])):
        raise ConfigError("target counts must be nondecreasing")
    if scenario.is_two_user:
        n_thr = 1
        epsilon = DEFAULT_EPSILON
    else:
        n_thr = target[0]
        f_hi = float(floor_at(scenario, n_thr).max())
        f_lo = float(floor_at(scenario, n_thr - 1).max()) if n_thr > 1 else 1.0
        if not f_lo > f_hi:
            raise ConfigError("outage floor is not decreasing at the target N_thr")
        epsilon = math.sqrt(f_lo * f_hi)
    if scenario.is_two_user:
        need = [target[0], target[0]]
    else:
        need = target[:-1] + [max(n_thr, target[-2])]
    r_min = []
    for k in range(K):
        n_int = 0 if scenario.is_two_user else _interferers(scenario, k, target, n_thr)
        lo, hi = rate_curve(scenario, k, [max(need[k] - 1, 1), need[k]], n_int, p_ref_dbm,
                            realizations, seed + k)
        r_min.append(float(0.5 * (lo + hi)) if need[k] > 1 else float(0.5 * hi))
    return PartitionRequest(epsilon=epsilon, r_min=tuple(r_min), p_ref_dbm=p_ref_dbm,
                            realizations=realizations, seed=seed)
