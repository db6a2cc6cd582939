"""
Closed-form outage probability of the partitioned STAR-RIS NOMA downlink.

The desired cascaded amplitude of user k is approximated (CLT over its
``N_k`` elements) by ``Normal(mu_k, nu_k^2)`` and the subsurface
interference by ``CN(0, L_k (N_chi - N_k))``.  Outage of user k is then
the event ``R_k = |r_k|^2 - rho*varrho*_k*|I_k|^2 < varrho*_k``, whose
CDF is :func:`starnoma.specfun.chi2_diff_cdf`.

All functions broadcast over the transmit power ``p_dbm``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import Partition, Scenario, check_user_order, feasibility_check, path_gain
from .specfun import chi2_diff_cdf, noncentral_chi2_cdf_1dof

MEAN_PRODUCT = np.pi / 4.0           # E[zeta * eta]
VAR_PRODUCT = 1.0 - np.pi ** 2 / 16  # Var[zeta * eta]


@dataclass(frozen=True)
class OutageParams:
    """Analytical parameters of one user at one (or many) power levels.

    ``varrho`` holds the per-stage thresholds ``varrho_j`` (j = 1..k) along
    the last axis.  ``certain_outage`` is set when the power split is
    infeasible for some stage j <= k.
    """

    mu: float
    nu: float
    u: np.ndarray
    u_tilde: float
    rho: np.ndarray
    varrho: np.ndarray
    varrho_star: np.ndarray
    varrho_dagger: float
    certain_outage: bool = False


def _stage_margins(scenario: Scenario, k: int) -> np.ndarray:
    """``a_j - gamma_th_j * sum_{l>j} a_l`` for j = 1..k."""
    sums = scenario.interference_sums()
    return scenario.a[: k + 1] - scenario.gamma_th[: k + 1] * sums[: k + 1]


def outage_params(scenario: Scenario, partition: Partition, k: int, p_dbm) -> OutageParams:
    """Compute ``mu_k, nu_k, u_k, u~_k, varrho_j, varrho*_k, varrho^dagger_k``."""
    partition.check(scenario)
    if not 0 <= k < scenario.K:
        raise ConfigError(f"user index {k} out of range")
    L = path_gain(scenario, k)
    n_k = partition.counts[k]
    n_side = partition.side_total(scenario.users[k].side)
    rho = np.asarray(scenario.snr(p_dbm), dtype=float)
    margins = _stage_margins(scenario, k)
    gth = scenario.gamma_th[: k + 1]
    certain = bool(np.any(margins <= 0))

    mu = MEAN_PRODUCT * np.sqrt(L) * n_k
    nu = np.sqrt(VAR_PRODUCT * L * n_k)
    if certain:
        inf = np.full(rho.shape, np.inf)
        return OutageParams(mu, nu, inf, np.inf, rho, np.full(rho.shape + (k + 1,), np.inf),
                            inf, np.inf, certain_outage=True)
    # rho * varrho_j = gamma_j / margin_j does not depend on rho
    scaled = gth / margins
    varrho = scaled / rho[..., None]
    varrho_star = varrho.max(axis=-1)
    varrho_dagger = float(scaled.max())
    u = np.sqrt(0.5 * rho * varrho_star * L * (n_side - n_k))
    u_tilde = float(np.sqrt(0.5 * varrho_dagger * L * (n_side - n_k)))
    return OutageParams(mu, nu, u, u_tilde, rho, varrho, varrho_star, varrho_dagger)


def _prepare(scenario, partition):
    partition.check(scenario)
    check_user_order(scenario, partition)


def op_exact(scenario: Scenario, partition: Partition, k: int, p_dbm):
    """Outage probability of user ``k`` (0-based) at transmit power ``p_dbm``.

    Evaluates ``F_R(varrho*_k)`` with the three-term difference-of-chi-square
    CDF.  Returns 1 when the power split cannot support some stage j <= k.
    """
    _prepare(scenario, partition)
    prm = outage_params(scenario, partition, k, p_dbm)
    if prm.certain_outage:
        return _like(p_dbm, 1.0)
    op = chi2_diff_cdf(prm.varrho_star, prm.mu, prm.nu, prm.u)
    return np.clip(op, 0.0, 1.0)


def op_asymptotic(scenario: Scenario, partition: Partition, k: int) -> float:
    """High-SNR outage floor of user ``k``; zero without subsurface interference."""
    _prepare(scenario, partition)
    prm = outage_params(scenario, partition, k, 0.0)
    if prm.certain_outage:
        return 1.0
    return asymptotic_floor(prm.mu, prm.nu, prm.u_tilde)


def asymptotic_floor(mu, nu, u_tilde):
    """``sqrt(u~^2/(nu^2+u~^2)) * exp(-mu^2 / (2(nu^2+u~^2)))``."""
    mu, nu, u_tilde = (np.asarray(v, dtype=float) for v in (mu, nu, u_tilde))
    tot = nu * nu + u_tilde * u_tilde
    out = np.sqrt(u_tilde * u_tilde / tot) * np.exp(-mu * mu / (2.0 * tot))
    return float(out) if out.ndim == 0 else out


def op_twouser(scenario: Scenario, partition: Partition, k: int, p_dbm):
    """Interference-free outage ``1 - Q_{1/2}(mu/nu, sqrt(varrho*)/nu)``.

    Only defined for one user on each side.
    """
    if not scenario.is_two_user:
        raise ConfigError("op_twouser needs exactly one user per side")
    _prepare(scenario, partition)
    prm = outage_params(scenario, partition, k, p_dbm)
    if prm.certain_outage:
        return _like(p_dbm, 1.0)
    return noncentral_chi2_cdf_1dof(prm.varrho_star, prm.mu, prm.nu)


def op_all(scenario: Scenario, partition: Partition, p_dbm) -> np.ndarray:
    """Exact outage of every user; shape ``p_dbm.shape + (K,)``."""
    return np.stack([op_exact(scenario, partition, k, p_dbm) for k in range(scenario.K)], axis=-1)


def floors(scenario: Scenario, partition: Partition) -> np.ndarray:
    return np.array([op_asymptotic(scenario, partition, k) for k in range(scenario.K)])


def _like(p_dbm, value):
    p = np.asarray(p_dbm, dtype=float)
    out = np.full(p.shape, value)
    return out[()] if out.ndim == 0 else out


def is_feasible(scenario: Scenario) -> bool:
    return feasibility_check(scenario).ok
