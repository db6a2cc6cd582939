"""
Monte Carlo engine: SIC SINR stages, outage, ergodic and sum rates, and the
classical NOMA / TDMA-OMA baselines.

Trials are processed in fixed blocks of :data:`BLOCK_TRIALS`.  Block ``b``
draws from ``RandomStream(seed, purpose | b)``, so the sample set depends
only on ``(seed, trials)``.  Blocks may run in worker processes; partial
sums are always reduced in block order, which keeps the floating-point
results bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import analysis
from .channel import draw, draw_elements
from .errors import ConfigError
from .model import (CorrelationSpec, Partition, Scenario, check_user_order, direct_gain,
                    path_gain)
from .specfun import RandomStream

BLOCK_TRIALS = 10_000
MIN_TRIALS = 1_000

# stream_id high bits, one namespace per kind of randomness
_STAR, _NOMA, _OMA, _RATE = 0, 1, 2, 3
_RATE_CHUNK = 32

SYSTEMS = ("star", "noma", "oma")


# ---------------------------------------------------------------------------
# SINR evaluation
# ---------------------------------------------------------------------------
def stage_sinr(desired, interference, scenario: Scenario, rho, j: int):
    """SINR at which each user decodes user ``j``'s signal.

    ``rho*|r|^2 a_j / (rho*|r|^2 * sum_{l>j} a_l + rho*I + 1)``; with
    ``j = K`` the intra-NOMA term vanishes.
    """
    s = scenario.interference_sums()[j]
    rd = rho * desired
    return rd * scenario.a[j] / (rd * s + rho * interference + 1.0)


def sinr_stages(channel, scenario: Scenario, p_dbm: float) -> np.ndarray:
    """All SIC stage SINRs for one transmit power.

    Returns an array of shape ``(trials, K, K)`` whose entry ``[t, k, j]`` is
    the SINR of user k decoding user j (NaN for j > k).  The diagonal is
    each user's own SINR.
    """
    rho = float(scenario.snr(p_dbm))
    K = scenario.K
    out = np.full((channel.desired.shape[0], K, K), np.nan)
    for j in range(K):
        g = stage_sinr(channel.desired, channel.interference, scenario, rho, j)
        out[:, j:, j] = g[:, j:]
    return out


def _evaluate(desired, interference, scenario: Scenario, rho_grid, strict: bool):
    """Outage counts and rate sums over a power grid for one block."""
    K = scenario.K
    gth = scenario.gamma_th
    n_p = len(rho_grid)
    outage = np.zeros((n_p, K), dtype=np.int64)
    rate_sum = np.zeros((n_p, K))
    sr_sum = np.zeros(n_p)
    sr_sq = np.zeros(n_p)
    later = np.arange(K)
    for i, rho in enumerate(rho_grid):
        failed = np.zeros(desired.shape, dtype=bool)
        own = np.empty(desired.shape)
        for j in range(K):
            g = stage_sinr(desired, interference, scenario, rho, j)
            failed |= (g < gth[j]) & (later >= j)
            own[:, j] = g[:, j]
        rates = np.log2(1.0 + own)
        if strict:
            rates = np.where(failed, 0.0, rates)
        sr = rates.sum(axis=1)
        outage[i] = failed.sum(axis=0)
        rate_sum[i] = rates.sum(axis=0)
        sr_sum[i] = sr.sum()
        sr_sq[i] = np.dot(sr, sr)
    return outage, rate_sum, sr_sum, sr_sq


def _evaluate_oma(gain, scenario: Scenario, rho_grid):
    slots = scenario.a
    target = np.log2(1.0 + scenario.gamma_th)
    n_p = len(rho_grid)
    K = scenario.K
    outage = np.zeros((n_p, K), dtype=np.int64)
    rate_sum = np.zeros((n_p, K))
    sr_sum = np.zeros(n_p)
    sr_sq = np.zeros(n_p)
    for i, rho in enumerate(rho_grid):
        rates = slots * np.log2(1.0 + rho * gain)
        sr = rates.sum(axis=1)
        outage[i] = (rates < target).sum(axis=0)
        rate_sum[i] = rates.sum(axis=0)
        sr_sum[i] = sr.sum()
        sr_sq[i] = np.dot(sr, sr)
    return outage, rate_sum, sr_sum, sr_sq


@dataclass(frozen=True)
class _Task:
    system: str
    scenario: Scenario
    partition: Optional[Partition]
    seed: int
    block: int
    trials: int
    rho_grid: tuple
    kappa: Optional[float]
    correlation: Optional[CorrelationSpec]
    elements: bool
    strict: bool


def _run_block(task: _Task):
    sc = task.scenario
    if task.system == "star":
        stream = RandomStream(task.seed, task.block).substream(_STAR)
        if task.correlation is not None or task.elements:
            ch = draw_elements(stream, sc, task.partition, task.trials, kappa=task.kappa,
                               correlation=task.correlation)
        else:
            ch = draw(stream, sc, task.partition, task.trials, kappa=task.kappa)
        return _evaluate(ch.desired, ch.interference, sc, task.rho_grid, task.strict)
    purpose = _NOMA if task.system == "noma" else _OMA
    rng = RandomStream(task.seed, task.block).substream(purpose).generator()
    gains = np.array([direct_gain(sc, k) for k in range(sc.K)])
    gain = gains * rng.standard_exponential((task.trials, sc.K))
    if task.system == "noma":
        return _evaluate(gain, np.zeros_like(gain), sc, task.rho_grid, task.strict)
    return _evaluate_oma(gain, sc, task.rho_grid)


def _blocks(trials: int):
    full, rest = divmod(trials, BLOCK_TRIALS)
    sizes = [BLOCK_TRIALS] * full + ([rest] if rest else [])
    return list(enumerate(sizes))


@dataclass
class McResult:
    """Monte Carlo estimates over a power grid.

    ``op`` and ``op_se`` have shape ``(P, K)``; ``sumrate`` and
    ``sumrate_se`` shape ``(P,)``; ``rate`` holds per-user mean rates.
    """

    system: str
    p_dbm: np.ndarray
    op: np.ndarray
    op_se: np.ndarray
    rate: np.ndarray
    sumrate: np.ndarray
    sumrate_se: np.ndarray
    trials: int
    seed: int
    outages: np.ndarray = field(repr=False, default=None)


def monte_carlo(scenario: Scenario, partition: Optional[Partition], p_dbm, trials: int,
                seed: int, *, system: str = "star", workers: int = 1, kappa=None,
                correlation: Optional[CorrelationSpec] = None, elements: bool = False,
                strict: bool = False) -> McResult:
    """Estimate outage and rates of ``system`` at every power in ``p_dbm``.

    ``system`` is ``"star"`` (the partitioned surface), ``"noma"`` or
    ``"oma"`` (direct-link baselines; ``partition`` is ignored).
    ``strict=True`` zeroes a user's rate in trials where it is in outage;
    the default keeps the rate conditional on successful SIC.
    """
    if system not in SYSTEMS:
        raise ConfigError(f"unknown system {system!r}")
    if trials < MIN_TRIALS:
        raise ConfigError(f"need at least {MIN_TRIALS} trials, got {trials}")
    if system == "star":
        partition.check(scenario)
        check_user_order(scenario, partition)
    p = np.atleast_1d(np.asarray(p_dbm, dtype=float))
    rho_grid = tuple(float(r) for r in scenario.snr(p))
    if kappa is None:
        kappa = scenario.phase_error_kappa
    tasks = [_Task(system, scenario, partition if system == "star" else None, int(seed), b, n,
                   rho_grid, kappa, correlation, elements, strict)
             for b, n in _blocks(trials)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, tasks))
    else:
        parts = [_run_block(t) for t in tasks]

    outage, rate_sum, sr_sum, sr_sq = parts[0]
    outage, rate_sum, sr_sum, sr_sq = outage.copy(), rate_sum.copy(), sr_sum.copy(), sr_sq.copy()
    for o, r, s, q in parts[1:]:
        outage += o
        rate_sum += r
        sr_sum += s
        sr_sq += q
    op = outage / trials
    sr = sr_sum / trials
    var = np.maximum(sr_sq / trials - sr * sr, 0.0)
    return McResult(
        system=system, p_dbm=p, op=op, op_se=np.sqrt(op * (1.0 - op) / trials),
        rate=rate_sum / trials, sumrate=sr, sumrate_se=np.sqrt(var / trials),
        trials=int(trials), seed=int(seed), outages=outage,
    )


def mc_outage(scenario, partition, p_dbm, trials, seed, **kw):
    """Per-user ``(op_mc, op_se)`` at a single power."""
    res = monte_carlo(scenario, partition, [p_dbm], trials, seed, **kw)
    return res.op[0], res.op_se[0]


def mc_sumrate(scenario, partition, p_dbm, trials, seed, **kw):
    """``(sum-rate, standard error)`` at a single power, bits/s/Hz."""
    res = monte_carlo(scenario, partition, [p_dbm], trials, seed, **kw)
    return float(res.sumrate[0]), float(res.sumrate_se[0])


def baseline_noma(scenario, p_dbm, trials, seed, **kw) -> McResult:
    """Classical PD-NOMA over direct Rayleigh links, same power split and SIC order."""
    return monte_carlo(scenario, None, p_dbm, trials, seed, system="noma", **kw)


def baseline_oma(scenario, p_dbm, trials, seed, **kw) -> McResult:
    """TDMA with slot fractions equal to the NOMA power fractions."""
    return monte_carlo(scenario, None, p_dbm, trials, seed, system="oma", **kw)


def noma_op_exact(scenario: Scenario, k: int, p_dbm):
    """``1 - exp(-varrho*_k / L_k)`` for the direct-link NOMA baseline."""
    sums = scenario.interference_sums()
    margins = scenario.a[: k + 1] - scenario.gamma_th[: k + 1] * sums[: k + 1]
    rho = np.asarray(scenario.snr(p_dbm), dtype=float)
    if np.any(margins <= 0):
        return np.ones_like(rho)
    varrho_star = (scenario.gamma_th[: k + 1] / margins).max() / rho
    return -np.expm1(-varrho_star / direct_gain(scenario, k))


def oma_op_exact(scenario: Scenario, k: int, p_dbm):
    """``1 - exp(-(2^(R_tgt/t_k) - 1) / (rho L_k))`` with ``R_tgt = log2(1 + gamma_th)``."""
    rho = np.asarray(scenario.snr(p_dbm), dtype=float)
    t = scenario.a[k]
    need = (1.0 + scenario.gamma_th[k]) ** (1.0 / t) - 1.0
    return -np.expm1(-need / (rho * direct_gain(scenario, k)))


# ---------------------------------------------------------------------------
# Ergodic rate
# ---------------------------------------------------------------------------
def _cum_amplitude(seed: int, k: int, realizations: int, n_max: int) -> np.ndarray:
    """Running sums of ``zeta*eta`` over elements 1..n_max, per realization.

    Columns are generated in fixed chunks with their own streams, so element
    n sees the same numbers whatever ``n_max`` is.
    """
    chunks = []
    for c in range(math.ceil(n_max / _RATE_CHUNK)):
        stream = RandomStream(seed, (k << 16) | c).substream(_RATE)
        rng = stream.generator()
        e = rng.standard_exponential((2, realizations, _RATE_CHUNK))
        chunks.append(np.sqrt(e[0] * e[1]))
    return np.cumsum(np.concatenate(chunks, axis=1)[:, :n_max], axis=1)


def _interference_draw(seed: int, k: int, realizations: int, n_interf: int) -> np.ndarray:
    if n_interf <= 0:
        return np.zeros(realizations)
    rng = RandomStream(seed, (k << 16) | 0xFFFF).substream(_RATE).generator()
    # sum |h_n|^2 over n_interf elements times |CN(0,1)|^2
    return rng.gamma(n_interf, size=realizations) * rng.standard_exponential(realizations)


def rate_curve(scenario: Scenario, k: int, counts, n_interf: int, p_dbm: float,
               realizations: int = 10_000, seed: int = 0) -> np.ndarray:
    """``E[log2(1 + gamma_k^k)]`` for each candidate element count.

    ``n_interf`` is the number of same-side elements serving other users.
    The same channel realizations are reused across ``counts`` (common
    random numbers), so the curve is nondecreasing in the count.
    """
    counts = np.atleast_1d(np.asarray(counts, dtype=int))
    if realizations < MIN_TRIALS:
        raise ConfigError(f"need at least {MIN_TRIALS} realizations")
    if np.any(counts < 1):
        raise ConfigError("element counts must be >= 1")
    L = path_gain(scenario, k)
    rho = float(scenario.snr(p_dbm))
    cum = _cum_amplitude(seed, k, realizations, int(counts.max()))
    desired = L * cum[:, counts - 1] ** 2
    interf = L * _interference_draw(seed, k, realizations, n_interf)[:, None]
    gamma = stage_sinr(desired, interf, scenario, rho, k)
    return np.log2(1.0 + gamma).mean(axis=0)


def ergodic_rate(scenario: Scenario, partition: Partition, k: int, p_dbm: float,
                 realizations: int = 10_000, seed: int = 0) -> float:
    """Ergodic rate of user ``k`` decoding its own signal under ``partition``."""
    partition.check(scenario)
    n_k = partition.counts[k]
    n_interf = partition.side_total(scenario.users[k].side) - n_k
    return float(rate_curve(scenario, k, [n_k], n_interf, p_dbm, realizations, seed)[0])


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------
@dataclass
class SweepResult:
    """Per-(P, user) outage and sum-rate table; arrays are ``(P, K)`` or ``(P,)``."""

    p_dbm: np.ndarray
    op_exact: Optional[np.ndarray]
    op_asym: Optional[np.ndarray]
    mc: Optional[McResult]
    baselines: dict
    trials: int
    seed: int

    @property
    def K(self) -> int:
        if self.op_exact is not None:
            return self.op_exact.shape[1]
        return self.mc.op.shape[1]


def sweep(scenario: Scenario, partition: Partition, p_dbm, *, mode: str = "both",
          trials: int = 100_000, seed: int = 0, baselines=(), workers: int = 1,
          kappa=None, correlation=None, strict: bool = False) -> SweepResult:
    """Analytic and/or Monte Carlo curves plus optional baselines."""
    if mode not in ("analytic", "montecarlo", "both"):
        raise ConfigError(f"unknown mode {mode!r}")
    p = np.atleast_1d(np.asarray(p_dbm, dtype=float))
    op_exact = op_asym = None
    if mode in ("analytic", "both"):
        op_exact = analysis.op_all(scenario, partition, p)
        op_asym = np.broadcast_to(analysis.floors(scenario, partition), op_exact.shape).copy()
    mc = None
    extra = {}
    if mode in ("montecarlo", "both"):
        mc = monte_carlo(scenario, partition, p, trials, seed, workers=workers, kappa=kappa,
                         correlation=correlation, strict=strict)
        for name in baselines:
            extra[name] = monte_carlo(scenario, None, p, trials, seed, system=name,
                                      workers=workers, strict=strict)
    return SweepResult(p, op_exact, op_asym, mc, extra, trials, seed)
