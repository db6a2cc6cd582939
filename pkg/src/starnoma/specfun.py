"""
Special functions and random samplers.

The distribution functions here are what the closed-form outage
expressions are built from: the generalized Marcum Q-function, the CDF of
a one-degree-of-freedom noncentral chi-square variable, and the CDF of the
difference between such a variable and an independent exponential
(two-degree-of-freedom central chi-square) variable.

Random numbers come from a counter-based generator (Philox) keyed by a
``(seed, stream_id)`` pair, so any block of trials can be regenerated
without replaying the ones before it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "RandomStream",
    "marcum_q",
    "noncentral_chi2_cdf_1dof",
    "chi2_diff_cdf",
    "sample_von_mises",
    "sample_rayleigh_pair",
]

_MASK64 = (1 << 64) - 1

# Poisson weights outside mean +/- _POIS_SPREAD std carry < 1e-30 of the mass.
_POIS_SPREAD = 14.0
_POIS_PAD = 40

# Above this concentration the Best-Fisher envelope loses precision; the
# wrapped normal N(0, 1/kappa) differs from von Mises by O(1/kappa^2) there.
_VM_GAUSS_KAPPA = 1e6


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class RandomStream:
    """A reproducible, independently keyed source of random numbers.

    Parameters
    ----------
    seed : int
        Experiment seed (64 bit).
    stream_id : int
        Sub-stream index (64 bit), e.g. a trial block number.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 0 or value > _MASK64:
                raise ValueError(f"{name} must be an integer in [0, 2**64), got {value!r}")

    @property
    def key(self) -> int:
        return int(self.seed) | (int(self.stream_id) << 64)

    def generator(self) -> np.random.Generator:
        """Return a fresh generator positioned at the start of this stream."""
        return np.random.Generator(np.random.Philox(key=self.key))

    def substream(self, index: int) -> "RandomStream":
        """Derive a stream for a sub-task; ``index`` occupies the high 24 bits."""
        if not 0 <= index < (1 << 24):
            raise ValueError("substream index must fit in 24 bits")
        if self.stream_id >> 40:
            raise ValueError("stream_id already uses the high bits")
        return RandomStream(self.seed, self.stream_id | (index << 40))


def as_generator(stream) -> np.random.Generator:
    """Accept a :class:`RandomStream` or an existing numpy ``Generator``."""
    if isinstance(stream, RandomStream):
        return stream.generator()
    if isinstance(stream, np.random.Generator):
        return stream
    raise TypeError(f"expected RandomStream or numpy Generator, got {type(stream).__name__}")


# ---------------------------------------------------------------------------
# Marcum Q and chi-square CDFs
# ---------------------------------------------------------------------------
def _check_order(m) -> float:
    twice = 2.0 * float(m)
    if not math.isfinite(twice) or twice < 1 or twice != round(twice):
        raise ValueError(f"Marcum-Q order must be a half-integer >= 1/2, got {m!r}")
    return float(m)


def _q_half(a, b):
    # Q_{1/2}(a, b) = P(|a + Z| > b) for standard normal Z.
    return special.ndtr(a - b) + special.ndtr(-a - b)


def _q_half_complement(a, b):
    return special.ndtr(b - a) - special.ndtr(-b - a)


def _log_q_half(a, b):
    return np.logaddexp(special.log_ndtr(a - b), special.log_ndtr(-a - b))


def _marcum_q_series(m: float, a: float, b: float) -> float:
    """Poisson mixture of regularized upper incomplete gamma functions.

    Q_m(a, b) = sum_k Pois(k; a^2/2) * Gamma(m + k, b^2/2) / Gamma(m + k)
    """
    lam = 0.5 * a * a
    x = 0.5 * b * b
    if lam == 0.0:
        return float(special.gammaincc(m, x))
    spread = _POIS_SPREAD * math.sqrt(lam)
    k_lo = max(0, int(math.floor(lam - spread)) - _POIS_PAD)
    k_hi = int(math.ceil(lam + spread)) + _POIS_PAD
    k = np.arange(k_lo, k_hi + 1, dtype=float)
    log_w = k * math.log(lam) - lam - special.gammaln(k + 1.0)
    w = np.exp(log_w)
    # Sum the smaller tail and complement when that is more accurate.
    upper = special.gammaincc(m + k, x)
    if np.dot(w, upper) > 0.5:
        return float(1.0 - np.dot(w, special.gammainc(m + k, x)))
    return float(np.dot(w, upper))


def marcum_q(m, a, b):
    """Generalized Marcum Q-function ``Q_m(a, b)`` for half-integer order.

    Parameters
    ----------
    m : float
        Order, one of 1/2, 1, 3/2, ...
    a, b : float or array_like
        Nonnegative noncentrality and threshold arguments (broadcast).

    Returns
    -------
    float or ndarray
        Values in [0, 1], absolute error below 1e-10.

    Notes
    -----
    Order 1/2 has the closed form ``Phi(a - b) + Phi(-a - b)``; other orders
    are summed as a Poisson mixture of incomplete gamma tails.
    """
    m = _check_order(m)
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if np.any(~np.isfinite(a_arr)) or np.any(~np.isfinite(b_arr)):
        raise ValueError("Marcum-Q arguments must be finite")
    if np.any(a_arr < 0) or np.any(b_arr < 0):
        raise ValueError("Marcum-Q arguments must be nonnegative")
    if m == 0.5:
        out = np.clip(_q_half(a_arr, b_arr), 0.0, 1.0)
    else:
        a_b, b_b = np.broadcast_arrays(a_arr, b_arr)
        out = np.empty(a_b.shape)
        for idx in np.ndindex(a_b.shape):
            out[idx] = _marcum_q_series(m, float(a_b[idx]), float(b_b[idx]))
        out = np.clip(out, 0.0, 1.0)
    return out[()] if out.ndim == 0 else out


def noncentral_chi2_cdf_1dof(x, mu, nu):
    """CDF of ``(mu + nu*Z)**2`` with ``Z`` standard normal.

    Equals ``1 - Q_{1/2}(|mu|/nu, sqrt(x)/nu)``.
    """
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    if np.any(nu <= 0):
        raise ValueError("nu must be positive")
    out = np.clip(_q_half_complement(np.abs(mu) / nu, np.sqrt(x) / nu), 0.0, 1.0)
    return out[()] if out.ndim == 0 else out


def chi2_diff_cdf(x, mu, nu, u):
    """CDF of ``R = A**2 - B`` at ``x``.

    ``A ~ Normal(mu, nu**2)`` and, independently, ``B = u**2 * (Z1**2 + Z2**2)``
    (an exponential variable with mean ``2 u**2``).  Three terms::

        F(x) = 1 - Q_{1/2}(mu/nu, sqrt(x)/nu)
               + w * exp(x / (2u^2)) * exp(-mu^2 / (2(nu^2 + u^2)))
                   * Q_{1/2}(w mu/nu, sqrt(x (nu^2+u^2)) / (nu u))

    with ``w = sqrt(u^2 / (nu^2 + u^2))``.  The exponential factors are
    combined in log space so large ``x/u^2`` does not overflow.  For
    ``x < 0`` the first term vanishes and the last Q-factor is one.
    ``u = 0`` reduces to :func:`noncentral_chi2_cdf_1dof`.
    """
    x, mu, nu, u = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, mu, nu, u)))
    if np.any(nu <= 0):
        raise ValueError("nu must be positive")
    if np.any(u < 0):
        raise ValueError("u must be nonnegative")
    mu = np.abs(mu)
    xp = np.maximum(x, 0.0)
    first = _q_half_complement(mu / nu, np.sqrt(xp) / nu)

    has_u = u > 0
    us = np.where(has_u, u, 1.0)
    tot = nu * nu + us * us
    w = us / np.sqrt(tot)
    a2 = w * mu / nu
    b2 = np.sqrt(xp * tot) / (nu * us)
    log_second = np.log(w) + x / (2.0 * us * us) - mu * mu / (2.0 * tot) + _log_q_half(a2, b2)
    second = np.where(has_u, np.exp(np.minimum(log_second, 0.0)), 0.0)

    out = np.clip(first + second, 0.0, 1.0)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------
def sample_von_mises(stream, kappa: float, size=None):
    """Draw von Mises angles with mean direction 0 and concentration ``kappa``.

    Uses the Best-Fisher (1979) wrapped-Cauchy rejection scheme.  ``kappa=0``
    gives uniform angles and ``kappa=inf`` gives exact zeros.  Samples lie
    in [-pi, pi).
    """
    kappa = float(kappa)
    if math.isnan(kappa) or kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa!r}")
    rng = as_generator(stream)
    shape = () if size is None else size
    n = int(np.prod(shape, dtype=np.int64))

    if math.isinf(kappa):
        out = np.zeros(n)
    elif kappa == 0.0:
        out = rng.uniform(-np.pi, np.pi, n)
    elif kappa > _VM_GAUSS_KAPPA:
        out = rng.standard_normal(n) / math.sqrt(kappa)
    else:
        tau = 1.0 + math.sqrt(1.0 + 4.0 * kappa * kappa)
        rho = (tau - math.sqrt(2.0 * tau)) / (2.0 * kappa)
        r = (1.0 + rho * rho) / (2.0 * rho)
        out = np.empty(n)
        filled = 0
        while filled < n:
            need = n - filled
            batch = need + need // 2 + 16
            u1, u2, u3 = rng.random((3, batch))
            z = np.cos(np.pi * u1)
            f = (1.0 + r * z) / (r + z)
            c = kappa * (r - f)
            with np.errstate(divide="ignore"):
                accept = (c * (2.0 - c) - u2 > 0) | (np.log(c / u2) + 1.0 - c >= 0)
            theta = np.sign(u3 - 0.5) * np.arccos(np.clip(f, -1.0, 1.0))
            theta = theta[accept][:need]
            out[filled:filled + theta.size] = theta
            filled += theta.size
    out = np.where(out >= np.pi, out - 2.0 * np.pi, out)
    return out.reshape(shape) if size is not None else float(out[0])


def sample_rayleigh_pair(stream, size=None):
    """Unit-power Rayleigh amplitude and uniform phase on [0, 2*pi).

    The amplitude has ``E[A] = sqrt(pi)/2`` and ``E[A**2] = 1``; together the
    pair describes a ``CN(0, 1)`` coefficient ``A * exp(1j * phase)``.
    """
    rng = as_generator(stream)
    amp = np.sqrt(rng.standard_exponential(size))
    phase = rng.uniform(0.0, 2.0 * np.pi, size)
    return amp, phase
