"""
Cascaded channel realizations.

Two generators produce the per-user quantities the SINR needs,
``|r_k|^2`` (desired cascaded power) and ``|sum_{i != k} r_i|^2``
(subsurface interference), both including the path gain ``L_k``:

* :func:`draw` samples the i.i.d. Rayleigh model directly from amplitude
  statistics.  Given the BS-side amplitudes, the interference seen by user
  k is exactly ``CN(0, L_k * sum |h_n|^2)`` over the other subsurfaces'
  elements, because the user-side coefficients are independent of the
  phase design of the subsurface that owns the element.  This needs two
  exponentials per element instead of one complex draw per element per
  user.
* :func:`draw_elements` builds the complex per-element channels, applies
  the per-subsurface phase alignment and cascades them explicitly.  It
  handles spatial correlation (:func:`draw_correlated`) and can keep the
  raw per-element arrays for debugging.

Elements of a surface part are laid out in contiguous blocks, one per user
in SIC order, row-major on the part's grid.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .model import CorrelationSpec, Partition, Scenario, Side, path_gains
from .specfun import as_generator, sample_von_mises

__all__ = [
    "ChannelDraw",
    "draw",
    "draw_elements",
    "draw_correlated",
    "correlation_matrix",
    "dump_raw_csv",
    "RAW_CSV_COLUMNS",
]

RAW_CSV_COLUMNS = (
    "trial", "side", "element", "owner", "user",
    "h_re", "h_im", "g_re", "g_im", "theta", "cascade_re", "cascade_im",
)


@dataclass
class ChannelDraw:
    """Per-trial, per-user cascaded powers.

    Attributes
    ----------
    desired : ndarray, shape (trials, K)
        ``|r^k_{chi,k}|^2`` including ``L_k``.
    interference : ndarray, shape (trials, K)
        ``|sum_{i != k} r^i_{chi,k}|^2`` including ``L_k``.
    raw : dict or None
        Per-side element arrays (only from :func:`draw_elements` with
        ``raw=True``).
    """

    desired: np.ndarray
    interference: np.ndarray
    raw: Optional[dict] = None

    @property
    def trials(self) -> int:
        return self.desired.shape[0]


def _resolve_kappa(scenario: Scenario, kappa):
    if kappa is None:
        kappa = scenario.phase_error_kappa
    if kappa is not None and np.isinf(kappa):
        return None
    return kappa


def _phase_sum(rng, amp, kappa):
    """``|sum_n amp_n e^{j delta_n}|^2`` along the last axis."""
    if kappa is None:
        return amp.sum(axis=-1) ** 2
    delta = sample_von_mises(rng, kappa, amp.shape)
    return (amp * np.cos(delta)).sum(axis=-1) ** 2 + (amp * np.sin(delta)).sum(axis=-1) ** 2


def draw(stream, scenario: Scenario, partition: Partition, trials: int = 1,
         kappa=None) -> ChannelDraw:
    """I.i.d. Rayleigh realizations under per-subsurface phase alignment.

    ``kappa`` overrides ``scenario.phase_error_kappa``; ``None``/``inf`` mean
    perfect alignment.  Phase errors only matter on the desired subsurface:
    at any other user an element contributes with a uniform phase either way.
    """
    partition.check(scenario)
    rng = as_generator(stream)
    kappa = _resolve_kappa(scenario, kappa)
    gains = path_gains(scenario)
    K = scenario.K
    desired = np.empty((trials, K))
    sub_power = np.empty((trials, K))  # sum |h_n|^2 over each user's subsurface
    for k, n_k in enumerate(partition.counts):
        e_bs = rng.standard_exponential((trials, n_k))
        e_su = rng.standard_exponential((trials, n_k))
        desired[:, k] = _phase_sum(rng, np.sqrt(e_bs * e_su), kappa)
        sub_power[:, k] = e_bs.sum(axis=1)
    desired *= gains
    unit = rng.standard_exponential((trials, K))  # |CN(0,1)|^2 per user
    interference = np.zeros((trials, K))
    for side in (Side.TRANSMISSION, Side.REFLECTION):
        members = scenario.users_on(side)
        side_power = sub_power[:, members].sum(axis=1)
        for k in members:
            if len(members) > 1:
                interference[:, k] = gains[k] * (side_power - sub_power[:, k]) * unit[:, k]
    return ChannelDraw(desired, interference)


# ---------------------------------------------------------------------------
# Spatial correlation
# ---------------------------------------------------------------------------
def element_positions(spec: CorrelationSpec, count: int) -> np.ndarray:
    rows, cols = spec.grid_for(count)
    idx = np.arange(count)
    return np.stack([idx // cols, idx % cols], axis=1) * spec.element_spacing


@functools.lru_cache(maxsize=64)
def correlation_matrix(spec: CorrelationSpec, count: int) -> np.ndarray:
    """Sinc correlation ``sinc(2 ||u_n - u_m|| / lambda)`` on the element grid.

    Returns a symmetric, unit-diagonal matrix whose negative eigenvalues
    (from rounding) are floored at zero.
    """
    if count < 1:
        raise ConfigError("correlation matrix needs at least one element")
    pos = element_positions(spec, count)
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    R = np.sinc(2.0 * dist / spec.wavelength)
    w, V = np.linalg.eigh(R)
    if w.min() < -1e-12:
        w = np.maximum(w, 0.0)
        R = (V * w) @ V.T
        d = np.sqrt(np.diag(R))
        R = R / np.outer(d, d)
    R.setflags(write=False)
    return R


@functools.lru_cache(maxsize=64)
def _sqrt_factor(spec: CorrelationSpec, count: int) -> np.ndarray:
    R = correlation_matrix(spec, count)
    w, V = np.linalg.eigh(R)
    if not np.all(np.isfinite(w)):
        raise np.linalg.LinAlgError("eigendecomposition of the correlation matrix failed")
    S = (V * np.sqrt(np.maximum(w, 0.0))) @ V.T
    S.setflags(write=False)
    return S


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


def draw_elements(stream, scenario: Scenario, partition: Partition, trials: int = 1,
                  kappa=None, correlation: Optional[CorrelationSpec] = None,
                  raw: bool = False) -> ChannelDraw:
    """Element-level realization with explicit phase design.

    Each element's phase cancels the BS-element-owner channel phase (plus a
    von Mises error when ``kappa`` is set).  With ``correlation`` the
    BS-side and user-side vectors of each surface part are coloured by the
    symmetric square root of the sinc correlation matrix, independently.
    """
    partition.check(scenario)
    rng = as_generator(stream)
    kappa = _resolve_kappa(scenario, kappa)
    gains = path_gains(scenario)
    K = scenario.K
    desired = np.zeros((trials, K))
    interference = np.zeros((trials, K))
    raw_out = {} if raw else None
    for side in (Side.TRANSMISSION, Side.REFLECTION):
        members = scenario.users_on(side)
        counts = [partition.counts[k] for k in members]
        n_side = sum(counts)
        owner = np.repeat(np.arange(len(members)), counts)
        h = _cn(rng, (trials, n_side))
        g = _cn(rng, (trials, len(members), n_side))
        if correlation is not None:
            S = _sqrt_factor(correlation, n_side)
            h = h @ S.T
            g = g @ S.T
        g_owner = g[:, owner, np.arange(n_side)]
        theta = -np.angle(h) - np.angle(g_owner)
        if kappa is not None:
            theta = theta + sample_von_mises(rng, kappa, (trials, n_side))
        cascade = g * (h * np.exp(1j * theta))[:, None, :]
        for m, k in enumerate(members):
            mine = owner == m
            desired[:, k] = gains[k] * np.abs(cascade[:, m, mine].sum(axis=1)) ** 2
            interference[:, k] = gains[k] * np.abs(cascade[:, m, ~mine].sum(axis=1)) ** 2
        if raw:
            raw_out[side.value] = dict(members=members, owner=owner, h=h, g=g,
                                       theta=theta, cascade=cascade)
    return ChannelDraw(desired, interference, raw_out)


def draw_correlated(stream, scenario: Scenario, partition: Partition, spec: CorrelationSpec,
                    trials: int = 1, kappa=None) -> ChannelDraw:
    """Spatially correlated realization; see :func:`draw_elements`."""
    if spec is None:
        raise ConfigError("draw_correlated needs a CorrelationSpec")
    return draw_elements(stream, scenario, partition, trials, kappa=kappa, correlation=spec)


def dump_raw_csv(channel: ChannelDraw, path) -> None:
    """Write per-element channels; one row per (trial, element, user).

    Columns, in order: ``trial, side, element, owner, user, h_re, h_im,
    g_re, g_im, theta, cascade_re, cascade_im``.  ``owner`` and ``user`` are
    global 1-based user numbers; ``cascade = g * exp(1j*theta) * h`` without
    the path gain.
    """
    if channel.raw is None:
        raise ValueError("draw was generated without raw=True")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RAW_CSV_COLUMNS)
        for side, arrays in channel.raw.items():
            members = arrays["members"]
            owner = arrays["owner"]
            h, g, theta, cascade = arrays["h"], arrays["g"], arrays["theta"], arrays["cascade"]
            for t in range(h.shape[0]):
                for n in range(h.shape[1]):
                    for m, k in enumerate(members):
                        values = (h[t, n].real, h[t, n].imag, g[t, m, n].real,
                                  g[t, m, n].imag, theta[t, n],
                                  cascade[t, m, n].real, cascade[t, m, n].imag)
                        writer.writerow([t, side, n, members[owner[n]] + 1, k + 1]
                                        + [repr(float(v)) for v in values])
