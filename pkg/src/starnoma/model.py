"""
Scenario data model: users, surface geometry, path loss and presets.

Everything is stored in linear units internally; decibel quantities are
only accepted at construction (``rho0_db``, ``sigma2_dbm``) and converted
through the properties below.

Scenario files are YAML documents. A document has a ``scenario`` mapping
and, optionally, a ``partition`` mapping::

    scenario:
      name: case2
      n_total: 120
      d_bs: 20.0
      alpha_bs: 2.0
      alpha_su: 2.0
      rho0_db: -30.0
      sigma2_dbm: -94.0
      alpha_direct: 3.5
      phase_error_kappa: null        # or a concentration, .inf allowed
      correlation: null              # or {element_spacing, wavelength, grid}
      users:                         # weakest -> strongest
        - {side: t, d_su: 50.0, gamma_th: 0.7, a: 0.6, r_min: 0.5, d_direct: 70.0}
        - ...
    partition:
      counts: [32, 40, 48]
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .errors import ConfigError

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_SIGMA2_DBM = -94.0
SUM_TOL = 1e-9


class Side(str, enum.Enum):
    TRANSMISSION = "t"
    REFLECTION = "r"

    def __str__(self):
        return self.value


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class UserSpec:
    side: Side
    d_su: float
    gamma_th: float
    a: float
    r_min: float = 0.0
    d_direct: Optional[float] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "side", Side(self.side))
        except ValueError:
            raise ConfigError(f"side must be 't' or 'r', got {self.side!r}") from None
        if not self.d_su > 0:
            raise ConfigError(f"d_su must be positive, got {self.d_su!r}")
        if not self.gamma_th >= 0:
            raise ConfigError(f"gamma_th must be nonnegative, got {self.gamma_th!r}")
        if not 0 < self.a < 1:
            raise ConfigError(f"power fraction a must lie in (0, 1), got {self.a!r}")
        if not self.r_min >= 0:
            raise ConfigError(f"r_min must be nonnegative, got {self.r_min!r}")
        if self.d_direct is not None and not self.d_direct > 0:
            raise ConfigError(f"d_direct must be positive, got {self.d_direct!r}")


@dataclass(frozen=True)
class CorrelationSpec:
    """Planar element grid for the sinc spatial-correlation model.

    ``grid`` is ``(rows, cols)`` per surface part; ``None`` picks the most
    square grid that holds the part's elements.
    """

    element_spacing: float
    wavelength: float
    grid: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if not self.element_spacing > 0:
            raise ConfigError("element_spacing must be positive")
        if not self.wavelength > 0:
            raise ConfigError("wavelength must be positive")
        if self.grid is not None:
            grid = tuple(int(g) for g in self.grid)
            if len(grid) != 2 or min(grid) < 1:
                raise ConfigError(f"grid must be (rows, cols) >= 1, got {self.grid!r}")
            object.__setattr__(self, "grid", grid)

    @classmethod
    def from_frequency(cls, spacing_in_wavelengths: float, freq_hz: float = 1.8e9, grid=None):
        lam = SPEED_OF_LIGHT / freq_hz
        return cls(element_spacing=spacing_in_wavelengths * lam, wavelength=lam, grid=grid)

    def grid_for(self, count: int) -> tuple[int, int]:
        if self.grid is not None:
            rows, cols = self.grid
            if rows * cols < count:
                raise ConfigError(f"grid {rows}x{cols} cannot hold {count} elements")
            return rows, cols
        rows = max(1, int(math.floor(math.sqrt(count))))
        while count % rows:
            rows -= 1
        cols = count // rows
        if cols > 4 * rows:  # near-prime counts: fall back to a padded square
            rows = int(math.ceil(math.sqrt(count)))
            cols = int(math.ceil(count / rows))
        return rows, cols


@dataclass(frozen=True)
class Scenario:
    """Full description of one STAR-RIS NOMA downlink.

    ``users`` are in the global SIC order, weakest first.
    """

    users: tuple[UserSpec, ...]
    n_total: int
    d_bs: float
    alpha_bs: float = 2.0
    alpha_su: float = 2.0
    rho0_db: float = -30.0
    sigma2_dbm: float = DEFAULT_SIGMA2_DBM
    phase_error_kappa: Optional[float] = None
    correlation: Optional[CorrelationSpec] = None
    alpha_direct: float = 3.5
    name: str = "custom"

    def __post_init__(self):
        users = tuple(u if isinstance(u, UserSpec) else UserSpec(**u) for u in self.users)
        object.__setattr__(self, "users", users)
        if len(users) < 2:
            raise ConfigError("at least two users are required")
        sides = {u.side for u in users}
        if sides != {Side.TRANSMISSION, Side.REFLECTION}:
            raise ConfigError("STAR operation needs at least one user on each side")
        a = np.array([u.a for u in users])
        if abs(a.sum() - 1.0) > SUM_TOL:
            raise ConfigError(f"power fractions must sum to 1, got {a.sum()!r}")
        if np.any(np.diff(a) > 0):
            raise ConfigError("power fractions must be nonincreasing (weakest user first)")
        if int(self.n_total) != self.n_total or self.n_total < len(users):
            raise ConfigError(f"n_total must be an integer >= K, got {self.n_total!r}")
        object.__setattr__(self, "n_total", int(self.n_total))
        if not self.d_bs > 0:
            raise ConfigError("d_bs must be positive")
        if self.phase_error_kappa is not None and not self.phase_error_kappa >= 0:
            raise ConfigError("phase_error_kappa must be nonnegative")
        if isinstance(self.correlation, dict):
            object.__setattr__(self, "correlation", CorrelationSpec(**self.correlation))

    # -- convenience views -------------------------------------------------
    @property
    def K(self) -> int:
        return len(self.users)

    @property
    def a(self) -> np.ndarray:
        return np.array([u.a for u in self.users])

    @property
    def gamma_th(self) -> np.ndarray:
        return np.array([u.gamma_th for u in self.users])

    @property
    def sides(self) -> tuple[Side, ...]:
        return tuple(u.side for u in self.users)

    @property
    def r_min(self) -> np.ndarray:
        return np.array([u.r_min for u in self.users])

    def users_on(self, side) -> list[int]:
        side = Side(side)
        return [k for k, u in enumerate(self.users) if u.side == side]

    @property
    def k_t(self) -> int:
        return len(self.users_on(Side.TRANSMISSION))

    @property
    def k_r(self) -> int:
        return len(self.users_on(Side.REFLECTION))

    @property
    def is_two_user(self) -> bool:
        return self.k_t == 1 and self.k_r == 1

    @property
    def rho0(self) -> float:
        return float(db_to_linear(self.rho0_db))

    @property
    def sigma2(self) -> float:
        """Noise power in watts."""
        return float(dbm_to_watt(self.sigma2_dbm))

    def snr(self, p_dbm):
        """Transmit SNR ``P / sigma^2`` (linear) for power(s) in dBm."""
        return dbm_to_watt(p_dbm) / self.sigma2

    def interference_sums(self) -> np.ndarray:
        """``sum_{l > j} a_l`` for every user j."""
        a = self.a
        return np.concatenate([np.cumsum(a[::-1])[::-1][1:], [0.0]])

    def direct_distance(self, k: int) -> float:
        u = self.users[k]
        return u.d_direct if u.d_direct is not None else self.d_bs + u.d_su

    def with_n(self, n_total: int) -> "Scenario":
        return replace(self, n_total=int(n_total))


@dataclass(frozen=True)
class Partition:
    """Per-user element counts, indexed like ``Scenario.users``."""

    counts: tuple[int, ...]
    sides: tuple[Side, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        sides = tuple(Side(s) for s in self.sides)
        if len(counts) != len(sides):
            raise ConfigError("counts and sides must have equal length")
        if any(c < 0 for c in counts):
            raise ConfigError("element counts must be nonnegative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "sides", sides)

    @classmethod
    def for_scenario(cls, scenario: Scenario, counts: Sequence[int]) -> "Partition":
        part = cls(tuple(counts), scenario.sides)
        part.check(scenario)
        return part

    def side_total(self, side) -> int:
        side = Side(side)
        return sum(c for c, s in zip(self.counts, self.sides) if s == side)

    @property
    def n_t(self) -> int:
        return self.side_total(Side.TRANSMISSION)

    @property
    def n_r(self) -> int:
        return self.side_total(Side.REFLECTION)

    @property
    def total(self) -> int:
        return self.n_t + self.n_r

    def side_totals_per_user(self) -> np.ndarray:
        """``N_chi`` of the side each user sits on."""
        return np.array([self.side_total(s) for s in self.sides])

    def check(self, scenario: Scenario) -> None:
        if self.sides != scenario.sides:
            raise ConfigError("partition sides do not match the scenario's users")
        if self.total > scenario.n_total:
            raise ConfigError(f"partition uses {self.total} elements but N = {scenario.n_total}")
        if any(c < 1 for c in self.counts):
            raise ConfigError("every user needs at least one element")


@dataclass(frozen=True)
class Violation:
    user: int
    a: float
    required: float  # gamma_th_j * sum_{l>j} a_l

    def __str__(self):
        return f"U{self.user + 1}: a={self.a:g} must exceed {self.required:g}"


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------
def path_gain(scenario: Scenario, k: int) -> float:
    """Cascaded path gain ``rho0^2 / (d_BS^alpha_BS * d_SU^alpha_SU)``, linear."""
    u = scenario.users[k]
    return scenario.rho0 ** 2 / (scenario.d_bs ** scenario.alpha_bs * u.d_su ** scenario.alpha_su)


def path_gains(scenario: Scenario) -> np.ndarray:
    return np.array([path_gain(scenario, k) for k in range(scenario.K)])


def direct_gain(scenario: Scenario, k: int) -> float:
    """BS-user path gain of the baseline systems, ``rho0 / d^alpha``."""
    return scenario.rho0 / scenario.direct_distance(k) ** scenario.alpha_direct


def feasibility_check(scenario: Scenario) -> FeasibilityReport:
    """Check ``a_j > gamma_th_j * sum_{l>j} a_l`` for every j < K.

    A violating user j has no finite SNR at which stage j decodes, so
    every user k >= j is in certain outage.
    """
    sums = scenario.interference_sums()
    bad = []
    for j, u in enumerate(scenario.users[:-1]):
        required = u.gamma_th * sums[j]
        if not u.a > required:
            bad.append(Violation(j, u.a, required))
    return FeasibilityReport(tuple(bad))


def check_user_order(scenario: Scenario, partition: Partition) -> None:
    """Require the mean cascaded gain ``L_k * N_k`` to be nondecreasing in k."""
    gains = path_gains(scenario) * np.asarray(partition.counts, dtype=float)
    if np.any(np.diff(gains) < -1e-12 * gains[1:]):
        raise ConfigError(
            "users are not ordered by mean cascaded gain L_k*N_k: "
            + ", ".join(f"{g:.3g}" for g in gains))


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------
# r_min defaults are chosen so the default partition request succeeds for N = 60..180.
_PRESETS = {
    1: dict(
        name="case1", n_total=64, d_bs=50.0,
        users=[
            UserSpec(Side.TRANSMISSION, 50.0, 1.0, 0.6, r_min=0.9),
            UserSpec(Side.REFLECTION, 40.0, 1.0, 0.4, r_min=2.0),
        ],
    ),
    2: dict(
        name="case2", n_total=120, d_bs=20.0,
        users=[
            UserSpec(Side.TRANSMISSION, 50.0, 0.7, 0.6, r_min=0.5),
            UserSpec(Side.TRANSMISSION, 40.0, 0.7, 0.3, r_min=0.5),
            UserSpec(Side.REFLECTION, 30.0, 0.7, 0.1, r_min=1.0),
        ],
    ),
    3: dict(
        name="case3", n_total=120, d_bs=20.0,
        users=[
            UserSpec(Side.TRANSMISSION, 50.0, 0.5, 0.6, r_min=0.5),
            UserSpec(Side.REFLECTION, 40.0, 0.5, 0.3, r_min=0.5),
            UserSpec(Side.REFLECTION, 30.0, 0.3, 0.1, r_min=0.3),
        ],
    ),
}


def preset(case_id: int, n_total: Optional[int] = None, **overrides) -> Scenario:
    """Return one of the three evaluation deployments.

    Case 1: ``(K_t, K_r) = (1, 1)``; case 2: ``(2, 1)``; case 3: ``(1, 2)``.
    ``rho0 = -30 dB`` and ``(alpha_BS, alpha_SU) = (2, 2)`` for all.
    """
    try:
        cfg = dict(_PRESETS[int(case_id)])
    except (KeyError, ValueError, TypeError):
        raise ConfigError(f"unknown preset {case_id!r}; choose 1, 2 or 3") from None
    if n_total is not None:
        cfg["n_total"] = n_total
    cfg.update(overrides)
    return Scenario(**cfg)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------
def scenario_to_dict(scenario: Scenario) -> dict:
    d = asdict(scenario)
    d["users"] = [dict(u, side=str(Side(u["side"]).value)) for u in d["users"]]
    if scenario.correlation is not None and scenario.correlation.grid is not None:
        d["correlation"]["grid"] = list(scenario.correlation.grid)
    return d


def scenario_from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ConfigError("scenario must be a mapping")
    d = dict(d)
    try:
        d["users"] = tuple(UserSpec(**u) for u in d["users"])
        if d.get("correlation") is not None:
            d["correlation"] = CorrelationSpec(**d["correlation"])
        return Scenario(**d)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"invalid scenario document: {exc}") from None


def partition_to_dict(partition: Partition) -> dict:
    return {"counts": list(partition.counts), "sides": [s.value for s in partition.sides],
            "n_t": partition.n_t, "n_r": partition.n_r}


def dump_document(scenario: Scenario, partition: Optional[Partition] = None, extra=None) -> str:
    doc = {"scenario": scenario_to_dict(scenario)}
    if partition is not None:
        doc["partition"] = partition_to_dict(partition)
    if extra:
        doc.update(extra)
    return yaml.safe_dump(doc, sort_keys=False)


def load_document(text: str) -> tuple[Scenario, Optional[Partition], dict]:
    """Parse a scenario file; returns ``(scenario, partition or None, raw)``."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse scenario file: {exc}") from None
    if not isinstance(raw, dict) or "scenario" not in raw:
        raise ConfigError("scenario file needs a top-level 'scenario' mapping")
    scenario = scenario_from_dict(raw["scenario"])
    partition = None
    if raw.get("partition") is not None:
        p = raw["partition"]
        try:
            partition = Partition.for_scenario(scenario, p["counts"])
        except (TypeError, KeyError) as exc:
            raise ConfigError(f"invalid partition section: {exc}") from None
    return scenario, partition, raw


def save_scenario(path, scenario: Scenario, partition: Optional[Partition] = None, extra=None):
    Path(path).write_text(dump_document(scenario, partition, extra))


def load_scenario(path) -> tuple[Scenario, Optional[Partition]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    scenario, partition, _ = load_document(text)
    return scenario, partition
