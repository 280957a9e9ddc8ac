"""Scenario configuration: the full description of one experiment.

Config files (JSON or TOML) use these exact field names, with angles in
degrees and powers in dB; conversion to radians / linear scale happens when
the harness builds its internal objects. Noise power is normalized to N0 = 1,
so per-cluster SNRs are the linear cluster powers.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

MODES = ("self_driven", "genie_aided")
TRACKERS = ("ba_ml", "sekf", "omp", "periodogram")
FT_ESTIMATORS = ("ba_ls", "joint_ls", "joint_mmse")
BEAMFORMERS = ("rd_geb", "fd_geb", "dft_bf", "mmse_bf", "fd_mmse_bf")
FULL_DIM_BEAMFORMERS = ("fd_geb", "fd_mmse_bf")

__all__ = ["ClusterConfig", "ScenarioConfig", "ConfigError", "table_iv_config"]


class ConfigError(ValueError):
    """Inconsistent scenario description, reported before any simulation starts."""


@dataclass
class ClusterConfig:
    aoa_deg: float
    velocity_deg: float = 0.0  # degrees / second
    spread_deg: float = 3.0
    snr_db: float = 10.0
    delay: int = 0
    user: int = 0


@dataclass
class ScenarioConfig:
    clusters: list[ClusterConfig] = field(default_factory=list)
    n_antennas: int = 128
    n_rfc: int = 16
    dbf_rank: int = 3
    dbf_rank_overrides: list[int] | None = None
    n_f: int = 10
    n_s: int = 990
    t_f: float = 1e-5  # seconds per FT-CPI
    p_count: int = 1000  # FT-CPIs per ST-CPI
    p_max: int = 20000  # FT-CPIs per realization
    trials: int = 50
    mode: str = "self_driven"
    tracker: str = "ba_ml"
    ft_estimator: str = "ba_ls"
    beamformer: str = "rd_geb"
    seed: int = 0
    sigma_theta_sq: float = 1.45e-4  # deg^2 per FT-CPI
    sigma_omega_sq: float = 1.46e-6  # (deg/s)^2 per FT-CPI
    ray_count: int = 100
    ray_placement: str = "grid"
    grid_resolution_deg: float = 0.1
    # desk-scale evaluation knobs
    data_subsample: int = 64  # data symbols simulated per measured FT-CPI
    metric_stride: int = 0  # 0 = auto: max(1, p_count // 10)
    baml_rank: int = 2
    sekf_rank: int = 3
    quad_nodes: int = 257
    construction_offset_deg: float = 0.0  # genie lock-in experiments
    lockin_mode: bool = False  # per-ST-CPI independent given-error trials
    sekf_init_std_deg: tuple[float, float] = (0.5, 2.0)

    def __post_init__(self) -> None:
        if isinstance(self.clusters, list):
            self.clusters = [
                c if isinstance(c, ClusterConfig) else ClusterConfig(**c)
                for c in self.clusters
            ]
        self.validate()

    # -- derived quantities -------------------------------------------------
    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def full_dimensional(self) -> bool:
        return self.beamformer in FULL_DIM_BEAMFORMERS

    def effective_rfc(self) -> int:
        """RF-chain count of the analog stage actually in effect (N when fully digital)."""
        return self.n_antennas if self.full_dimensional else self.n_rfc

    def dbf_ranks(self) -> list[int]:
        """Digital-stage output count per cluster for the configured beamformer."""
        m = self.n_clusters
        if self.beamformer == "dft_bf":
            return [self.n_rfc // m] * m
        if self.beamformer in ("mmse_bf", "fd_mmse_bf"):
            return [1] * m
        if self.dbf_rank_overrides is not None:
            return list(self.dbf_rank_overrides)
        return [self.dbf_rank] * m

    def stride(self) -> int:
        return self.metric_stride if self.metric_stride > 0 else max(1, self.p_count // 10)

    # -- validation ----------------------------------------------------------
    def validate(self) -> None:
        if not self.clusters:
            raise ConfigError("at least one cluster is required")
        m = self.n_clusters
        if self.n_rfc % m != 0:
            raise ConfigError(f"n_rfc {self.n_rfc} must be divisible by {m} clusters")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.tracker not in TRACKERS:
            raise ConfigError(f"tracker must be one of {TRACKERS}, got {self.tracker!r}")
        if self.ft_estimator not in FT_ESTIMATORS:
            raise ConfigError(
                f"ft_estimator must be one of {FT_ESTIMATORS}, got {self.ft_estimator!r}"
            )
        if self.beamformer not in BEAMFORMERS:
            raise ConfigError(
                f"beamformer must be one of {BEAMFORMERS}, got {self.beamformer!r}"
            )
        if self.p_count < 1 or self.trials < 1 or self.p_max < 1:
            raise ConfigError("p_count, p_max, and trials must all be >= 1")
        if self.n_f < 1 or self.n_s < 0:
            raise ConfigError("need n_f >= 1 and n_s >= 0")
        if self.dbf_rank_overrides is not None and len(self.dbf_rank_overrides) != m:
            raise ConfigError("dbf_rank_overrides must list one rank per cluster")
        for d in self.dbf_ranks():
            if not 1 <= d <= self.effective_rfc():
                raise ConfigError(f"digital rank {d} outside [1, {self.effective_rfc()}]")
        if self.tracker == "ba_ml":
            weakest = min(self.dbf_ranks())
            if self.baml_rank >= weakest:
                raise ConfigError(
                    f"baml_rank {self.baml_rank} must be < digital dimension {weakest}"
                )
        if self.tracker in ("omp", "periodogram") and self.full_dimensional:
            raise ConfigError(f"tracker {self.tracker!r} requires an analog DFT stage")
        for c in self.clusters:
            if not abs(c.aoa_deg) < 90.0:
                raise ConfigError(f"cluster AoA {c.aoa_deg} outside (-90, 90) degrees")
            if c.spread_deg <= 0:
                raise ConfigError("angular spread must be > 0 degrees")
            if c.delay != 0:
                raise ConfigError(
                    "simulations assume zero cluster delays; nonzero delays are "
                    "supported only by the dcc_align API"
                )
        if self.data_subsample < 1 or self.data_subsample > self.n_s > 0:
            if self.n_s > 0:
                raise ConfigError(
                    f"data_subsample must be in [1, n_s={self.n_s}], got {self.data_subsample}"
                )

    # -- serialization ---------------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d["sekf_init_std_deg"] = list(self.sekf_init_std_deg)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "sekf_init_std_deg" in data:
            data = dict(data)
            data["sekf_init_std_deg"] = tuple(data["sekf_init_std_deg"])
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScenarioConfig":
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".json":
            return cls.from_dict(json.loads(text))
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # python < 3.11
                import tomli as tomllib
            return cls.from_dict(tomllib.loads(text))
        raise ConfigError(f"config must be .json or .toml, got {path.suffix!r}")


def table_iv_config(**overrides) -> ScenarioConfig:
    """Reference four-cluster scenario: 128 antennas, 16 RF chains, near-far powers."""
    base = dict(
        clusters=[
            ClusterConfig(aoa_deg=10.0, snr_db=10.0, user=0),
            ClusterConfig(aoa_deg=20.0, snr_db=40.0, user=1),
            ClusterConfig(aoa_deg=-10.0, snr_db=30.0, user=2),
            ClusterConfig(aoa_deg=-20.0, snr_db=30.0, user=3),
        ],
    )
    base.update(overrides)
    return ScenarioConfig(**base)
