from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from s2pmlp import config

PHASES = ("preprocess", "online", "verify")


class SplitConfig(BaseModel):
    """Protocol parameters shared by both data owners"""
    rho: int = Field(default=config.DEFAULT_RHO, ge=2)
    verify_rounds: int = Field(default=config.DEFAULT_VERIFY_ROUNDS, ge=1)
    mask_scale: float = Field(default=config.DEFAULT_MASK_SCALE, gt=0)
    seed: int = Field(default=config.DEFAULT_SEED, ge=0, lt=2**64)

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {"rho": 2, "verify_rounds": 10, "mask_scale": 0.01, "seed": 7}
        },
    )


class NetProfile(BaseModel):
    """Network model used to turn traffic into simulated time"""
    name: str = "custom"
    bandwidth: float = Field(gt=0, description="bits per second")
    latency: float = Field(ge=0, description="one-way seconds")

    model_config = ConfigDict(frozen=True)


LAN = NetProfile(name="lan", bandwidth=10.1e9, latency=1e-4)
WAN = NetProfile(name="wan", bandwidth=300e6, latency=0.04)
NET_PROFILES = {"lan": LAN, "wan": WAN}


class MLPConfig(BaseModel):
    """Network shape and optimisation hyperparameters"""
    dims: List[int] = Field(min_length=2)
    batch: int = Field(default=16, ge=1)
    epochs: int = Field(default=5, ge=1)
    lr: float = Field(default=0.1, gt=0)
    shuffle: bool = False
    split: SplitConfig = Field(default_factory=SplitConfig)

    @model_validator(mode="after")
    def _check_dims(self):
        if any(width < 1 for width in self.dims):
            raise ValueError("every layer width must be >= 1")
        return self

    @property
    def layers(self) -> int:
        return len(self.dims) - 1

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {"dims": [4, 16, 3], "batch": 16, "epochs": 5, "lr": 0.1}
        },
    )


class CommMetrics(BaseModel):
    """Per-session traffic and timing counters"""
    bytes_sent: int = 0
    rounds: int = 0
    phase_times: Dict[str, float] = Field(default_factory=lambda: {p: 0.0 for p in PHASES})
    phase_rounds: Dict[str, int] = Field(default_factory=lambda: {p: 0 for p in PHASES})
    phase_bytes: Dict[str, int] = Field(default_factory=lambda: {p: 0 for p in PHASES})
    verifications: int = 0

    def delta(self, earlier: "CommMetrics") -> "CommMetrics":
        """Counters accumulated since an earlier snapshot"""
        return CommMetrics(
            bytes_sent=self.bytes_sent - earlier.bytes_sent,
            rounds=self.rounds - earlier.rounds,
            phase_times={p: self.phase_times[p] - earlier.phase_times[p] for p in PHASES},
            phase_rounds={p: self.phase_rounds[p] - earlier.phase_rounds[p] for p in PHASES},
            phase_bytes={p: self.phase_bytes[p] - earlier.phase_bytes[p] for p in PHASES},
            verifications=self.verifications - earlier.verifications,
        )


class Traffic(BaseModel):
    """Rounds and bytes of one protocol run"""
    rounds: int
    bytes: int


class VerifySummary(BaseModel):
    """Outcome of the verification phases of a run"""
    accepted: bool
    rounds: int
    checks: int
    miss_probability: float


class BenchReport(BaseModel):
    """Result of one protocol micro-benchmark"""
    protocol: str
    dims: List[int]
    rho: int
    delta: int
    seed: int
    mask_scale: float
    metrics: CommMetrics
    simulated: Dict[str, float]
    verify_share: float
    mre: float = Field(ge=0)
    nre: float = Field(ge=0)
    verify: VerifySummary
    analytic: Traffic


class ScalingReport(BaseModel):
    """Bytes against matrix area over a range of dims"""
    protocol: str
    dims: List[int]
    areas: List[int]
    bytes: List[int]
    slope: float
    intercept: float
    r_squared: float


class EpochReport(BaseModel):
    """Secure training statistics for one epoch"""
    epoch: int
    loss: float
    plain_loss: float
    divergence: float
    metrics: CommMetrics
    simulated: Dict[str, float]


class TrainReport(BaseModel):
    """End-to-end secure vs plaintext training run"""
    dataset: str
    dims: List[int]
    batch: int
    lr: float
    epochs: int
    seed: int
    train_rows: int
    test_rows: int
    secure_accuracy: float
    plain_accuracy: float
    label_agreement: float
    max_divergence: float
    history: List[EpochReport]
    model_paths: Dict[str, str]


class PredictReport(BaseModel):
    """Secure inference over a dataset; accuracy is None without labels"""
    dataset: str
    rows: int
    accuracy: Optional[float] = None
    predictions: List[str]
    metrics: CommMetrics
    simulated: Dict[str, float]


class BenchRequest(BaseModel):
    """Request model for the bench endpoint"""
    protocol: str
    dim: int = Field(default=10, ge=1, le=200)
    rho: int = Field(default=config.DEFAULT_RHO, ge=2)
    verify_rounds: int = Field(default=config.DEFAULT_VERIFY_ROUNDS, ge=1)
    seed: int = Field(default=config.DEFAULT_SEED, ge=0, lt=2**64)
    delta: int = Field(default=4, ge=0, le=300)

    model_config = ConfigDict(
        json_schema_extra={
            "example": {"protocol": "s2php", "dim": 10, "rho": 2, "verify_rounds": 10, "seed": 1, "delta": 4}
        }
    )


class SweepRequest(BaseModel):
    """Request model for the precision sweep endpoint"""
    protocol: str
    dim: int = Field(default=20, ge=1, le=200)
    deltas: List[int] = Field(default_factory=lambda: [0, 2, 4, 6, 8])
    seed: int = Field(default=config.DEFAULT_SEED, ge=0, lt=2**64)


class ProtocolInfo(BaseModel):
    """Catalogue entry for one protocol"""
    name: str
    rounds: int
    primitives: int
    miss_probability: float


class HealthResponse(BaseModel):
    """Response model for the health endpoint"""
    status: str
    components: Dict[str, Dict[str, Optional[str]]]
    latency_ms: float


class LayerPayload(BaseModel):
    """One weight-share matrix, row-major"""
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    data: List[float]

    @model_validator(mode="after")
    def _check_size(self):
        if len(self.data) != self.rows * self.cols:
            raise ValueError(f"layer data has {len(self.data)} entries, expected {self.rows * self.cols}")
        return self


class ColumnStats(BaseModel):
    """Standardisation statistics of the columns one party owns"""
    mean: List[float]
    scale: List[float]


class ModelShareFile(BaseModel):
    """On-disk model share of one party"""
    party: str
    dims: List[int] = Field(min_length=2)
    columns: Optional[ColumnStats] = None
    layers: List[LayerPayload]
