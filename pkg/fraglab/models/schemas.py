import math
from pydantic import BaseModel, Field, field_validator, model_validator
from typing import Optional, List, Dict, Any, Tuple
from datetime import datetime
from enum import Enum


class ModelKind(str, Enum):
    LGT = "lgt"
    RYD = "ryd"
    PXQ = "pxq"
    EFF2 = "eff2"
    DISORDERED = "disordered"


class EvolutionMethod(str, Enum):
    AUTO = "auto"
    DENSE = "dense"
    KRYLOV = "krylov"


class LadderScale(str, Enum):
    V0 = "v0"
    V1 = "v1"


class EnsembleSeeding(str, Enum):
    REPRESENTATIVE = "representative"  # one product state per fragment
    FRAGMENT = "fragment"  # every fragment member, equal shot quota


class ScalingKind(str, Enum):
    BULK = "bulk"
    BOUNDARY = "boundary"
    CENTER = "center"


class ClusterKind(str, Enum):
    CHARGED = "charged"
    NEUTRAL = "neutral"


class BondDirection(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class DistributionPart(str, Enum):
    ALL = "all"
    BULK = "bulk"
    RIGHTMOST = "rightmost"


class Sublattice(str, Enum):
    INTEGER = "integer"
    HALF_INTEGER = "half_integer"


# Chain and physical parameter schemas
class ChainSpec(BaseModel):
    n_atoms: int = Field(16, ge=1, le=60)

    class Config:
        frozen = True

    @property
    def n_padded(self) -> int:
        return self.n_atoms + 4

    @property
    def n_sites(self) -> int:
        return self.n_padded - 1

    @property
    def physical_positions(self) -> range:
        return range(3, self.n_atoms + 3)


class RydbergParams(BaseModel):
    """Angular frequencies in rad/us, lengths in um"""

    omega: float = Field(2 * math.pi * 1.39, ge=0)
    spacing: float = Field(3.37, gt=0)
    c6: float = Field(2 * math.pi * 9.2 * (2 * 3.37) ** 6, gt=0)
    delta: Optional[float] = None

    class Config:
        frozen = True

    @property
    def v(self) -> Tuple[float, float, float, float]:
        """Interactions at separations a, 2a, 3a, 4a"""
        return tuple(self.c6 / ((j + 1) * self.spacing) ** 6 for j in range(4))

    @property
    def detuning(self) -> float:
        return self.v[1] if self.delta is None else self.delta

    def coupling_at(self, separation: float) -> float:
        return self.c6 / separation ** 6

    def v1_spread(self, sigma_r: float) -> float:
        """Linearized spread of V1 for a position jitter sigma_r"""
        return 6 * self.v[1] * sigma_r / (2 * self.spacing)


class SpamModel(BaseModel):
    eps_g: float = Field(0.01, ge=0, le=1, description="P(read r | prepared g)")
    eps_r: float = Field(0.05, ge=0, le=1, description="P(read g | prepared r)")
    prep_flip: float = Field(0.0, ge=0, le=1, description="Per-atom preparation flip probability")

    class Config:
        frozen = True


class TemporalWindow(BaseModel):
    omega_t_start: float = Field(0.56, ge=0)
    omega_t_stop: float = Field(5.6, ge=0)
    n_steps: int = Field(19, ge=1)

    class Config:
        frozen = True

    @model_validator(mode="after")
    def check_order(self) -> "TemporalWindow":
        if self.omega_t_stop < self.omega_t_start:
            raise ValueError("window stop precedes start")
        return self

    def omega_times(self) -> List[float]:
        if self.n_steps == 1:
            return [self.omega_t_start]
        span = self.omega_t_stop - self.omega_t_start
        return [self.omega_t_start + span * i / (self.n_steps - 1) for i in range(self.n_steps)]

    def times_us(self, omega: float) -> List[float]:
        return [value / omega for value in self.omega_times()]


class PostselectionSpec(BaseModel):
    blockade: bool = True
    n_c: Optional[int] = Field(None, ge=1)

    @classmethod
    def parse(cls, text: str) -> "PostselectionSpec":
        """Parse 'blockade', 'blockade,nc=5', 'nc=5' or 'none'"""
        blockade, n_c = False, None
        for token in filter(None, (part.strip().lower() for part in text.split(","))):
            if token == "blockade":
                blockade = True
            elif token.startswith("nc="):
                n_c = int(token[3:])
            elif token != "none":
                raise ValueError(f"unknown post-selection token '{token}'")
        return cls(blockade=blockade, n_c=n_c)


class DisorderSpec(BaseModel):
    sigma_r: float = Field(0.083, ge=0)
    realizations: int = Field(10, ge=1)


# Lattice gauge theory records
class Cluster(BaseModel):
    k: int
    left: int
    right: int
    kind: ClusterKind
    charge: int = 0

    class Config:
        frozen = True

    @property
    def length(self) -> int:
        return self.right - self.left + 1

    @property
    def doubled_center(self) -> int:
        return self.left + self.right


class VacuumRun(BaseModel):
    start: int
    length: int

    class Config:
        frozen = True


class ClusterDecomposition(BaseModel):
    n_sites: int
    clusters: List[Cluster]
    vacuum_runs: List[VacuumRun] = []

    class Config:
        frozen = True

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)


class SliomPattern(BaseModel):
    q: Tuple[int, ...]

    class Config:
        frozen = True

    @property
    def k_max(self) -> int:
        return len(self.q)

    @property
    def nonzero(self) -> Tuple[int, ...]:
        return tuple(value for value in self.q if value != 0)

    @property
    def n_c(self) -> int:
        return len(self.nonzero)

    @property
    def n_q(self) -> int:
        return sum(1 for value in self.q if value == 1)

    @property
    def n_0(self) -> int:
        return sum(1 for value in self.q if value == -1)

    @property
    def label(self) -> str:
        return " ".join("c" if value == 1 else "n" for value in self.nonzero)

    def braces(self) -> str:
        return "{" + ",".join(str(value) for value in self.q) + "}"


class ElectricStringConfig(BaseModel):
    directions: Tuple[BondDirection, ...]

    class Config:
        frozen = True

    @property
    def spins(self) -> Tuple[float, ...]:
        """S^z per bond, +1/2 for a left-pointing string"""
        return tuple(0.5 if d == BondDirection.LEFT else -0.5 for d in self.directions)

    def arrows(self) -> str:
        return "".join("<" if d == BondDirection.LEFT else ">" for d in self.directions)


# Fragment census schemas
class SplitEntry(BaseModel):
    n_q: int
    n_0: int
    k: int
    dimension: int
    patterns: int


class LargestSector(BaseModel):
    n_atoms: int
    n_c: int
    dimension: int
    estimate: int


class SectorCensus(BaseModel):
    n_atoms: int
    splits: List[SplitEntry]
    n_krylov: int
    d_total: int
    d_max: int
    frozen_count: int
    frozen_fraction: float
    sector_dimensions: Dict[int, int]
    sector_fragments: Dict[int, int]
    largest_sector: LargestSector
    strong_ratio: float = Field(description="d_max / d_total")


# Width and scaling schemas
class SublatticeFit(BaseModel):
    sublattice: Sublattice
    method: str
    amplitude: float
    center: float
    sigma0: float
    fwhm: float
    weight: float
    points: int


class WidthFit(BaseModel):
    fwhm: float
    residual: float
    degenerate: bool = False
    sublattices: List[SublatticeFit] = []


class ScalingPoint(BaseModel):
    n_atoms: int
    width: float
    width_over_n: float
    n_c: Optional[int] = None


class ScalingResult(BaseModel):
    which: ScalingKind
    points: List[ScalingPoint]
    alpha: float
    stderr: float
    intercept: float


class CollapseCurve(BaseModel):
    n_atoms: int
    n_c: int
    sublattice: Sublattice
    positions: List[float]
    heights: List[float]


class CollapseResult(BaseModel):
    n_atoms_list: List[int]
    curves: List[CollapseCurve]
    metric: Dict[str, float]


class PeakRatioResult(BaseModel):
    n_atoms: int
    n_c: int
    ratio: float
    golden_ratio: float
    deviation: float


# Sampling schemas
class PostselectionReport(BaseModel):
    total: int
    kept: int
    dropped_blockade: int = 0
    dropped_nc_below: int = 0
    dropped_nc_above: int = 0

    @property
    def acceptance(self) -> float:
        return self.kept / self.total if self.total else 0.0


# Run schemas
class RunConfig(BaseModel):
    chain: ChainSpec = ChainSpec()
    model: ModelKind = ModelKind.LGT
    params: RydbergParams = RydbergParams()
    max_range: int = Field(2, ge=1, le=3)
    full_space: bool = False
    method: EvolutionMethod = EvolutionMethod.AUTO
    initial_states: List[str] = []
    t_max_us: float = Field(2.0, ge=0)
    n_steps: int = Field(101, ge=1)
    window: TemporalWindow = TemporalWindow()
    trapezoid: bool = False
    shots: int = Field(3800, ge=1)
    seed: Optional[int] = None
    spam_enabled: bool = False
    spam: SpamModel = SpamModel()
    postselect: PostselectionSpec = PostselectionSpec()
    sector: Optional[int] = Field(None, ge=1)
    require_complete: bool = True
    seeding: EnsembleSeeding = EnsembleSeeding.REPRESENTATIVE
    sweep: List[int] = []
    scaling: List[ScalingKind] = []
    collapse: bool = False
    peak_ratio_n: Optional[int] = None
    disorder: DisorderSpec = DisorderSpec()
    compare_clean: bool = False
    dump_basis: bool = False
    dump_members: bool = False
    write_snapshots: bool = False
    include_exact: bool = False
    output_dir: Optional[str] = None

    @field_validator("initial_states")
    @classmethod
    def check_symbols(cls, values: List[str]) -> List[str]:
        for value in values:
            if not value or set(value) - {"g", "r"}:
                raise ValueError(f"initial state '{value}' must be a non-empty g/r string")
        return values

    @field_validator("sweep")
    @classmethod
    def check_sweep(cls, values: List[int]) -> List[int]:
        if any(value < 1 for value in values):
            raise ValueError("sweep sizes must be positive")
        return sorted(set(values))


class RunManifest(BaseModel):
    command: str
    recipe: Optional[str] = None
    config: Dict[str, Any]
    seed: Optional[int] = None
    engine_version: str
    git_describe: str
    started_at: datetime
    wall_time_s: float
    outputs: List[str] = []


class CommandSummary(BaseModel):
    success: bool
    message: str
    data: Optional[Dict[str, Any]] = None
