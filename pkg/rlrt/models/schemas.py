import math
from typing import Any, List, Literal, Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
    model_validator,
)


def dimension_for(n: int, gamma: float) -> int:
    # round half up; Python's round() would send 0.5 to the even neighbour
    return int(math.floor(gamma * n + 0.5))


class DimensionSetup(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=2)
    p: int = Field(ge=1)

    @computed_field
    @property
    def n_tilde(self) -> int:
        return self.n - 1

    @computed_field
    @property
    def gamma_tilde(self) -> float:
        return self.p / self.n_tilde

    @classmethod
    def from_gamma(cls, n: int, gamma: float) -> "DimensionSetup":
        return cls(n=n, p=dimension_for(n, gamma))


class ShrinkageParams(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lam: float = Field(alias="lambda", gt=0.0, le=1.0)

    def psi(self, x):
        return self.lam * np.asarray(x, dtype=float) + (1.0 - self.lam)

    def g(self, x):
        psi = self.psi(x)
        return psi - np.log(psi) - 1.0


class MpLaw(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma: float = Field(gt=0.0, lt=1.0)

    @computed_field
    @property
    def a(self) -> float:
        return (1.0 - math.sqrt(self.gamma)) ** 2

    @computed_field
    @property
    def b(self) -> float:
        return (1.0 + math.sqrt(self.gamma)) ** 2


class MnRoots(BaseModel):
    model_config = ConfigDict(frozen=True)

    m_root: float
    n_root: float


class Spike(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float = Field(gt=0.0)
    multiplicity: int = Field(default=1, ge=1)

    @field_validator("value")
    @classmethod
    def not_unit(cls, value: float) -> float:
        if value == 1.0:
            raise ValueError("a spike must differ from 1")
        return value

    def is_distant(self, gamma: float) -> bool:
        return abs(self.value - 1.0) > math.sqrt(gamma)


class SpikedModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    spikes: List[Spike] = Field(default_factory=list)

    @computed_field
    @property
    def k_total(self) -> int:
        return sum(spike.multiplicity for spike in self.spikes)

    def close_spikes(self, gamma: float) -> List[Spike]:
        return [s for s in self.spikes if not s.is_distant(gamma)]

    @classmethod
    def compound_symmetry(cls, beta: float) -> "SpikedModel":
        return cls(spikes=[Spike(value=1.0 + beta)])


class NullAsymptotics(BaseModel):
    model_config = ConfigDict(frozen=True)

    lam: float
    gamma: float
    mu: float
    v: float = Field(gt=0.0)
    centering: float


class DataMatrix(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def as_matrix(cls, values: Any) -> np.ndarray:
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2:
            raise ValueError("data must be a 2-d array")
        if values.shape[0] < 2:
            raise ValueError("need at least 2 observations")
        if values.shape[1] < 1:
            raise ValueError("need at least 1 variable")
        if not np.all(np.isfinite(values)):
            raise ValueError("data contains non-finite entries")
        values.setflags(write=False)
        return values

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def setup(self) -> DimensionSetup:
        return DimensionSetup(n=self.n, p=self.p)


class SampleCovariance(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: np.ndarray
    n_tilde: int


class ShrunkenCovariance(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: np.ndarray
    lam: float


MethodName = Literal["rlrt", "clrt", "lw", "chen"]


class MethodSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: MethodName
    lam: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    size_corrected: bool = False

    @model_validator(mode="after")
    def lambda_only_for_rlrt(self) -> "MethodSpec":
        if self.name == "rlrt" and self.lam is None:
            raise ValueError("rlrt needs a shrinkage intensity")
        if self.name != "rlrt" and self.lam is not None:
            raise ValueError(f"{self.name} takes no shrinkage intensity")
        return self

    @property
    def params(self) -> Optional[ShrinkageParams]:
        if self.lam is None:
            return None
        return ShrinkageParams(lam=self.lam)

    @property
    def label(self) -> str:
        base = {
            "rlrt": f"rLRT({self.lam:g})" if self.lam else "rLRT",
            "clrt": "cLRT",
            "lw": "LW",
            "chen": "Chen",
        }[self.name]
        return base + "*" if self.size_corrected else base


class TestResult(BaseModel):
    __test__ = False  # not a pytest class
    model_config = ConfigDict(frozen=True)

    method: str
    raw: float
    z: float
    p_value: float = Field(ge=0.0, le=1.0)
    reject: bool
    eta: float
    setup: DimensionSetup
    lam: Optional[float] = None


ScenarioKind = Literal["null", "a1", "a2", "a3", "a4", "cs_beta", "custom"]
A1_RULE_PATTERN = r"^(max|min|fixed:\d+)$"


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ScenarioKind
    beta: Optional[float] = None
    sigma: Optional[List[List[float]]] = None
    a1_twos_rule: str = Field(default="max", pattern=A1_RULE_PATTERN)

    @model_validator(mode="after")
    def parameters_present(self) -> "Scenario":
        if self.kind == "cs_beta" and self.beta is None:
            raise ValueError("cs_beta needs beta")
        if self.kind == "custom" and self.sigma is None:
            raise ValueError("custom needs sigma")
        return self

    @property
    def label(self) -> str:
        if self.kind == "cs_beta":
            return f"CS(beta={self.beta:g})"
        return {
            "null": "Null",
            "a1": "A1",
            "a2": "A2",
            "a3": "A3",
            "a4": "A4",
            "custom": "Custom",
        }[self.kind]


class SimulationGrid(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    scenarios: List[Scenario] = Field(min_length=1)
    sample_sizes: List[int] = Field(min_length=1)
    gammas: List[float] = Field(default_factory=list)
    dimensions: List[int] = Field(default_factory=list)
    methods: List[MethodSpec] = Field(min_length=1)
    reps: int = Field(ge=1)
    chen_reps: Optional[int] = Field(default=None, ge=1)
    master_seed: int = Field(default=0, ge=0, lt=2**64)
    eta: float = Field(default=0.05, gt=0.0, lt=1.0)
    critical_reps: int = Field(default=10_000, ge=1000)

    @field_validator("sample_sizes")
    @classmethod
    def sizes_valid(cls, sizes: List[int]) -> List[int]:
        if any(n < 2 for n in sizes):
            raise ValueError("every sample size must be at least 2")
        return sizes

    @field_validator("gammas")
    @classmethod
    def gammas_positive(cls, gammas: List[float]) -> List[float]:
        if any(g <= 0 for g in gammas):
            raise ValueError("every gamma must be positive")
        return gammas

    @field_validator("dimensions")
    @classmethod
    def dimensions_positive(cls, dimensions: List[int]) -> List[int]:
        if any(p < 1 for p in dimensions):
            raise ValueError("every dimension must be at least 1")
        return dimensions

    @model_validator(mode="after")
    def dimensions_valid(self) -> "SimulationGrid":
        if bool(self.gammas) == bool(self.dimensions):
            raise ValueError("give exactly one of gammas or dimensions")
        for n in self.sample_sizes:
            for gamma in self.gammas:
                if dimension_for(n, gamma) < 1:
                    raise ValueError(f"round(gamma*n) < 1 for n={n}, gamma={gamma}")
        return self

    def reps_for(self, method: MethodSpec) -> int:
        if method.name == "chen" and self.chen_reps is not None:
            return min(self.chen_reps, self.reps)
        return self.reps


class CellResult(BaseModel):
    scenario: str
    n: int
    p: int
    gamma: float
    method: str
    lam: Optional[float] = None
    reps: int
    rate: Optional[float] = None
    mc_se: Optional[float] = None
    seed: int
    elapsed: float = 0.0
    error: Optional[str] = None


class PowerPoint(BaseModel):
    beta: float
    analytic: Optional[float] = None
    empirical: Optional[float] = None
    mc_se: Optional[float] = None
    close_spike: bool = False


class Histogram(BaseModel):
    method: str
    scenario: str
    n: int
    p: int
    reps: int
    edges: List[float]
    density: List[float]
    mean: float
    variance: float


class Provenance(BaseModel):
    tool: str = "rlrt"
    version: str
    seed: Optional[int] = None
    config_hash: str
    timestamp: Optional[str] = None


class ResultRecord(BaseModel):
    provenance: Provenance
    rows: List[dict]


OutputFormat = Literal["csv", "json"]


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    output_format: OutputFormat = "csv"
    output: Optional[str] = None


class TestConfig(RunConfig):
    __test__ = False  # not a pytest class

    input: str
    methods: List[MethodSpec] = Field(min_length=1)
    eta: float = Field(gt=0.0, lt=1.0)
    transpose: bool = False
    exit_on_reject: bool = False


class NullParamsConfig(RunConfig):
    lam: float = Field(gt=0.0, le=1.0)
    setup: DimensionSetup


class CriticalValueConfig(RunConfig):
    method: MethodSpec
    setup: DimensionSetup
    eta: float = Field(gt=0.0, lt=1.0)
    reps: int = Field(ge=1000)
    seed: int = Field(ge=0, lt=2**64)
    scale: Literal["z", "raw"] = "z"


class SimulateConfig(RunConfig):
    grid: SimulationGrid
    emit_data: Optional[str] = None


class PowerCurveConfig(RunConfig):
    methods: List[MethodSpec] = Field(min_length=1)
    setup: DimensionSetup
    beta_grid: List[float] = Field(min_length=1)
    reps: int = Field(ge=1)
    seed: int = Field(ge=0, lt=2**64)
    eta: float = Field(gt=0.0, lt=1.0)
    allow_close_spike: bool = False

    @field_validator("beta_grid")
    @classmethod
    def strictly_increasing(cls, grid: List[float]) -> List[float]:
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("beta grid must be strictly increasing")
        if grid[0] <= -1.0:
            raise ValueError("beta must exceed -1 for a positive definite sigma")
        return grid

    @model_validator(mode="after")
    def distant_unless_allowed(self) -> "PowerCurveConfig":
        if self.allow_close_spike:
            return self
        bound = math.sqrt(self.setup.gamma_tilde)
        close = [beta for beta in self.beta_grid if abs(beta) <= bound]
        if close:
            raise ValueError(
                f"beta values {close} are not distant (|beta| <= "
                f"sqrt(gamma_tilde)={bound:.6g}); pass --allow-close-spike"
            )
        return self


class DensityConfig(RunConfig):
    method: MethodSpec
    scenario: Scenario
    setup: DimensionSetup
    reps: int = Field(ge=1)
    seed: int = Field(ge=0, lt=2**64)
    bins: int = Field(ge=1)
    scale: Literal["z", "raw"] = "raw"
