"""Request and response models of the analysis service."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field


class SystemSpec(BaseModel):
    """Either a builtin name with options or explicit polynomial tables."""

    name: str = "center"
    options: dict[str, Any] = Field(default_factory=dict)
    A: Optional[list[list[dict]]] = None
    B: Optional[list[list[dict]]] = None
    mu: float = 0.0

    def to_combination_dict(self) -> dict:
        if self.A is not None or self.B is not None:
            return {"name": self.name, "mu": self.mu,
                    "A": self.A or [[], [], [], []],
                    "B": self.B or [[], [], [], []]}
        return {"name": self.name, "options": self.options}


class PhiSpec(BaseModel):
    name: str = "psi"
    zeros: Optional[list[float]] = None
    delta: float = 0.01
    nu: float = 0.1

    def to_dict(self) -> Optional[dict]:
        if self.zeros is None and self.name == "psi":
            return None
        return {"name": self.name, "zeros": self.zeros or [],
                "delta": self.delta, "nu": self.nu}


class AnalyzeRequest(BaseModel):
    system: SystemSpec
    alpha: float = 0.0
    window: tuple[float, float] = (0.0, 2.0)


class TangencyModel(BaseModel):
    side: str
    y: float
    kind: str
    second_lie: float


class AnalyzeResponse(BaseModel):
    system: str
    alpha: float
    tangencies: list[TangencyModel]
    sliding: list[tuple[float, float]]
    sewing: list[tuple[float, float]]
    fold_fold: Optional[dict] = None


class BuildPhiRequest(BaseModel):
    k: int = 1
    zeros: Optional[list[float]] = None
    delta: float = 0.01
    nu: float = 0.1
    samples: int = 400


class BuildPhiResponse(BaseModel):
    spec: dict
    monotone: bool
    min_derivative: float
    argmin: float
    endpoint_values: list[float]
    origin: list[float]
    samples: list[list[float]]


class AssumptionsRequest(BaseModel):
    system: SystemSpec
    phi: PhiSpec = Field(default_factory=PhiSpec)


class AssumptionsResponse(BaseModel):
    A0: dict
    A1: dict
    M1: float
    M2: float
    fiber_ceiling: float
    slow_flow_at_origin: float
    hopf_at_origin: bool


class SdiRequest(BaseModel):
    system: SystemSpec
    phi: PhiSpec = Field(default_factory=PhiSpec)
    kind: Literal["terminal", "small", "dodging"] = "small"
    window: Optional[tuple[float, float]] = None
    n: int = 200


class SdiResponse(BaseModel):
    kind: str
    ys: list[float]
    columns: dict[str, list[float]]
    zeros: list[dict]
    degenerate: bool


class ZerosRequest(SdiRequest):
    pass


class ZerosResponse(BaseModel):
    kind: str
    zeros: list[dict]
    degenerate: bool


class CyclesRequest(BaseModel):
    system: SystemSpec
    phi: PhiSpec = Field(default_factory=PhiSpec)
    eps: float = 0.05
    alpha_tilde: Optional[float] = None      # None -> tune
    tune_pair: bool = True
    section_window: Optional[tuple[float, float]] = None
    scan_n: int = 40
    mode: Literal["eps-power-1", "eps-power-2"] = "eps-power-2"
    orbit_samples: int = 0


class CycleModel(BaseModel):
    y: float
    period: float
    multiplier: float
    classification: str
    residual: float


class CyclesResponse(BaseModel):
    eps: float
    alpha_tilde: float
    section_window: tuple[float, float]
    cycles: list[CycleModel]
    orbit_csv: Optional[str] = None


class SweepRequest(BaseModel):
    system: SystemSpec
    phi: PhiSpec = Field(default_factory=PhiSpec)
    eps_list: list[float]
    alpha_grid: list[float]
    section_window: tuple[float, float]
    scan_n: int = 30


class SweepResponse(BaseModel):
    eps_list: list[float]
    alpha_grid: list[float]
    counts: list[list[int]]
    csv: str


class PipelineRequest(BaseModel):
    manifest: dict


class PipelineResponse(BaseModel):
    result: dict


class ErrorBody(BaseModel):
    error_class: Literal["input", "precondition", "numerical"]
    message: str
