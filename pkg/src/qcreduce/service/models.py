"""Request and response bodies for the service endpoints."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class GateSetRequest(BaseModel):
    gate_set: str


class GateSetValidation(BaseModel):
    valid: bool
    token_count: int | None = None
    fingerprint: str | None = None
    message: str | None = None


class BuildDatabaseRequest(BaseModel):
    gate_set: str
    qubits: int = Field(ge=1)
    depth: int = Field(ge=1)
    out_path: str
    node_cap: int = Field(default=10_000_000, ge=1)


class BuildDatabaseResponse(BaseModel):
    nodes: int
    edges: int
    per_depth: list[int]
    entries: int
    out_path: str


class TrainClassifierRequest(BaseModel):
    gate_set: str
    db_path: str
    samples: int = Field(ge=10)
    out_path: str
    seed: int = 0
    n_trees: int = Field(default=50, ge=1)
    max_depth: int = Field(default=12, ge=1)
    tau: float = Field(default=0.3, ge=0.0, le=1.0)
    subblock_min: int = Field(default=3, ge=1)
    subblock_max: int = Field(default=7, ge=1)


class TrainClassifierResponse(BaseModel):
    accuracy: float
    recall_at_tau: float
    tau: float
    samples: int
    held_out: int
    out_path: str


class ReduceRequest(BaseModel):
    circuit: str
    gate_set: str
    strategy: str
    db_path: str | None = None
    model_path: str | None = None
    seed: int = 0
    target_length: int | None = None
    budget_sec: float | None = None
    stall_limit: int = 2000
    subblock_min: int = 3
    subblock_max: int = 7
    rs_samples: int = 500
    shuffle_attempts: int = 4
    tol: float = 1e-5
    want_trace: bool = False


class ReduceResponse(BaseModel):
    input_length: int
    output_length: int
    verified: bool
    termination: str
    iterations: int
    circuit: str
    trace_csv: str | None = None
    phase_seconds: dict[str, float]


class VerifyRequest(BaseModel):
    circuit_a: str
    circuit_b: str
    gate_set: str
    tol: float = 1e-5


class VerifyResponse(BaseModel):
    equivalent: bool


class BenchRequest(BaseModel):
    gate_set: str
    qubits: int = Field(default=2, ge=1)
    length: int = Field(ge=1)
    runs: int = Field(ge=1)
    strategies: list[str]
    seed: int = 0
    target_length: int | None = None
    db_path: str | None = None
    model_path: str | None = None
    jobs: int = Field(default=1, ge=1)
    stall_limit: int = 2000
    subblock_min: int = 3
    subblock_max: int = 7
    rs_samples: int = 500
    shuffle_attempts: int = 4
    tol: float = 1e-5


class StrategyStats(BaseModel):
    mean: float
    stddev: float
    median: float
    p25: float
    p75: float
    whisker_low: float
    whisker_high: float
    outliers: list[float]


class BenchResponse(BaseModel):
    csv: str
    aggregates: dict[str, StrategyStats]


class TokenModel(BaseModel):
    name: str
    qubits: list[int]


class LookupRequest(BaseModel):
    gate_set: str
    db_path: str
    matrix: list[list[list[float]]]
    tol: float = 1e-5


class LookupResponse(BaseModel):
    found: bool
    factorization: list[TokenModel] | None = None
