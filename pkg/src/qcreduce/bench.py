"""Paired-input benchmarking across reduction strategies.

Every strategy sees the same sequence of seeded random circuits and the
same per-run reducer seeds, so wall-time comparisons are paired.  Runs
can execute inline or on a process pool; workers load the database and
forest once from disk rather than receiving them pickled per task.
"""

from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .circuit import parse_circuit, random_circuit, serialize_circuit
from .forest import load_forest
from .gates import parse_gate_set
from .graph import load_database
from .reducer import ReducerConfig, Strategy, reduce

CSV_HEADER = "strategy,run,seed,input_length,output_length,iterations,wall_time_s"


@dataclass(frozen=True)
class RunRecord:
    strategy: str
    run: int
    seed: int
    input_length: int
    output_length: int
    iterations: int
    wall_time_s: float

    def csv_row(self) -> str:
        return (f"{self.strategy},{self.run},{self.seed},{self.input_length},"
                f"{self.output_length},{self.iterations},{self.wall_time_s:.6f}")


@dataclass(frozen=True)
class StrategyAggregate:
    strategy: str
    mean: float
    stddev: float
    median: float
    p25: float
    p75: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]


@dataclass(frozen=True)
class BenchSpec:
    """Inputs for one benchmark campaign.

    gate_set_text is the canonical config text (or a preset: form) so the
    spec can cross process boundaries without pickling matrices.  A None
    target_length means half the input length.
    """

    gate_set_text: str
    n_qubits: int
    length: int
    runs: int
    strategies: tuple[str, ...]
    seed: int
    target_length: int | None = None
    db_path: str | None = None
    model_path: str | None = None
    reducer: ReducerConfig = ReducerConfig()

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.length < 1:
            raise ValueError("length must be >= 1")
        if not self.strategies:
            raise ValueError("at least one strategy is required")
        for kind in self.strategies:
            if kind not in ("rs", "dr", "rf"):
                raise ValueError(f"unknown strategy kind {kind!r}")
            if kind in ("dr", "rf") and self.db_path is None:
                raise ValueError(f"strategy {kind!r} requires db_path")
            if kind == "rf" and self.model_path is None:
                raise ValueError("strategy 'rf' requires model_path")


@dataclass
class BenchReport:
    records: list[RunRecord]
    aggregates: dict[str, StrategyAggregate]

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        lines.extend(rec.csv_row() for rec in self.records)
        return "\n".join(lines) + "\n"


def compute_aggregates(records) -> dict[str, StrategyAggregate]:
    """Per-strategy wall-time statistics with 1.5*IQR whiskers."""
    by_strategy: dict[str, list[float]] = {}
    for rec in records:
        by_strategy.setdefault(rec.strategy, []).append(rec.wall_time_s)
    out: dict[str, StrategyAggregate] = {}
    for strategy, times in by_strategy.items():
        arr = np.asarray(times, dtype=np.float64)
        p25, median, p75 = (float(v) for v in np.percentile(arr, [25.0, 50.0, 75.0]))
        iqr = p75 - p25
        lo_fence = p25 - 1.5 * iqr
        hi_fence = p75 + 1.5 * iqr
        inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
        outliers = arr[(arr < lo_fence) | (arr > hi_fence)]
        out[strategy] = StrategyAggregate(
            strategy=strategy,
            mean=float(arr.mean()),
            stddev=float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
            median=median,
            p25=p25,
            p75=p75,
            whisker_low=float(inside.min()),
            whisker_high=float(inside.max()),
            outliers=tuple(float(v) for v in sorted(outliers)),
        )
    return out


# Per-process artifact store for pool workers; populated by _worker_init.
_WORKER: dict = {}


def _worker_init(gate_set_text: str, db_path: str | None, model_path: str | None) -> None:
    gate_set = parse_gate_set(gate_set_text)
    _WORKER["gate_set"] = gate_set
    _WORKER["db"] = load_database(db_path, gate_set) if db_path else None
    _WORKER["forest"] = load_forest(model_path) if model_path else None


def _worker_run(task) -> RunRecord:
    kind, run_idx, circuit_text, cfg = task
    gate_set = _WORKER["gate_set"]
    strategy = _make_strategy(kind)
    circuit = parse_circuit(circuit_text)
    t0 = time.perf_counter()
    out, trace = reduce(circuit, gate_set, strategy, cfg)
    wall = time.perf_counter() - t0
    return RunRecord(
        strategy=kind,
        run=run_idx,
        seed=cfg.seed,
        input_length=len(circuit),
        output_length=len(out),
        iterations=trace.iterations,
        wall_time_s=wall,
    )


def _make_strategy(kind: str) -> Strategy:
    if kind == "rs":
        return Strategy("rs")
    if kind == "dr":
        return Strategy("dr", db=_WORKER["db"])
    return Strategy("rf", db=_WORKER["db"], forest=_WORKER["forest"])


def _build_tasks(spec: BenchSpec) -> list[tuple]:
    gate_set = parse_gate_set(spec.gate_set_text)
    words = np.random.SeedSequence(spec.seed).generate_state(2 * spec.runs,
                                                             dtype=np.uint64)
    target = spec.target_length if spec.target_length is not None else spec.length // 2
    tasks = []
    for run_idx in range(spec.runs):
        circuit_seed = int(words[2 * run_idx])
        reducer_seed = int(words[2 * run_idx + 1])
        circuit = random_circuit(gate_set, spec.n_qubits, spec.length,
                                 np.random.default_rng(circuit_seed))
        text = serialize_circuit(circuit)
        cfg = dataclasses.replace(spec.reducer, seed=reducer_seed,
                                  target_length=target)
        for kind in spec.strategies:
            tasks.append((kind, run_idx, text, cfg))
    return tasks


def run_bench(spec: BenchSpec, jobs: int = 1) -> BenchReport:
    """Run the campaign and aggregate wall times per strategy.

    Rows are ordered by (strategy order in the spec, run index) no matter
    how workers interleave.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    tasks = _build_tasks(spec)
    if jobs == 1:
        _worker_init(spec.gate_set_text, spec.db_path, spec.model_path)
        results = [_worker_run(t) for t in tasks]
    else:
        with ProcessPoolExecutor(
                max_workers=jobs,
                initializer=_worker_init,
                initargs=(spec.gate_set_text, spec.db_path, spec.model_path)) as pool:
            results = list(pool.map(_worker_run, tasks))
    order = {kind: i for i, kind in enumerate(spec.strategies)}
    results.sort(key=lambda rec: (order[rec.strategy], rec.run))
    return BenchReport(records=results, aggregates=compute_aggregates(results))
