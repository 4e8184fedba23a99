"""FastAPI application wrapping the core package.

Handlers translate domain errors into HTTP errors whose detail is always
{"code", "message"}; the CLI maps codes onto its exit-code contract.
"""

from __future__ import annotations

import os

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..bench import BenchSpec, run_bench
from ..circuit import Circuit, parse_circuit, serialize_circuit
from ..forest import ForestParams, generate_training_data, save_forest, train_forest
from ..gates import GateSet, parse_gate_set
from ..graph import build_graph, extract_database, graph_stats, lookup, save_database
from ..reducer import (
    ReducerConfig,
    Strategy,
    VerificationError,
    reduce,
    verify_equivalence,
)
from ..unitary import is_unitary
from .models import (
    BenchRequest,
    BenchResponse,
    BuildDatabaseRequest,
    BuildDatabaseResponse,
    GateSetRequest,
    GateSetValidation,
    HealthResponse,
    LookupRequest,
    LookupResponse,
    ReduceRequest,
    ReduceResponse,
    StrategyStats,
    TokenModel,
    TrainClassifierRequest,
    TrainClassifierResponse,
    VerifyRequest,
    VerifyResponse,
)
from .state import ArtifactCache


def _fail(status: int, code: str, message: str):
    raise HTTPException(status_code=status, detail={"code": code, "message": message})


def create_app() -> FastAPI:
    app = FastAPI(title="qcreduce", version=__version__)
    cache = ArtifactCache()

    def parse_gateset_or_fail(text: str) -> GateSet:
        try:
            return parse_gate_set(text)
        except ValueError as exc:
            _fail(400, "bad-gateset", str(exc))

    def parse_circuit_or_fail(text: str, gate_set: GateSet) -> Circuit:
        try:
            circuit = parse_circuit(text)
        except ValueError as exc:
            _fail(400, "bad-circuit", str(exc))
        # The parser is gate-set-agnostic; resolve token names here so the
        # client gets a circuit error rather than a late reducer error.
        for tok in circuit.tokens:
            d = gate_set.by_name.get(tok.name)
            if d is None:
                _fail(400, "bad-circuit",
                      f"token {tok.name!r} is not in the gate set")
            if len(tok.qubits) != d.arity:
                _fail(400, "bad-circuit",
                      f"token {tok.name!r} expects {d.arity} qubit(s), "
                      f"got {len(tok.qubits)}")
        return circuit

    def load_db_or_fail(path: str, gate_set: GateSet):
        try:
            return cache.database(path, gate_set)
        except FileNotFoundError:
            _fail(400, "missing-file", f"database file not found: {path}")
        except ValueError as exc:
            _fail(400, "artifact-mismatch", str(exc))

    def load_forest_or_fail(path: str):
        try:
            return cache.forest(path)
        except FileNotFoundError:
            _fail(400, "missing-file", f"model file not found: {path}")
        except ValueError as exc:
            _fail(400, "artifact-mismatch", str(exc))

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/gateset/validate", response_model=GateSetValidation)
    def gateset_validate(req: GateSetRequest) -> GateSetValidation:
        try:
            gs = parse_gate_set(req.gate_set)
        except ValueError as exc:
            return GateSetValidation(valid=False, message=str(exc))
        return GateSetValidation(valid=True, token_count=len(gs.defs),
                                 fingerprint=gs.fingerprint().hex())

    @app.post("/database/build", response_model=BuildDatabaseResponse)
    def database_build(req: BuildDatabaseRequest) -> BuildDatabaseResponse:
        gs = parse_gateset_or_fail(req.gate_set)
        try:
            graph = build_graph(gs, req.qubits, req.depth, node_cap=req.node_cap)
        except RuntimeError as exc:
            _fail(400, "node-cap", str(exc))
        except ValueError as exc:
            _fail(400, "bad-args", str(exc))
        stats = graph_stats(graph)
        db = extract_database(graph)
        try:
            save_database(db, req.out_path)
        except OSError as exc:
            _fail(400, "io-error", str(exc))
        return BuildDatabaseResponse(
            nodes=stats.nodes, edges=stats.edges, per_depth=list(stats.per_depth),
            entries=len(db), out_path=os.path.abspath(req.out_path))

    @app.post("/classifier/train", response_model=TrainClassifierResponse)
    def classifier_train(req: TrainClassifierRequest) -> TrainClassifierResponse:
        gs = parse_gateset_or_fail(req.gate_set)
        db = load_db_or_fail(req.db_path, gs)
        if req.subblock_max < req.subblock_min:
            _fail(400, "bad-args", "subblock_max must be >= subblock_min")
        rng = np.random.default_rng(req.seed)
        try:
            samples = generate_training_data(
                gs, db, rng, req.samples, (req.subblock_min, req.subblock_max))
        except RuntimeError as exc:
            _fail(400, "class-balance", str(exc))
        except ValueError as exc:
            _fail(400, "bad-args", str(exc))
        perm = rng.permutation(len(samples))
        n_eval = max(1, len(samples) // 5)
        held = [samples[i] for i in perm[:n_eval]]
        train = [samples[i] for i in perm[n_eval:]]
        try:
            forest = train_forest(
                train,
                ForestParams(n_trees=req.n_trees, max_depth=req.max_depth, tau=req.tau),
                rng)
        except ValueError as exc:
            _fail(400, "class-balance", str(exc))
        X = np.stack([s.features for s in held])
        y = np.array([s.label for s in held])
        proba = forest.predict_proba_batch(X)
        pred = proba >= req.tau
        positives = y == 1
        if not positives.any():
            _fail(400, "class-balance", "held-out split contains no reducible samples")
        accuracy = float((pred == positives).mean())
        recall = float(pred[positives].mean())
        try:
            save_forest(forest, req.out_path)
        except OSError as exc:
            _fail(400, "io-error", str(exc))
        return TrainClassifierResponse(
            accuracy=accuracy, recall_at_tau=recall, tau=req.tau,
            samples=len(samples), held_out=len(held),
            out_path=os.path.abspath(req.out_path))

    @app.post("/reduce", response_model=ReduceResponse)
    def reduce_circuit(req: ReduceRequest) -> ReduceResponse:
        gs = parse_gateset_or_fail(req.gate_set)
        circuit = parse_circuit_or_fail(req.circuit, gs)
        if req.strategy not in ("rs", "dr", "rf"):
            _fail(400, "bad-args", f"unknown strategy {req.strategy!r}")
        db = forest = None
        if req.strategy in ("dr", "rf"):
            if not req.db_path:
                _fail(400, "missing-dependency",
                      f"strategy {req.strategy!r} requires db_path")
            db = load_db_or_fail(req.db_path, gs)
        if req.strategy == "rf":
            if not req.model_path:
                _fail(400, "missing-dependency", "strategy 'rf' requires model_path")
            forest = load_forest_or_fail(req.model_path)
        try:
            cfg = ReducerConfig(
                subblock_len_range=(req.subblock_min, req.subblock_max),
                rs_samples_per_block=req.rs_samples,
                shuffle_attempts_per_iter=req.shuffle_attempts,
                stall_limit=req.stall_limit,
                target_length=req.target_length,
                wall_clock_budget=req.budget_sec,
                tol=req.tol,
                seed=req.seed)
        except ValueError as exc:
            _fail(400, "bad-args", str(exc))
        strategy = Strategy(req.strategy, db=db, forest=forest)
        try:
            out, trace = reduce(circuit, gs, strategy, cfg)
        except VerificationError as exc:
            _fail(500, "verification-failed", str(exc))
        except ValueError as exc:
            _fail(400, "artifact-mismatch", str(exc))
        return ReduceResponse(
            input_length=trace.input_length,
            output_length=trace.output_length,
            verified=True,
            termination=trace.termination,
            iterations=trace.iterations,
            circuit=serialize_circuit(out),
            trace_csv=trace.to_csv() if req.want_trace else None,
            phase_seconds=trace.phase_seconds)

    @app.post("/verify", response_model=VerifyResponse)
    def verify(req: VerifyRequest) -> VerifyResponse:
        gs = parse_gateset_or_fail(req.gate_set)
        a = parse_circuit_or_fail(req.circuit_a, gs)
        b = parse_circuit_or_fail(req.circuit_b, gs)
        try:
            ok = verify_equivalence(a, b, gs, req.tol)
        except ValueError as exc:
            _fail(400, "bad-args", str(exc))
        return VerifyResponse(equivalent=ok)

    @app.post("/bench", response_model=BenchResponse)
    def bench(req: BenchRequest) -> BenchResponse:
        gs = parse_gateset_or_fail(req.gate_set)
        # Validate artifacts up front so a bad path fails with a clear
        # message instead of a broken worker pool.
        if req.db_path is not None:
            load_db_or_fail(req.db_path, gs)
        if req.model_path is not None:
            load_forest_or_fail(req.model_path)
        try:
            reducer_cfg = ReducerConfig(
                subblock_len_range=(req.subblock_min, req.subblock_max),
                rs_samples_per_block=req.rs_samples,
                shuffle_attempts_per_iter=req.shuffle_attempts,
                stall_limit=req.stall_limit,
                tol=req.tol)
            spec = BenchSpec(
                gate_set_text=req.gate_set,
                n_qubits=req.qubits,
                length=req.length,
                runs=req.runs,
                strategies=tuple(req.strategies),
                seed=req.seed,
                target_length=req.target_length,
                db_path=req.db_path,
                model_path=req.model_path,
                reducer=reducer_cfg)
        except ValueError as exc:
            _fail(400, "bad-args", str(exc))
        try:
            report = run_bench(spec, jobs=req.jobs)
        except (ValueError, RuntimeError) as exc:
            _fail(400, "bad-args", str(exc))
        aggregates = {
            kind: StrategyStats(
                mean=agg.mean, stddev=agg.stddev, median=agg.median,
                p25=agg.p25, p75=agg.p75, whisker_low=agg.whisker_low,
                whisker_high=agg.whisker_high, outliers=list(agg.outliers))
            for kind, agg in report.aggregates.items()}
        return BenchResponse(csv=report.to_csv(), aggregates=aggregates)

    @app.post("/lookup", response_model=LookupResponse)
    def lookup_unitary(req: LookupRequest) -> LookupResponse:
        gs = parse_gateset_or_fail(req.gate_set)
        db = load_db_or_fail(req.db_path, gs)
        arr = np.asarray(req.matrix, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] != arr.shape[1] or arr.shape[2] != 2:
            _fail(400, "bad-args", "matrix must be a square grid of [re, im] pairs")
        u = arr[..., 0] + 1j * arr[..., 1]
        want_dim = 2 ** db.qubit_count
        if u.shape[0] != want_dim:
            _fail(400, "bad-args",
                  f"matrix dimension {u.shape[0]} does not match the "
                  f"database register (expected {want_dim})")
        if not is_unitary(u):
            _fail(400, "bad-args", "matrix is not unitary")
        fact = lookup(db, u, req.tol)
        if fact is None:
            return LookupResponse(found=False)
        return LookupResponse(
            found=True,
            factorization=[TokenModel(name=t.name, qubits=list(t.qubits))
                           for t in fact])

    return app
