"""qcr command line.

Thin client over the HTTP service: each subcommand builds one request,
sends it to an in-process application instance (or a remote server when
--server is given), and maps the response onto printed output and exit
codes: 0 ok, 1 not equivalent, 2 usage or dependency error, 3 training
failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys

EXIT_OK = 0
EXIT_NOT_EQUIVALENT = 1
EXIT_USAGE = 2
EXIT_TRAINING = 3
EXIT_VERIFICATION = 4

_EXIT_BY_CODE = {
    "class-balance": EXIT_TRAINING,
    "verification-failed": EXIT_VERIFICATION,
}


class _UsageError(Exception):
    pass


class _Client:
    """Hides the in-process vs. remote distinction behind post/get."""

    def __init__(self, server: str | None):
        if server is None:
            import warnings

            with warnings.catch_warnings():
                # this starlette/httpx pairing deprecation is not actionable
                # by CLI users and would land on stderr of every command
                warnings.filterwarnings(
                    "ignore", message="Using `httpx` with `starlette.testclient`")
                from fastapi.testclient import TestClient

            from .service.app import create_app

            self._client = TestClient(create_app(), raise_server_exceptions=False)
        else:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=None)

    def post(self, path: str, payload: dict):
        return self._client.post(path, json=payload)

    def get(self, path: str):
        return self._client.get(path)

    def close(self) -> None:
        self._client.close()


def _env_seed() -> int:
    raw = os.environ.get("QCRS_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise _UsageError(f"QCRS_SEED must be an integer, got {raw!r}")


def _resolve_seed(args) -> int:
    return args.seed if args.seed is not None else _env_seed()


def _read_gateset(arg: str) -> str:
    if arg.startswith("preset:"):
        return arg
    return _read_file(arg)


def _read_file(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise _UsageError(str(exc))


def _write_file(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise _UsageError(str(exc))


def _describe_detail(status: int, detail, text: str) -> tuple[str, str | None]:
    if isinstance(detail, dict) and "message" in detail:
        return detail["message"], detail.get("code")
    if isinstance(detail, list):
        parts = []
        for item in detail:
            loc = ".".join(str(x) for x in item.get("loc", ())[1:])
            parts.append(f"{loc}: {item.get('msg')}")
        return "; ".join(parts) or f"HTTP {status}", None
    return f"HTTP {status}: {text[:200]}", None


def _request(client: _Client, path: str, payload: dict) -> tuple[int, dict | None]:
    resp = client.post(path, payload)
    if resp.status_code == 200:
        return EXIT_OK, resp.json()
    try:
        detail = resp.json().get("detail")
    except ValueError:
        detail = None
    message, code = _describe_detail(resp.status_code, detail, resp.text)
    print(f"error: {message}", file=sys.stderr)
    return _EXIT_BY_CODE.get(code, EXIT_USAGE), None


def _cmd_build_db(args, client: _Client) -> int:
    if args.qubits < 1:
        raise _UsageError("--qubits must be >= 1")
    if args.depth < 1:
        raise _UsageError("--depth must be >= 1")
    payload = {
        "gate_set": _read_gateset(args.gateset),
        "qubits": args.qubits,
        "depth": args.depth,
        "out_path": os.path.abspath(args.out),
        "node_cap": args.node_cap,
    }
    code, body = _request(client, "/database/build", payload)
    if code:
        return code
    print(f"nodes={body['nodes']} edges={body['edges']}")
    for depth, count in enumerate(body["per_depth"]):
        print(f"depth={depth} nodes={count}")
    return EXIT_OK


def _cmd_train_clf(args, client: _Client) -> int:
    if args.samples < 1:
        raise _UsageError("--samples must be >= 1")
    payload = {
        "gate_set": _read_gateset(args.gateset),
        "db_path": os.path.abspath(args.db),
        "samples": args.samples,
        "seed": _resolve_seed(args),
        "out_path": os.path.abspath(args.out),
        "n_trees": args.trees,
        "max_depth": args.max_depth,
        "tau": args.tau,
    }
    code, body = _request(client, "/classifier/train", payload)
    if code:
        return code
    print(f"accuracy={body['accuracy']:.4f} recall={body['recall_at_tau']:.4f} "
          f"tau={body['tau']:g} held_out={body['held_out']}")
    return EXIT_OK


def _cmd_reduce(args, client: _Client) -> int:
    if args.strategy in ("dr", "rf") and not args.db:
        raise _UsageError(f"strategy {args.strategy!r} requires --db")
    if args.strategy == "rf" and not args.model:
        raise _UsageError("strategy 'rf' requires --model")
    payload = {
        "circuit": _read_file(args.circuit),
        "gate_set": _read_gateset(args.gateset),
        "strategy": args.strategy,
        "db_path": os.path.abspath(args.db) if args.db else None,
        "model_path": os.path.abspath(args.model) if args.model else None,
        "seed": _resolve_seed(args),
        "target_length": args.target,
        "budget_sec": args.budget_sec,
        "stall_limit": args.stall_limit,
        "subblock_min": args.subblock_min,
        "subblock_max": args.subblock_max,
        "rs_samples": args.rs_samples,
        "shuffle_attempts": args.shuffle_attempts,
        "tol": args.tol,
        "want_trace": args.trace is not None,
    }
    code, body = _request(client, "/reduce", payload)
    if code:
        return code
    _write_file(args.out, body["circuit"])
    if args.trace is not None:
        _write_file(args.trace, body["trace_csv"])
    print(f"in={body['input_length']} out={body['output_length']} verified=true")
    return EXIT_OK


def _cmd_verify(args, client: _Client) -> int:
    payload = {
        "circuit_a": _read_file(args.a),
        "circuit_b": _read_file(args.b),
        "gate_set": _read_gateset(args.gateset),
        "tol": args.tol,
    }
    code, body = _request(client, "/verify", payload)
    if code:
        return code
    if body["equivalent"]:
        print("equivalent=true")
        return EXIT_OK
    print("equivalent=false")
    return EXIT_NOT_EQUIVALENT


def _cmd_bench(args, client: _Client) -> int:
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    if not strategies:
        raise _UsageError("--strategies must name at least one of rs,dr,rf")
    if args.runs < 1:
        raise _UsageError("--runs must be >= 1")
    payload = {
        "gate_set": _read_gateset(args.gateset),
        "qubits": args.qubits,
        "length": args.len,
        "runs": args.runs,
        "strategies": strategies,
        "seed": _resolve_seed(args),
        "target_length": args.target,
        "db_path": os.path.abspath(args.db) if args.db else None,
        "model_path": os.path.abspath(args.model) if args.model else None,
        "jobs": args.jobs,
        "stall_limit": args.stall_limit,
        "subblock_min": args.subblock_min,
        "subblock_max": args.subblock_max,
        "rs_samples": args.rs_samples,
        "shuffle_attempts": args.shuffle_attempts,
        "tol": args.tol,
    }
    code, body = _request(client, "/bench", payload)
    if code:
        return code
    _write_file(args.csv, body["csv"])
    for kind in strategies:
        agg = body["aggregates"][kind]
        print(f"strategy={kind} mean={agg['mean']:.4f} stddev={agg['stddev']:.4f} "
              f"median={agg['median']:.4f} p25={agg['p25']:.4f} p75={agg['p75']:.4f}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def _add_reducer_knobs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--stall-limit", type=int, default=2000)
    p.add_argument("--subblock-min", type=int, default=3)
    p.add_argument("--subblock-max", type=int, default=7)
    p.add_argument("--rs-samples", type=int, default=500)
    p.add_argument("--shuffle-attempts", type=int, default=4)
    p.add_argument("--tol", type=float, default=1e-5)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcr",
        description="Quantum circuit length reduction over restricted gate sets.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-db", help="enumerate a compute graph and save its "
                                        "factorization database")
    p.add_argument("--gateset", required=True,
                   help="gate set config path or preset:<name>")
    p.add_argument("--qubits", type=int, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--node-cap", type=int, default=10_000_000)
    p.add_argument("--server")
    p.set_defaults(func=_cmd_build_db)

    p = sub.add_parser("train-clf", help="train the reducibility forest")
    p.add_argument("--gateset", required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--trees", type=int, default=50)
    p.add_argument("--max-depth", type=int, default=12)
    p.add_argument("--tau", type=float, default=0.3)
    p.add_argument("--server")
    p.set_defaults(func=_cmd_train_clf)

    p = sub.add_parser("reduce", help="shorten a circuit")
    p.add_argument("--circuit", required=True)
    p.add_argument("--gateset", required=True)
    p.add_argument("--strategy", required=True, choices=("rs", "dr", "rf"))
    p.add_argument("--db")
    p.add_argument("--model")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--target", type=int, default=None)
    p.add_argument("--budget-sec", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    _add_reducer_knobs(p)
    p.add_argument("--server")
    p.set_defaults(func=_cmd_reduce)

    p = sub.add_parser("verify", help="check two circuits for equivalence")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--gateset", required=True)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--server")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("bench", help="paired strategy benchmark on random circuits")
    p.add_argument("--gateset", required=True)
    p.add_argument("--qubits", type=int, default=2)
    p.add_argument("--len", type=int, required=True)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--strategies", default="rs,dr,rf")
    p.add_argument("--target", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--csv", required=True)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--db")
    p.add_argument("--model")
    _add_reducer_knobs(p)
    p.add_argument("--server")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=None)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        client = _Client(args.server)
        try:
            return args.func(args, client)
        finally:
            client.close()
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
