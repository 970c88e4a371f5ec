"""Command-line client for the factorization service.

File handling stays on the client; every numeric operation goes through
the HTTP API. Without ``--server`` the service app is embedded in-process
(same filesystem), so no daemon is needed for local work.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure. Errors are printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from .data import load_matrix_csv, load_wav_mono, write_matrix_csv
from .errors import ConfigurationError, DataError, NumericError

EXIT_CODES = {"config": 2, "data": 3, "numeric": 4}


class ServiceClient:
    """Minimal JSON-over-HTTP client; in-process ASGI unless a server is given."""

    def __init__(self, server: str | None = None):
        self._server = server
        self._app = None
        if server is None:
            from .service import create_app

            self._app = create_app()

    def post(self, path: str, payload: dict) -> dict:
        if self._server is not None:
            with httpx.Client(base_url=self._server, timeout=None) as client:
                response = client.post(path, json=payload)
        else:
            response = asyncio.run(self._asgi_post(path, payload))
        if response.status_code >= 400:
            raise ServiceError(response)
        return response.json()

    async def _asgi_post(self, path: str, payload: dict):
        transport = httpx.ASGITransport(app=self._app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://chemnmf.local", timeout=None
        ) as client:
            return await client.post(path, json=payload)


class ServiceError(Exception):
    def __init__(self, response):
        self.kind = "config"
        try:
            body = response.json()
            self.message = body.get("message") or json.dumps(body.get("detail"))
            if body.get("error") in EXIT_CODES:
                self.kind = body["error"]
        except Exception:
            self.message = response.text
        super().__init__(self.message)


def _fail(kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return EXIT_CODES.get(kind, 1)


def _read_labels(path) -> list[int]:
    text = Path(path).read_text(encoding="ascii")
    values = [v for chunk in text.split() for v in chunk.split(",") if v]
    try:
        return [int(float(v)) for v in values]
    except ValueError as exc:
        raise DataError(f"{path}: non-integer label") from exc


def cmd_run(client: ServiceClient, args) -> int:
    try:
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {args.config}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{args.config}: invalid JSON: {exc}") from exc
    if isinstance(config, dict) and "manifest" in config:
        manifest = Path(str(config["manifest"]))
        if not manifest.is_absolute():
            config["manifest"] = str(Path(args.config).parent / manifest)
    body = client.post(
        "/experiments/run", {"config": config, "workers": args.workers}
    )
    if args.verbose:
        for row in body["rows"]:
            print(json.dumps(row))
    print(
        json.dumps(
            {"rows": len(body["rows"]), "results_csv": body["results_csv"]}
        )
    )
    return 0


def cmd_factorize(client: ServiceClient, args) -> int:
    matrix = load_matrix_csv(args.input)
    ranks = [int(r) for r in args.ranks.split(",") if r]
    body = client.post(
        "/factorize",
        {
            "matrix": matrix.to_lists(),
            "ranks": ranks,
            "alpha": args.alpha,
            "bf": args.bf,
            "seed": args.seed,
            "max_iter": args.max_iter,
            "tol": args.tol,
        },
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(body["basis_total"], out / "basis.csv")
    write_matrix_csv(body["activation"], out / "activation.csv")

    lines = ["layer,iteration,divergence,is_final_of_layer"]
    for depth, layer in enumerate(body["layers"], start=1):
        divergences = layer["divergences"]
        for i, value in enumerate(divergences, start=1):
            flag = "1" if i == len(divergences) else "0"
            lines.append(f"{depth},{i},{float(value)!r},{flag}")
    (out / "loss_curves.csv").write_text("\n".join(lines) + "\n", encoding="ascii")

    barriers = client.post(
        "/barriers",
        {
            "traces": [
                {
                    "initial_divergence": layer["initial_divergence"],
                    "divergences": layer["divergences"],
                }
                for layer in body["layers"]
            ]
        },
    )
    (out / "barriers.json").write_text(
        json.dumps(barriers, indent=2) + "\n", encoding="ascii"
    )
    print(
        json.dumps(
            {
                "out": str(out),
                "final_divergence": body["final_divergence"],
                "layers": len(body["layers"]),
            }
        )
    )
    return 0


def cmd_eval(client: ServiceClient, args) -> int:
    body = client.post(
        "/evaluate",
        {"predicted": _read_labels(args.pred), "truth": _read_labels(args.truth)},
    )
    print(json.dumps({"acc": body["acc"], "nmi": body["nmi"]}))
    return 0


def cmd_stft(client: ServiceClient, args) -> int:
    samples, source_rate = load_wav_mono(args.wav)
    body = client.post(
        "/stft",
        {
            "samples": samples.tolist(),
            "source_rate": source_rate,
            "sample_rate": args.rate,
            "n_fft": args.n_fft,
            "hop": args.hop,
        },
    )
    write_matrix_csv(body["magnitudes"], args.out)
    print(json.dumps({"out": args.out, "rows": body["rows"], "frames": body["frames"]}))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chemnmf",
        description="Multi-layer alpha-divergence NMF experiments and diagnostics",
    )
    parser.add_argument("--server", help="remote service URL (default: in-process)")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment sweep from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--workers", type=int, default=1)

    p_fac = sub.add_parser("factorize", help="factorize one CSV matrix")
    p_fac.add_argument("--input", required=True)
    p_fac.add_argument("--ranks", required=True, help="comma-separated, e.g. 16,8,4")
    p_fac.add_argument("--alpha", type=float, default=0.5)
    p_fac.add_argument("--bf", type=float, default=0.0)
    p_fac.add_argument("--seed", type=int, default=0)
    p_fac.add_argument("--max-iter", type=int, default=500)
    p_fac.add_argument("--tol", type=float, default=1e-6)
    p_fac.add_argument("--out", required=True)

    p_eval = sub.add_parser("eval", help="score predicted labels against truth")
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--truth", required=True)

    p_stft = sub.add_parser("stft", help="spectrogram of a WAV file as CSV")
    p_stft.add_argument("--wav", required=True)
    p_stft.add_argument("--out", required=True)
    p_stft.add_argument("--rate", type=int, default=4000)
    p_stft.add_argument("--n-fft", type=int, default=512)
    p_stft.add_argument("--hop", type=int, default=128)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    client = ServiceClient(args.server)
    handlers = {
        "run": cmd_run,
        "factorize": cmd_factorize,
        "eval": cmd_eval,
        "stft": cmd_stft,
    }
    try:
        return handlers[args.command](client, args)
    except ServiceError as exc:
        return _fail(exc.kind, exc.message)
    except ConfigurationError as exc:
        return _fail("config", str(exc))
    except (DataError, FileNotFoundError) as exc:
        return _fail("data", str(exc))
    except NumericError as exc:
        return _fail("numeric", str(exc))
    except httpx.HTTPError as exc:
        return _fail("data", f"service unreachable: {exc}")


if __name__ == "__main__":
    sys.exit(main())
