"""Command-line interface.

The CLI is a thin client over the HTTP service: every subcommand builds a
request body, posts it, and renders the response.  By default the app runs
in-process (no sockets, same filesystem); ``--server URL`` switches to a
remote instance, in which case file paths are interpreted on the server.

Exit codes: 0 success, 2 usage/configuration errors, 3 data or shape
errors, 4 numerical failures (diverged training, non-finite objectives).

A config file (``--config``, INI format with [data] [model] [train] [attack]
[output] sections) supplies defaults; explicit flags always win.  The
``TSFOOL_SEED`` environment variable overrides the built-in default seed
but loses to an explicit ``--seed``.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_KIND_TO_EXIT = {
    "ConfigError": EXIT_USAGE,
    "DataError": EXIT_DATA,
    "ShapeError": EXIT_DATA,
    "NumericalError": EXIT_NUMERIC,
}


class ClientError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


class Client:
    """Uniform POST/GET wrapper over in-process or remote transport."""

    def __init__(self, server: str | None):
        if server:
            import httpx

            self._http = httpx.Client(base_url=server.rstrip("/"), timeout=None)
        else:
            import warnings

            with warnings.catch_warnings():
                # the test-client import warns about its transport backend;
                # that is noise for CLI users
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import create_app

            self._http = TestClient(create_app())

    def post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._http.post(path, json=payload)
        except Exception as e:
            if type(e).__module__.startswith("httpx"):
                raise ClientError(f"cannot reach server: {e}", 1) from e
            raise
        return self._handle(resp)

    def get(self, path: str) -> dict:
        try:
            resp = self._http.get(path)
        except Exception as e:
            if type(e).__module__.startswith("httpx"):
                raise ClientError(f"cannot reach server: {e}", 1) from e
            raise
        return self._handle(resp)

    @staticmethod
    def _handle(resp) -> dict:
        if resp.status_code == 200:
            return resp.json()
        try:
            body = resp.json()
        except Exception:
            raise ClientError(f"server returned {resp.status_code}: {resp.text[:200]}", 1) from None
        if resp.status_code == 400 and "error" in body:
            kind = body["error"].get("kind", "")
            message = body["error"].get("message", "")
            raise ClientError(f"{kind}: {message}", _KIND_TO_EXIT.get(kind, 1))
        if resp.status_code == 422:
            raise ClientError(f"invalid request: {json.dumps(body)[:300]}", EXIT_USAGE)
        raise ClientError(f"server returned {resp.status_code}: {json.dumps(body)[:300]}", 1)


def _env_seed() -> int:
    raw = os.environ.get("TSFOOL_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ClientError(f"TSFOOL_SEED must be an integer, got {raw!r}", EXIT_USAGE) from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _str_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip() != ""]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsfool",
        description="Train time-series regressors and craft gradient-sign attacks on them.",
    )
    parser.add_argument("--server", help="remote service URL (default: run in-process)")
    parser.add_argument("--config", help="INI file with default option values")
    from . import __version__

    parser.add_argument("--version", action="version", version=f"tsfool {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic CSV series")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--rows", type=int, default=600)
    p.add_argument("--channels", type=int, default=5)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("prep", help="window, scale, and split a CSV into a dataset file")
    p.add_argument("--csv", required=True, help="input CSV path")
    p.add_argument("--out", required=True, help="output dataset (.npz) path")
    p.add_argument("--data-preset", choices=["power", "stock", "synth"])
    p.add_argument("--lookback", type=int)
    p.add_argument("--target", help="target channel name")
    p.add_argument(
        "--split-fraction",
        type=float,
        help="fraction of the latest rows held out as the test split",
    )
    p.add_argument("--resample-seconds", type=int)
    p.add_argument("--delimiter")
    p.add_argument("--timestamp-columns", type=_str_list, metavar="A,B")
    p.add_argument("--timestamp-format")
    p.add_argument("--channel-columns", type=_str_list, metavar="A,B,C")

    p = sub.add_parser("train", help="train a model on a prepared dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output model path")
    p.add_argument("--preset", help="model preset name (e.g. power-lstm, synth-cnn)")
    p.add_argument("--arch", choices=["cnn", "lstm", "gru"])
    p.add_argument("--hidden", type=_int_list, metavar="A,B,C")
    p.add_argument("--dense", type=_int_list, metavar="A,B")
    p.add_argument("--kernel-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--shuffle-seed", type=int)

    p = sub.add_parser("eval", help="clean-data metrics for a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", choices=["train", "test"], default="test")

    p = sub.add_parser("attack", help="craft adversarial windows and measure damage")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--method", required=True, choices=["fgsm", "bim"])
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--alpha", type=float, default=0.001)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--freeze", type=_str_list, metavar="CH1,CH2",
                   help="channel names to keep untouched")
    p.add_argument("--max-windows", type=int)
    p.add_argument("--summary", help="write a JSON outcome summary here")
    p.add_argument("--signature", help="write per-element perturbation CSV here")
    p.add_argument("--signature-windows", type=int, default=1)
    p.add_argument("--no-timestamp", action="store_true",
                   help="omit the generated_at field for byte-identical reruns")

    p = sub.add_parser("transfer", help="cross-model attack transfer matrix")
    p.add_argument("--models", required=True, type=_str_list, metavar="A.tsf,B.tsf")
    p.add_argument("--labels", type=_str_list, metavar="a,b")
    p.add_argument("--dataset", required=True)
    p.add_argument("--method", required=True, choices=["fgsm", "bim"])
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--alpha", type=float, default=0.001)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--max-windows", type=int)
    p.add_argument("--out", help="write the matrix as CSV here")

    p = sub.add_parser("sweep", help="attack damage across epsilon budgets")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--method", required=True, choices=["fgsm", "bim"])
    p.add_argument("--epsilons", required=True, type=_float_list, metavar="E1,E2,...")
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--alpha", type=float, help="BIM step (default: epsilon/iterations)")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--max-windows", type=int)
    p.add_argument("--out", help="write the sweep as CSV here")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


_CONFIG_SECTIONS = ("data", "model", "train", "attack", "output")


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Install config-file values as parser defaults; flags still win."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return argv
    cp = configparser.ConfigParser()
    read = cp.read(known.config)
    if not read:
        raise ClientError(f"cannot read config file {known.config}", EXIT_USAGE)
    defaults: dict = {}
    for section in cp.sections():
        if section not in _CONFIG_SECTIONS:
            raise ClientError(
                f"unknown config section [{section}]; expected one of {_CONFIG_SECTIONS}",
                EXIT_USAGE,
            )
        for key, raw in cp.items(section):
            dest = key.replace("-", "_")
            defaults[dest] = _coerce(raw)
    parser.set_defaults(**defaults)
    for action in parser._subparsers._group_actions:  # propagate into subcommands
        for sp in action.choices.values():
            sp.set_defaults(**{k: v for k, v in defaults.items()
                               if any(a.dest == k for a in sp._actions)})
    return argv


def _coerce(raw: str):
    text = raw.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if "," in text:
        parts = [p.strip() for p in text.split(",")]
        try:
            return [int(p) for p in parts]
        except ValueError:
            pass
        try:
            return [float(p) for p in parts]
        except ValueError:
            pass
        return parts
    return text


def _drop_nones(payload: dict) -> dict:
    return {k: v for k, v in payload.items() if v is not None}


def _cmd_synth(client: Client, args) -> int:
    seed = args.seed if args.seed is not None else _env_seed()
    body = client.post("/v1/synth", {"seed": seed, "rows": args.rows,
                                     "channels": args.channels, "out_csv": args.out})
    print(f"wrote synthetic series to {body['path']} "
          f"({body['rows']} rows, {body['channels']} channels)")
    return EXIT_OK


def _cmd_prep(client: Client, args) -> int:
    body = client.post("/v1/prep", _drop_nones({
        "csv_path": args.csv,
        "out_path": args.out,
        "data_preset": args.data_preset,
        "lookback": args.lookback,
        "target": args.target,
        "split_fraction": args.split_fraction,
        "resample_seconds": args.resample_seconds,
        "delimiter": args.delimiter,
        "timestamp_columns": args.timestamp_columns,
        "timestamp_format": args.timestamp_format,
        "channels": args.channel_columns,
    }))
    print(f"wrote dataset to {body['path']}")
    print(f"  train windows: {body['n_train']}   test windows: {body['n_test']}")
    print(f"  lookback {body['lookback']}, target {body['target_channel']!r}, "
          f"channels {', '.join(body['channel_names'])}")
    print(f"  fingerprints: train {body['fingerprint_train']}  test {body['fingerprint_test']}")
    return EXIT_OK


def _cmd_train(client: Client, args) -> int:
    seed = args.seed if args.seed is not None else _env_seed()
    body = client.post("/v1/train", _drop_nones({
        "dataset_path": args.dataset,
        "out_path": args.out,
        "preset": args.preset,
        "arch": args.arch,
        "hidden": args.hidden,
        "dense": args.dense,
        "kernel_size": args.kernel_size,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "learning_rate": args.learning_rate,
        "seed": seed,
        "shuffle_seed": args.shuffle_seed,
    }))
    print(f"trained {body['arch']} ({body['n_parameters']} parameters) "
          f"for {body['epochs']} epochs; final loss {body['final_loss']:.6f}")
    print(f"wrote model to {body['path']}")
    return EXIT_OK


def _cmd_eval(client: Client, args) -> int:
    body = client.post("/v1/eval", {"model_path": args.model, "dataset_path": args.dataset,
                                    "split": args.split})
    print(f"rmse {body['rmse']:.6f}  mae {body['mae']:.6f}  "
          f"({body['n_windows']} {body['split']} windows)")
    return EXIT_OK


def _cmd_attack(client: Client, args) -> int:
    body = client.post("/v1/attack", _drop_nones({
        "model_path": args.model,
        "dataset_path": args.dataset,
        "method": args.method,
        "split": args.split,
        "epsilon": args.epsilon,
        "alpha": args.alpha,
        "iterations": args.iterations,
        "freeze_channels": args.freeze,
        "max_windows": args.max_windows,
        "summary_path": args.summary,
        "signature_path": args.signature,
        "signature_windows": args.signature_windows,
        "include_timestamp": not args.no_timestamp,
    }))
    print(f"{body['method']} epsilon={body['epsilon']:g}: "
          f"rmse {body['rmse_clean']:.6f} -> {body['rmse_attacked']:.6f} "
          f"(+{body['pct_increase']:.1f}%) over {body['n_windows']} windows")
    print(f"max |delta| {body['max_abs_delta']:.6g}; within budget: {body['within_budget']}")
    if body.get("summary_path"):
        print(f"wrote summary to {body['summary_path']}")
    if body.get("signature_path"):
        print(f"wrote signature to {body['signature_path']}")
    return EXIT_OK


def _cmd_transfer(client: Client, args) -> int:
    body = client.post("/v1/transfer", _drop_nones({
        "model_paths": args.models,
        "labels": args.labels,
        "dataset_path": args.dataset,
        "method": args.method,
        "split": args.split,
        "epsilon": args.epsilon,
        "alpha": args.alpha,
        "iterations": args.iterations,
        "max_windows": args.max_windows,
        "out_csv": args.out,
    }))
    labels = body["labels"]
    width = max(12, max(len(l) for l in labels) + 2)
    print(f"{body['method']} epsilon={body['epsilon']:g} RMSE increase (%), "
          "rows craft / columns evaluate:")
    print(" " * width + "".join(f"{l:>{width}}" for l in labels))
    for i, row_label in enumerate(labels):
        cells = "".join(f"{body['pct_increase'][i][j]:>{width}.1f}" for j in range(len(labels)))
        print(f"{row_label:<{width}}" + cells)
    clean = "  ".join(f"{l}={v:.4f}" for l, v in zip(labels, body["clean_rmse"]))
    print(f"clean rmse: {clean}")
    if body.get("out_csv"):
        print(f"wrote matrix to {body['out_csv']}")
    return EXIT_OK


def _cmd_sweep(client: Client, args) -> int:
    body = client.post("/v1/sweep", _drop_nones({
        "model_path": args.model,
        "dataset_path": args.dataset,
        "method": args.method,
        "epsilons": args.epsilons,
        "split": args.split,
        "alpha": args.alpha,
        "iterations": args.iterations,
        "max_windows": args.max_windows,
        "out_csv": args.out,
    }))
    print(f"{body['method']} sweep, clean rmse {body['rmse_clean']:.6f}:")
    print(f"{'epsilon':>10} {'rmse':>12} {'increase %':>12}")
    for e, r, p in zip(body["epsilons"], body["rmse_attacked"], body["pct_increase"]):
        print(f"{e:>10g} {r:>12.6f} {p:>12.2f}")
    if body.get("out_csv"):
        print(f"wrote sweep to {body['out_csv']}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if args.command == "serve":
            return _cmd_serve(args)
        client = Client(args.server)
        handler = {
            "synth": _cmd_synth,
            "prep": _cmd_prep,
            "train": _cmd_train,
            "eval": _cmd_eval,
            "attack": _cmd_attack,
            "transfer": _cmd_transfer,
            "sweep": _cmd_sweep,
        }[args.command]
        return handler(client, args)
    except ClientError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ConnectionError as e:
        print(f"error: cannot reach server: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
