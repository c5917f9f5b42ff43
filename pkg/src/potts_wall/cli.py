"""Command line entry point: ``potts-wall <subcommand> [--config ...]``.

Exit codes: 0 pass, 1 configuration error, 2 acceptance-check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .lattice import ConfigurationError

EXIT_OK, EXIT_CONFIG, EXIT_FAIL = 0, 1, 2
KINDS = ("interface", "walk-scan", "coupling-verify", "excursion-ref", "repulsion-trend")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="potts-wall", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind)
        s.add_argument("--config", type=Path, help="JSON config (defaults used when omitted)")
        s.add_argument("--seed", type=int, default=0, help="master seed (u64)")
        s.add_argument("--out", type=Path, default=Path("runs") / kind)
        s.add_argument("--workers", type=int, default=1)
    r = sub.add_parser("report")
    r.add_argument("manifests", nargs="+", type=Path)
    r.add_argument("--config", type=Path, help="unused; accepted for a uniform interface")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", type=Path)
    r.add_argument("--workers", type=int, default=1)
    return p


def _read_config(kind: str, path: Path | None):
    from .experiments import load_config

    raw = {}
    if path is not None:
        try:
            raw = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigurationError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigurationError("config must be a JSON object")
    return load_config(kind, raw)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigurationError("seed must be a u64")
        if args.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        if args.command == "report":
            return _report(args)
        from .experiments import RUNNERS

        cfg = _read_config(args.command, args.config)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = RUNNERS[args.command](cfg, args.seed, args.out, args.workers)
    print(f"{args.command}: {manifest['verdict']} -> {args.out / 'manifest.json'}")
    if args.command == "repulsion-trend":
        print((args.out / "trend.txt").read_text(), end="")
    return EXIT_OK if manifest["verdict"] in ("pass", "partial") and args.command != "repulsion-trend" \
        or manifest["verdict"] == "pass" else EXIT_FAIL


def _report(args) -> int:
    from .experiments import report, trend_text

    manifests = []
    for p in args.manifests:
        try:
            manifests.append(json.loads(p.read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read manifest {p}: {exc}") from exc
    table = report(manifests)
    text = trend_text(table) if "N" in table["rows"][0] else json.dumps(table, indent=2) + "\n"
    print(text, end="")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "report.txt").write_text(text)
        (args.out / "report.json").write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if table["pass"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
