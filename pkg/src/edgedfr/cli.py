"""Command-line front end.

Exit codes: 0 success, 1 invalid parameter or configuration, 2 I/O failure,
3 numerical divergence. Machine-readable output goes to stdout, diagnostics
to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import bench
from .config import load
from .errors import GeneratorError, StateDivergenceError
from .online import OnlineSystem, weights_document
from .runner import report_document, run_eval, run_sweep, write_json, write_sweep_csv


class _Exit(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _load_config(args):
    cfg = load(args.config) if args.config else load_default()
    if getattr(args, "seed", None) is not None:
        cfg["task"]["seed"] = args.seed
    return cfg


def load_default():
    from .config import resolve

    return resolve({})


def cmd_generate(args):
    if args.task == "narma10":
        ds = bench.gen_narma10(args.len, args.seed)
    elif args.task == "mackey-glass":
        ds = bench.gen_mackey_glass(args.len, horizon=args.horizon)
    else:
        raise _Exit(1, f"unknown task {args.task!r}")
    if ds.seed is not None and ds.seed != args.seed:
        print(f"note: NARMA10 seed {args.seed} diverged, used seed {ds.seed}", file=sys.stderr)
    bench.write_csv(ds, args.out)
    return 0


def cmd_eval(args):
    cfg = _load_config(args)
    report = run_eval(cfg)
    weights_path = cfg["output"]["weights"]
    if weights_path:
        write_json(weights_document(report), weights_path)
    doc = report_document(report, weights_path)
    out = args.out or cfg["output"]["report"]
    if out:
        write_json(doc, out)
    else:
        json.dump(doc, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return 0


def cmd_sweep(args):
    cfg = _load_config(args)
    if not cfg.get("sweep"):
        raise _Exit(1, "config has no 'sweep' section")
    axes, rows = run_sweep(cfg, args.threads)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_sweep_csv(axes, rows, fh, timing=not args.no_timing)
    else:
        write_sweep_csv(axes, rows, sys.stdout, timing=not args.no_timing)
    return 0


def _parse_line(line: str):
    parts = [p.strip() for p in line.split(",")]
    if len(parts) not in (1, 2):
        raise ValueError("expected 'u' or 'u,d'")
    vals = [float(p) for p in parts]
    if not all(v == v and abs(v) != float("inf") for v in vals):
        raise ValueError("non-finite value")
    return vals[0], (vals[1] if len(vals) == 2 else None)


def cmd_stream(args):
    cfg = _load_config(args)
    if args.checkpoint:
        with open(args.checkpoint) as fh:
            doc = json.load(fh)
        if doc.get("kind") == "checkpoint":
            system = OnlineSystem.from_checkpoint(doc, cfg)
        else:
            system = OnlineSystem.from_config(cfg)
            system.warm_start(doc)
    else:
        system = OnlineSystem.from_config(cfg)
    out = sys.stdout
    for lineno, line in enumerate(sys.stdin, 1):
        if not line.strip():
            continue
        try:
            u, d = _parse_line(line)
        except ValueError as exc:
            print(f"line {lineno}: malformed input {line.strip()!r} ({exc}); skipped", file=sys.stderr)
            continue
        try:
            y = system.feed(u, d)
        except StateDivergenceError as exc:
            out.write(f"diverged step={system.t}\n")
            out.flush()
            raise _Exit(3, f"divergence at stream step {system.t}: {exc}") from None
        out.write(format(y, ".17g") + "\n")
        out.flush()
    path = args.out or cfg["output"]["weights"]
    if path:
        write_json(system.checkpoint(), path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgedfr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a benchmark dataset as CSV")
    g.add_argument("--task", default="narma10", choices=["narma10", "mackey-glass"])
    g.add_argument("--len", type=int, default=4000)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--horizon", type=int, default=1)
    g.add_argument("-o", "--out", required=True)
    g.add_argument("--config", help=argparse.SUPPRESS)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("eval", help="train online, infer on the test split, print a JSON report")
    e.add_argument("--config")
    e.add_argument("--seed", type=int, help="override task.seed")
    e.add_argument("-o", "--out", help="write the report here instead of stdout")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="evaluate a grid of configurations, print a CSV table")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, help="override task.seed")
    s.add_argument("-o", "--out")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--no-timing", action="store_true", help="leave duration_ms empty")
    s.set_defaults(func=cmd_sweep)

    st = sub.add_parser("stream", help="online inference/training over stdin lines 'u' or 'u,d'")
    st.add_argument("--config")
    st.add_argument("--checkpoint", help="resume from a checkpoint or warm-start from a weights file")
    st.add_argument("-o", "--out", help="checkpoint written at end of input")
    st.set_defaults(func=cmd_stream)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Exit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (StateDivergenceError, GeneratorError) as exc:
        print(f"error: divergence: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: invalid parameter: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
