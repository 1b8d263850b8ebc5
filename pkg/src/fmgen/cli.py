"""Command-line entry point: one subcommand per pipeline stage.

Exit codes: 0 success, 1 domain error (diagnostics, conflicts, invalid
input files), 2 usage error.  All results go to stdout, errors to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import service as service_module
from .config import (
    Conflict,
    Configuration,
    EngineError,
    apply_decision,
    finalize,
    init_config,
    parse_decisions,
    state_name,
    status,
)
from .frames import FrameError, parse_frames
from .generator import GenerateError, RuleError, generate, parse_rules, roundtrip_update
from .model import ModelError, count_variants, parse_model, validate_model
from .specxml import SpecError, emit_spec
from .widgets import serialize_tree, transform


class DomainFailure(Exception):
    """Raised internally to unify exit-code-1 handling."""

    def __init__(self, message: str, payload: dict | None = None):
        super().__init__(message)
        self.payload = payload or {"error": message}


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DomainFailure(f"cannot read {path}: {e.strerror}") from None


def _load_model(path: str):
    return parse_model(_read(path))


def _configured(args: argparse.Namespace) -> Configuration:
    diagram = _load_model(args.model)
    c = init_config(diagram)
    if args.decisions:
        for feature, value in parse_decisions(_read(args.decisions)):
            outcome = apply_decision(c, feature, value)
            if isinstance(outcome, Conflict):
                raise DomainFailure(
                    outcome.render(),
                    {"conflict": {"rejected": outcome.rejected, "reasons": outcome.reasons()}},
                )
            c = outcome[0]
    return c


def _finalized(args: argparse.Namespace) -> Configuration:
    c = _configured(args)
    outcome = finalize(c, args.policy)
    if isinstance(outcome, Conflict):
        raise DomainFailure(
            outcome.render(),
            {"conflict": {"rejected": outcome.rejected, "reasons": outcome.reasons()}},
        )
    return outcome


def cmd_validate(args: argparse.Namespace) -> int:
    diagnostics = validate_model(_load_model(args.model))
    if args.format == "json":
        print(json.dumps({
            "ok": not diagnostics,
            "diagnostics": [
                {"severity": di.severity, "message": di.message, "feature": di.feature}
                for di in diagnostics
            ],
        }, indent=2, sort_keys=True))
    else:
        if not diagnostics:
            print("ok")
        for di in diagnostics:
            print(di.render())
    return 1 if diagnostics else 0


def cmd_count(args: argparse.Namespace) -> int:
    print(count_variants(_load_model(args.model)))
    return 0


def cmd_transform(args: argparse.Namespace) -> int:
    tree = transform(_load_model(args.model))
    sys.stdout.write(serialize_tree(tree))
    return 0


def cmd_configure(args: argparse.Namespace) -> int:
    c = _configured(args)
    result = status(c)
    if args.format == "json":
        print(json.dumps({
            "complete": result.complete,
            "states": c.states_by_name(),
            "obligations": [
                {"kind": ob.kind, "subject": ob.subject, "members": list(ob.members)}
                for ob in result.obligations
            ],
        }, indent=2, sort_keys=True))
    else:
        print("complete" if result.complete else "incomplete")
        for name in c.diagram.feature_names():
            print(f"{name} = {state_name(c.derived_state[name])}")
        for ob in result.obligations:
            print(f"obligation {ob.render()}")
    return 0


def cmd_spec(args: argparse.Namespace) -> int:
    sys.stdout.write(emit_spec(_finalized(args)))
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    diagram = _load_model(args.model)
    c = _finalized(args)
    library = parse_frames(_read(args.frames))
    rules = parse_rules(_read(args.rules), diagram, library)
    overlay = None
    if args.overlay:
        overlay = json.loads(_read(args.overlay))
    manifest = generate(diagram, c, library, rules, args.out, overlay=overlay)
    print(str(Path(args.out) / "MANIFEST"))
    if args.format == "json":
        print(json.dumps({
            "inputs": manifest.inputs_digest,
            "entries": [
                {"path": p, "bytes": size, "digest": digest}
                for p, size, digest in manifest.entries
            ],
        }, indent=2, sort_keys=True))
    return 0


def cmd_roundtrip(args: argparse.Namespace) -> int:
    library = parse_frames(_read(args.frames))
    rules = parse_rules(_read(args.rules))
    report = roundtrip_update(args.out, library, rules)
    if args.format == "json":
        print(json.dumps({
            "differences": [
                {"target": f.target, "key": f.key, "kind": f.kind,
                 "recorded": f.recorded, "current": f.current}
                for f in report.differences
            ],
        }, indent=2, sort_keys=True))
    else:
        for f in report.differences:
            print(f"{f.kind}\t{f.target}\t{f.key}")
    if args.export:
        export_path = Path(args.export)
        export_path.write_text(json.dumps(report.overlay(), indent=2, sort_keys=True) + "\n")
        print(f"overlay written to {export_path}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    server = service_module.make_server(args.port, args.output_root)
    host, port = server.server_address[:2]
    print(f"listening on http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fmgen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_format(p: argparse.ArgumentParser) -> None:
        p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("validate", help="check a model file")
    p.add_argument("model")
    add_format(p)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("count", help="exact number of valid configurations")
    p.add_argument("model")
    p.set_defaults(fn=cmd_count)

    p = sub.add_parser("transform", help="emit the widget tree as JSON")
    p.add_argument("model")
    p.set_defaults(fn=cmd_transform)

    p = sub.add_parser("configure", help="apply a decision file and report status")
    p.add_argument("--model", required=True)
    p.add_argument("--decisions")
    add_format(p)
    p.set_defaults(fn=cmd_configure)

    p = sub.add_parser("spec", help="emit the 0/1 specification document")
    p.add_argument("--model", required=True)
    p.add_argument("--decisions")
    p.add_argument("--policy", choices=("strict", "default-off"), default="strict")
    p.set_defaults(fn=cmd_spec)

    p = sub.add_parser("generate", help="generate the output tree")
    p.add_argument("--model", required=True)
    p.add_argument("--decisions")
    p.add_argument("--frames", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--policy", choices=("strict", "default-off"), default="strict")
    p.add_argument("--overlay", help="JSON overlay from 'roundtrip --export'")
    add_format(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("roundtrip", help="diff edited output against the last run")
    p.add_argument("--frames", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--export", help="write in-place edits as an overlay file")
    add_format(p)
    p.set_defaults(fn=cmd_roundtrip)

    p = sub.add_parser("serve", help="run the HTTP configuration service")
    p.add_argument("--port", type=int, default=8734)
    p.add_argument("--output-root", default="generated")
    p.set_defaults(fn=cmd_serve)

    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except DomainFailure as e:
        print(str(e), file=sys.stderr)
        return 1
    except (ModelError, EngineError, FrameError, RuleError, GenerateError, SpecError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
