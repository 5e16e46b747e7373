"""Command-line entry point: profile, generate, prompt, validate, evaluate, tstr, report.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .errors import TabsynthError
from .generator import GenerationConfig, generate_with_manifest, save_manifest
from .metrics import evaluate
from .model import Schema, load_schema, load_table, save_table
from .profile import ProfileOptions, extract_profile, load_profile, save_profile
from .promptkit import emit_prompt, validate_dataset, validation_schema
from .reporting import (build_comparison, comparison_csv, comparison_json, rank_trials,
                        ranking_to_dict)
from .tstr import TSTRConfig, run_tstr

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_header(path: str) -> list[str]:
    with open(path, newline="", encoding="utf-8-sig") as fh:
        return next(csv.reader(fh), [])


def _labelled(items: Sequence[str] | None, flag: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for item in items or ():
        label, sep, value = item.partition("=")
        if not sep or not label or not value:
            raise UsageError(f"{flag} expects LABEL=VALUE, got {item!r}")
        if label in out:
            raise UsageError(f"{flag}: duplicate label {label!r}")
        out[label] = value
    return out


def _load_json(path: str) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# -- subcommands ----------------------------------------------------------------

def cmd_profile(args) -> int:
    schema = load_schema(args.schema)
    table = load_table(args.real, schema)
    options = ProfileOptions(
        threshold=args.threshold,
        skew_threshold=args.skew_threshold,
        correlation_columns=tuple(args.correlation_columns) if args.correlation_columns else None,
        bmi_column=args.bmi_column,
    )
    profile = extract_profile(table, options)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_profile(profile, args.out)
    print(f"profiled {table.n_rows} rows, {len(profile.flagged_correlations)} flagged correlation(s)"
          f" -> {args.out}", file=sys.stderr)
    return EXIT_OK


def _trial_path(out: Path, i: int, trials: int) -> Path:
    if trials == 1:
        return out
    width = max(2, len(str(trials)))
    return out.with_name(f"{out.stem}_trial{i + 1:0{width}d}{out.suffix}")


def cmd_generate(args) -> int:
    profile = load_profile(args.profile)
    n = args.n if args.n is not None else profile.n
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tables, paths = [], []
    for i in range(args.trials):
        config = GenerationConfig(
            n=n, seed=args.seed + i, correlation_tolerance=args.tolerance,
            max_calibration_iters=args.max_iters, match_moments=not args.literal_truncation,
            workers=args.workers)
        table, manifest = generate_with_manifest(profile, config)
        path = _trial_path(out, i, args.trials)
        save_table(table, path)
        save_manifest(manifest, path.with_suffix(".manifest.json"))
        tables.append(table)
        paths.append(path)
        print(f"wrote {table.n_rows} rows -> {path}", file=sys.stderr)
    if args.trials > 1:
        rankings = rank_trials(profile, tables)
        doc = ranking_to_dict(rankings, [p.name for p in paths])
        rank_path = args.ranking or str(out.with_name(f"{out.stem}_ranking.json"))
        _write_text(rank_path, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_prompt(args) -> int:
    profile = load_profile(args.profile)
    n = args.n if args.n is not None else profile.n
    _write_text(args.out, emit_prompt(profile, n))
    return EXIT_OK


def cmd_validate(args) -> int:
    profile = load_profile(args.profile)
    schema = validation_schema(profile, _csv_header(args.data))
    table = load_table(args.data, schema, check_domain=False)
    report = validate_dataset(table, profile, expected_n=args.n)
    if args.out:
        _write_text(args.out, report.to_json())
    sys.stderr.write(report.summary())
    return EXIT_OK if report.passed else EXIT_INVALID


def _real_and_synth(args) -> tuple[Schema, Any, Any]:
    schema = load_schema(args.schema)
    real = load_table(args.real, schema)
    synth = load_table(args.synth, schema)
    return schema, real, synth


def cmd_evaluate(args) -> int:
    schema, real, synth = _real_and_synth(args)
    pairs = None
    if args.profile:
        pairs = load_profile(args.profile).flagged_correlations
    report = evaluate(real, synth, schema, flagged_pairs=pairs, ks_log_columns=args.ks_log or (),
                      numeric_tolerance=args.numeric_tolerance)
    _write_text(args.out, report.to_json())
    if args.csv:
        _write_text(args.csv, report.to_csv())
    return EXIT_OK


def cmd_tstr(args) -> int:
    _, real, synth = _real_and_synth(args)
    config = TSTRConfig(target=args.target, n_stages=args.stages, seed=args.seed,
                        include_log_columns=args.include_log)
    report = run_tstr(synth, real, config=config)
    _write_text(args.out, report.to_json())
    b = report.best
    print(f"best threshold {b.threshold:.2f}: precision {b.precision:.3f}, recall {b.recall:.3f}, "
          f"F1 {b.f1:.3f}", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    fidelity = {k: _load_json(v) for k, v in _labelled(args.fidelity, "--fidelity").items()}
    tstr = {k: _load_json(v) for k, v in _labelled(args.tstr, "--tstr").items()}
    if not fidelity and not tstr:
        raise UsageError("report needs at least one --fidelity or --tstr input")
    groups = {k: [s for s in v.split(",") if s] for k, v in _labelled(args.group, "--group").items()}
    try:
        doc = build_comparison(fidelity, tstr, groups)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    _write_text(args.out, comparison_json(doc))
    if args.csv:
        _write_text(args.csv, comparison_csv(doc, args.places))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with option defaults; command-line flags win")

    parser = argparse.ArgumentParser(prog="tabsynth", description=__doc__.splitlines()[0],
                                     parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("profile", parents=[common], help="summarize a real CSV into a profile JSON")
    p.add_argument("--real", required=True, help="real data CSV")
    p.add_argument("--schema", required=True, help="schema JSON")
    p.add_argument("--out", required=True, help="profile JSON to write")
    p.add_argument("--threshold", type=float, default=0.5, help="flag pairs with |r| above this")
    p.add_argument("--skew-threshold", type=float, default=1.0)
    p.add_argument("--correlation-columns", nargs="+")
    p.add_argument("--bmi-column", help="derive Height and Weight from this BMI column")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("generate", parents=[common], help="sample a synthetic CSV from a profile")
    p.add_argument("--profile", required=True)
    p.add_argument("--n", type=int, help="rows to generate (default: profile size)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV to write; a .manifest.json is written beside it")
    p.add_argument("--trials", type=int, default=1, help="independent datasets with seeds seed..seed+k-1")
    p.add_argument("--ranking", help="ranking JSON path when --trials > 1")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--tolerance", type=float, default=0.05, help="correlation tolerance")
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--literal-truncation", action="store_true",
                   help="truncate normal(mean, sd) directly instead of matching moments")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("prompt", parents=[common], help="write the plain-language generation prompt")
    p.add_argument("--profile", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--out", help="text file (default: stdout)")
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("validate", parents=[common], help="check a generated CSV against a profile")
    p.add_argument("--profile", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--n", type=int, help="expected row count (default: profile size)")
    p.add_argument("--out", help="validation report JSON")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("evaluate", parents=[common], help="fidelity and privacy scores")
    p.add_argument("--real", required=True)
    p.add_argument("--synth", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--profile", help="take flagged correlation pairs from this profile")
    p.add_argument("--ks-log", nargs="+", metavar="COLUMN", help="compare these columns on log scale")
    p.add_argument("--numeric-tolerance", type=float, default=0.0)
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--csv", help="flat per-column CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tstr", parents=[common], help="train on synthetic, test on real")
    p.add_argument("--real", required=True)
    p.add_argument("--synth", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--target", default="KPSDeterioration")
    p.add_argument("--stages", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--include-log", action="store_true", help="add log-scale continuous features")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tstr)

    p = sub.add_parser("report", parents=[common], help="merge reports into one comparison table")
    p.add_argument("--fidelity", action="append", metavar="LABEL=PATH")
    p.add_argument("--tstr", action="append", metavar="LABEL=PATH")
    p.add_argument("--group", action="append", metavar="NAME=LABEL,LABEL",
                   help="averaged column over existing labels")
    p.add_argument("--places", type=int, default=3)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_report)
    return parser


def _config_defaults(path: str, command: str, known: set[str]) -> dict[str, Any]:
    """Top-level keys apply to every command that has them; a [command] table overrides them."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    out = {k.replace("-", "_"): v for k, v in data.items() if not isinstance(v, dict)}
    out = {k: v for k, v in out.items() if k in known}
    section = data.get(command, {})
    if not isinstance(section, dict):
        raise UsageError(f"config section [{command}] must be a table")
    section = {k.replace("-", "_"): v for k, v in section.items()}
    unknown = sorted(set(section) - known)
    if unknown:
        raise UsageError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    out.update(section)
    return out


def _subparser_action(parser: argparse.ArgumentParser) -> argparse._SubParsersAction:
    return next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))


def _prescan(parser: argparse.ArgumentParser, argv: list[str]) -> tuple[str | None, str | None]:
    """Find the subcommand and --config value before full parsing."""
    commands = set(_subparser_action(parser).choices)
    command = config = None
    it = iter(range(len(argv)))
    for i in it:
        tok = argv[i]
        if tok == "--config" and i + 1 < len(argv):
            config = argv[i + 1]
            next(it, None)
        elif tok.startswith("--config="):
            config = tok.split("=", 1)[1]
        elif command is None and tok in commands:
            command = tok
    return command, config


def _apply_config(parser: argparse.ArgumentParser, command: str, path: str) -> None:
    sp = _subparser_action(parser).choices[command]
    known = {a.dest for a in sp._actions} - {"help", "config"}
    defaults = _config_defaults(path, command, known)
    sp.set_defaults(**defaults)
    # required options may come from the config
    for action in sp._actions:
        if action.dest in defaults:
            action.required = False


def run_command(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        command, config = _prescan(parser, argv)
        if command and config:
            _apply_config(parser, command, config)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
        if getattr(args, "trials", 1) < 1 or getattr(args, "workers", 1) < 1:
            raise UsageError("--trials and --workers must be positive")
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"tabsynth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TabsynthError, OSError, ValueError, KeyError, tomllib.TOMLDecodeError) as exc:
        print(f"tabsynth: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main(argv: Sequence[str] | None = None) -> int:
    return run_command(argv)


if __name__ == "__main__":
    sys.exit(main())
