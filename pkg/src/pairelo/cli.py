"""Operator command line: fits, reports, corpus builds, simulation, serving.

Thin orchestration over the library modules.  Machine-readable output
goes to stdout or ``--out`` files; diagnostics and progress go to
stderr.  Exit codes: 0 on success, 1 on any domain or I/O error
(message on stderr), 2 on bad usage (argparse).

Every command is deterministic given the same inputs, flags, and seed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .analysis import (
    EquivalentQualityTable,
    bitrate_reduction,
    default_ladders,
    equivalent_quality_table,
    family_sort_key,
    fit_to_reference_rows,
    format_elo_table,
    load_reference_table,
    parse_reference_table,
)
from .domain import StudyConfig, parse_method_id, validate_study_config
from .errors import ConfigError, PairEloError
from .ingestion import CorpusManifest, build_corpus, corpus_stats, parse_answers
from .model import fit_map
from .simulate import (
    comparisons_to_csv,
    recovery_report,
    simulate_study,
    simulation_config,
)

DEFAULT_TRUE_ELOS = {
    f"jpegli-q{55 + 5 * i}-yuv444": 1600.0 + 100.0 * i for i in range(8)
}
DEFAULT_RATER_NOISES = {f"r{i}": 0.02 * i for i in range(1, 6)}


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _info(message: str) -> None:
    print(message, file=sys.stderr)


def _load_json(path: str):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _load_config(path: str) -> StudyConfig:
    return validate_study_config(_load_json(path))


def _write_text(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _parse_value_spec(spec: str, what: str) -> dict[str, float]:
    """``name=value,name=value`` pairs, or ``@file.json`` with an object."""
    if spec.startswith("@"):
        data = _load_json(spec[1:])
        if not isinstance(data, dict):
            raise ConfigError(f"{what}: {spec[1:]} must hold a JSON object")
        try:
            return {str(k): float(v) for k, v in data.items()}
        except (TypeError, ValueError):
            raise ConfigError(
                f"{what}: {spec[1:]} must map names to numbers") from None
    out: dict[str, float] = {}
    for part in spec.split(","):
        name, sep, value = part.partition("=")
        if not sep or not name.strip():
            raise ConfigError(f"{what}: expected name=value, got {part!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"{what}: {value!r} is not a number") from None
    return out


def _load_table(args) -> list:
    if getattr(args, "reference", False):
        return load_reference_table()
    if not args.table:
        raise ConfigError("give a per-method table file or --reference")
    return parse_reference_table(Path(args.table).read_text(encoding="utf-8"))


def _build_ladders(rows) -> dict:
    """Default ladders from table rows, skipping families too thin to
    interpolate (fewer than two rows with a bitrate)."""
    usable = [r for r in rows if math.isfinite(r.bpp)]
    by_family: dict[str, int] = {}
    for r in usable:
        family = parse_method_id(r.method)[0]
        by_family[family] = by_family.get(family, 0) + 1
    thin = sorted(f for f, n in by_family.items() if n < 2)
    if thin:
        _warn(f"skipping families with fewer than 2 bitrate rows: {thin}")
        usable = [r for r in usable if parse_method_id(r.method)[0] not in thin]
    if not usable:
        raise ConfigError("no rows with a bitrate; cannot build ladders")
    return default_ladders(usable)


def _equiv_table(ladders: dict, anchor: str) -> EquivalentQualityTable:
    if anchor not in ladders:
        raise ConfigError(
            f"anchor family {anchor!r} not among ladders {sorted(ladders)}")
    others = [ladders[f] for f in sorted(ladders, key=family_sort_key)
              if f != anchor]
    return equivalent_quality_table(ladders[anchor], others)


def cmd_fit(args) -> int:
    config = _load_config(args.config) if args.config else None
    comparisons, stats = parse_answers(
        Path(args.ratings),
        study_methods=config.method_ids() if config else None,
    )
    if stats.malformed:
        _warn(f"skipped {len(stats.malformed)} malformed rows "
              f"(of {stats.n_rows})")
    if not comparisons:
        raise ConfigError(f"no answers in {args.ratings}")
    fit = fit_map(
        comparisons,
        priors=config.priors if config else None,
        settings=config.fitter if config else None,
        config_fingerprint=config.fingerprint() if config else "",
    )
    for message in fit.warnings:
        _warn(message)
    bpp: dict[str, float] = {}
    if args.manifest:
        manifest = CorpusManifest.from_dict(_load_json(args.manifest))
        bpp = corpus_stats(manifest)
    elif config:
        bpp = {m.id: m.mean_bpp for m in config.methods
               if m.mean_bpp is not None}
    _write_text(format_elo_table(fit_to_reference_rows(fit, bpp)), args.out)
    _info(f"fit {fit.n_answers} answers from {stats.n_raters} raters; "
          f"converged={fit.converged}")
    return 0


def cmd_interp(args) -> int:
    table = _equiv_table(_build_ladders(_load_table(args)), args.anchor)
    _write_text(table.to_text(), args.out)
    return 0


def cmd_report(args) -> int:
    ladders = _build_ladders(_load_table(args))
    table = _equiv_table(ladders, args.anchor)
    doc = {
        "anchor": table.anchor_family,
        "columns": table.column_names(),
        "rows": [
            [row.method, row.elo] + [row.bitrates[f] for f in table.families]
            for row in table.rows
        ],
    }
    if args.reduction_at is not None:
        anchor_ladder = ladders[table.anchor_family]
        doc["bitrate_reduction_at"] = args.reduction_at
        doc["bitrate_reduction"] = {
            fam: bitrate_reduction(anchor_ladder, ladders[fam],
                                   args.reduction_at)
            for fam in sorted(ladders) if fam != table.anchor_family
        }
    if args.plot_data:
        series = {
            fam: [[p.bpp, p.elo] for p in lad.points]
            for fam, lad in sorted(ladders.items())
        }
        Path(args.plot_data).write_text(
            json.dumps({"families": series}, indent=2) + "\n",
            encoding="utf-8")
    _write_text(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def cmd_simulate(args) -> int:
    true_elos = (_parse_value_spec(args.elos, "--elos")
                 if args.elos else dict(DEFAULT_TRUE_ELOS))
    noises = (_parse_value_spec(args.noises, "--noises")
              if args.noises else dict(DEFAULT_RATER_NOISES))
    config = simulation_config(
        true_elos,
        seed=args.seed,
        n_images=args.images,
        golden_rate=args.golden_rate,
        golden_threshold=args.golden_threshold,
        refresh_every=args.refresh_every,
    )
    result = simulate_study(true_elos, noises, args.answers,
                            seed=args.seed, config=config)
    if args.ratings_out:
        comparisons_to_csv(result.comparisons, args.ratings_out)
        _info(f"wrote {len(result.comparisons)} answers to {args.ratings_out}")
    report = recovery_report(result)
    _write_text(report.to_text(), args.out)
    if result.n_blocked:
        _warn(f"{result.n_blocked} rater(s) were blocked by golden gating")
    return 0


def cmd_build_corpus(args) -> int:
    config = _load_config(args.config)
    templates = _load_json(args.templates) if args.templates else None
    manifest = build_corpus(
        config.images, config.methods, args.out_dir,
        templates=templates, parallelism=args.jobs,
    )
    manifest_path = args.manifest or str(Path(args.out_dir) / "manifest.json")
    Path(manifest_path).write_text(
        json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")
    _info(f"encoded {len(manifest.entries)} variants into {args.out_dir}; "
          f"manifest at {manifest_path}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    from .study import StudyStore

    config = _load_config(args.config)
    if args.seed is not None:
        raw = config.to_dict()
        raw["scheduler"]["seed"] = args.seed
        config = validate_study_config(raw)
    corpus = (CorpusManifest.from_dict(_load_json(args.corpus))
              if args.corpus else None)
    store = StudyStore(config, args.log, lease_seconds=args.lease)
    app = create_app(store, corpus=corpus)
    _info(f"serving study {config.study!r} on http://{args.host}:{args.port} "
          f"(event log: {args.log})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairelo",
        description="Pairwise image-quality studies: fit, report, simulate, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit elos from a ratings file")
    p.add_argument("ratings", help="CSV of pairwise answers")
    p.add_argument("--config", help="study config JSON (method filter, priors)")
    p.add_argument("--manifest", help="corpus manifest JSON supplying mean bpp")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("interp",
                       help="equivalent-quality table from a per-method table")
    p.add_argument("table", nargs="?",
                   help="per-method table (method,elo,p99Low,p99Hi,bpp)")
    p.add_argument("--reference", action="store_true",
                   help="use the shipped reference table instead of a file")
    p.add_argument("--anchor", default="libjpeg-turbo",
                   help="anchor encoder family (default libjpeg-turbo)")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser("report",
                       help="JSON report: table, savings, plot series")
    p.add_argument("table", nargs="?",
                   help="per-method table (method,elo,p99Low,p99Hi,bpp)")
    p.add_argument("--reference", action="store_true",
                   help="use the shipped reference table instead of a file")
    p.add_argument("--anchor", default="libjpeg-turbo")
    p.add_argument("--reduction-at", type=float, metavar="BPP",
                   help="also report fractional bitrate savings vs the "
                        "anchor at this anchor bitrate")
    p.add_argument("--plot-data", metavar="PATH",
                   help="write per-family (bpp, elo) series as JSON")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("simulate",
                       help="closed-loop synthetic study with known elos")
    p.add_argument("-n", "--answers", type=int, required=True,
                   help="number of answers to schedule")
    p.add_argument("--elos",
                   help="true elos, name=value pairs or @file.json "
                        "(default: 8 methods, 1600..2300)")
    p.add_argument("--noises",
                   help="rater noise rates, name=value pairs or @file.json "
                        "(default: 5 raters, 0.02..0.10)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--images", type=int, default=8,
                   help="synthetic image pool size")
    p.add_argument("--golden-rate", type=float, default=0.1)
    p.add_argument("--golden-threshold", type=int, default=None,
                   help="wrong goldens before blocking (default: gating off)")
    p.add_argument("--refresh-every", type=int, default=50,
                   help="answers between checkpoint refits")
    p.add_argument("--ratings-out", metavar="PATH",
                   help="also write the generated answers as a ratings CSV")
    p.add_argument("--out", help="recovery report file (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("build-corpus",
                       help="encode every (image, method) variant")
    p.add_argument("config", help="study config JSON with image source paths")
    p.add_argument("--out-dir", required=True, help="directory for variants")
    p.add_argument("--manifest",
                   help="manifest output path (default OUT_DIR/manifest.json)")
    p.add_argument("--templates", help="JSON of per-family command templates")
    p.add_argument("--jobs", type=int, default=1, help="parallel encodes")
    p.set_defaults(func=cmd_build_corpus)

    p = sub.add_parser("serve", help="run the rating service")
    p.add_argument("config", help="study config JSON")
    p.add_argument("--log", default="study-events.jsonl",
                   help="append-only event log path")
    p.add_argument("--corpus", help="corpus manifest JSON for image serving")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--lease", type=float, default=600.0,
                   help="seconds a served question stays reserved")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's scheduler seed")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PairEloError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
