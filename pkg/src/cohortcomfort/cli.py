"""Command-line entry point: ``cohort-comfort {ingest,cohorts,evaluate,synth}``."""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .errors import CohortComfortError, ConfigurationError, InputError, RecipeIncompatibleError

try:  # pragma: no cover
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RECIPE = 3
EXIT_RUNTIME = 4

logger = logging.getLogger("cohortcomfort")


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, InputError):
        return EXIT_INPUT
    if isinstance(exc, ConfigurationError):
        return EXIT_RECIPE
    return EXIT_RUNTIME


def _setup_logging():
    level = os.environ.get("COHORT_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    if "," in text:
        return [_parse_value(t) for t in text.split(",")]
    return text


def parse_params(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigurationError(f"--params expects KEY=VAL, got {item!r}")
        key, val = item.split("=", 1)
        out[key.strip()] = _parse_value(val.strip())
    return out


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    from .data import IngestSummary, ingest, load_dataset_spec, write_canonical

    spec = load_dataset_spec(args.config)
    summary = IngestSummary()
    records = ingest(spec, summary=summary)
    write_canonical(records, args.out)
    print(summary.to_text())
    for r in records:
        print(f"{r.occupant_id}: {len(r)} rows")
    return EXIT_OK


def _load_records(path):
    from .data import read_canonical

    return read_canonical(path)


def cmd_cohorts(args) -> int:
    from .cohort import TrainingConfig, build_cohorts, make_recipe, save_cohort_set
    from .data import ONBOARDING_FEATURES
    from .learn import grid_by_name

    records = _load_records(args.data)
    recipe = make_recipe(args.recipe, **parse_params(args.params))
    features = tuple(args.features) if args.features else tuple(
        f for f in records[0].feature_names if f not in ONBOARDING_FEATURES)
    training = TrainingConfig(features, ONBOARDING_FEATURES, tuple(grid_by_name(args.grid)), args.folds)
    cs = build_cohorts(recipe, records, training, args.seed)
    save_cohort_set(cs, args.out)
    print(f"recipe {recipe.name}: {cs.k} cohorts")
    for i, c in enumerate(cs.cohorts):
        print(f"  cohort {i}: {len(c.members)} occupants, {c.n_rows} rows")
    if cs.excluded:
        print(f"  excluded: {', '.join(cs.excluded)}")
    return EXIT_OK


def _resolve_records(raw: dict, config_path: Path):
    from .data import ingest, load_dataset_spec

    exp = raw.get("experiment", {})
    base = config_path.parent
    if exp.get("data"):
        return _load_records(base / exp["data"]), str(base / exp["data"])
    if exp.get("dataset_config"):
        path = base / exp["dataset_config"]
        return ingest(load_dataset_spec(path)), str(path)
    raise ConfigurationError("[experiment] needs 'data' or 'dataset_config'")


def cmd_evaluate(args) -> int:
    from dataclasses import replace

    from .evaluation import ExperimentFailed, load_experiment_config, run_experiment

    config_path = Path(args.config)
    config, raw = load_experiment_config(config_path)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.iterations is not None:
        config = replace(config, iterations=args.iterations)
    workers = args.workers if args.workers is not None else int(raw.get("experiment", {}).get("workers", 1))
    records, data_path = _resolve_records(raw, config_path)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "FAILED").unlink(missing_ok=True)
    started = _now()

    def progress(i, total):
        print(f"iteration {i + 1}/{total} done", file=sys.stderr, flush=True)

    config_hash = hashlib.sha256(json.dumps(config.to_dict(), sort_keys=True).encode()).hexdigest()
    try:
        report = run_experiment(config, records, workers=workers, progress=progress)
    except ExperimentFailed as exc:
        exc.partial.write(out)
        _atomic_write(out / "FAILED", f"{exc}\n")
        raise
    paths = report.write(out)
    manifest = {
        "config_hash": config_hash,
        "config_path": str(config_path),
        "data": data_path,
        "seed": config.seed,
        "iterations": config.iterations,
        "workers": workers,
        "version": __version__,
        "started": started,
        "finished": _now(),
        "outputs": {k: str(v) for k, v in paths.items()},
    }
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
    summary = report.summary()["scores"]
    for approach, kinds in summary.items():
        for kind, s in kinds.items():
            print(f"{approach:>20s} {kind:>5s}: median {s['median']:.3f} (IQR {s['q1']:.3f}-{s['q3']:.3f})")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import generate, load_population_spec, write_population

    spec = load_population_spec(args.spec)
    if args.seed is not None:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
    records, types = generate(spec)
    write_population(records, types, args.out)
    print(f"wrote {len(records)} occupants x {spec.rows_per_occupant} rows to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cohort-comfort", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="raw dataset files -> canonical dataset file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("cohorts", help="build and serialize a cohort set")
    s.add_argument("--data", required=True, help="canonical dataset file")
    s.add_argument("--recipe", required=True)
    s.add_argument("--params", nargs="*", default=[], metavar="KEY=VAL")
    s.add_argument("--features", nargs="*", help="longitudinal features (default: all in the file)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--grid", default="desk", choices=("desk", "full"))
    s.add_argument("--folds", type=int, default=5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_cohorts)

    s = sub.add_parser("evaluate", help="run the repeated evaluation protocol")
    s.add_argument("--config", required=True)
    s.add_argument("--workers", type=int)
    s.add_argument("--seed", type=int, help="override [experiment] seed")
    s.add_argument("--iterations", type=int, help="override [experiment] iterations")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("synth", help="generate a synthetic population")
    s.add_argument("--spec", required=True)
    s.add_argument("--seed", type=int, help="override the spec seed")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CohortComfortError as exc:
        code = exit_code(exc)
        if isinstance(exc, RecipeIncompatibleError):
            code = EXIT_RECIPE
        print(f"error: {exc}", file=sys.stderr)
        return code
    except (FileNotFoundError, tomllib.TOMLDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT if args.command in ("ingest", "synth") else EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
