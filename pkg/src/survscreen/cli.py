"""Command-line entry point.

    survscreen run [--config FILE] [--sizes 500,1000] [--censoring 0.1,0.5] ...
    survscreen pipeline data.csv [--correlated]
    survscreen simulate --n 1000 --censoring 0.1 --rho 0 --output ds.csv

Exit status is 0 on success, 2 for configuration or usage errors and 3 for
file errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .datagen import ScenarioSpec, dump_dataset, generate_dataset
from .metrics import MODELS
from .pipeline import CsvFormatError, ingest_csv, recommended_pipeline
from .runner import FORMATS, GridConfig, run_grid

EXIT_CONFIG = 2
EXIT_IO = 3


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(v) for v in _items(text))


def _ints(text):
    return tuple(int(v) for v in _items(text))


def _items(text):
    items = tuple(v.strip() for v in str(text).split(","))
    if not all(items):
        raise ValueError(f"empty item in list {text!r}")
    return items


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# config key -> (GridConfig field, parser)
CONFIG_KEYS = {
    "sizes": ("sample_sizes", _ints),
    "censoring": ("censoring_rates", _floats),
    "rho": ("correlations", _floats),
    "replicates": ("replicates", int),
    "seed": ("master_seed", int),
    "models": ("models", _items),
    "with-ph-test": ("with_ph_test", _bool),
    "output": ("output_path", str),
    "format": ("format", str),
    "workers": ("workers", int),
    "ph-output": ("ph_output_path", str),
}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into GridConfig keyword arguments.

    Keys are the long CLI flag names without dashes (``sizes``, ``with-ph-test``,
    ...); underscores are accepted in place of hyphens.  ``#`` starts a comment.
    """
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split(sep, 1))
        key = key.lower().replace("_", "-").lstrip("-")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        name, conv = CONFIG_KEYS[key]
        try:
            out[name] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    return out


def load_config(path) -> dict:
    path = Path(path)
    return parse_config_text(path.read_text(), str(path))


def build_config(args) -> GridConfig:
    """Merge a config file (if any) with command-line flags; flags win."""
    values = load_config(args.config) if args.config else {}
    for key, (name, _) in CONFIG_KEYS.items():
        v = getattr(args, key.replace("-", "_"))
        if v is not None:
            values[name] = v
    try:
        return GridConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _arg(conv):
    # argparse reports ValueError/TypeError from a type callable as a usage error
    def parse(text):
        try:
            return conv(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    parse.__name__ = getattr(conv, "__name__", "value")
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="survscreen",
                                     description="Feature screening benchmark for time-to-event data.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario grid and write the report")
    run.add_argument("--config", help="key = value file; flags override it")
    run.add_argument("--sizes", type=_arg(_ints), help="sample sizes, comma separated")
    run.add_argument("--censoring", type=_arg(_floats), help="censoring rates, comma separated")
    run.add_argument("--rho", type=_arg(_floats), help="true-feature correlations")
    run.add_argument("--replicates", type=int)
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--models", type=_arg(_items), help=f"subset of {','.join(MODELS)}")
    run.add_argument("--with-ph-test", type=_arg(_bool), nargs="?", const=True, default=None,
                     help="also write per-feature PH diagnostics")
    run.add_argument("--output", help="report path (default: standard output)")
    run.add_argument("--ph-output", help="PH diagnostics path (default: ph_diagnostics.csv)")
    run.add_argument("--format", choices=FORMATS)
    run.add_argument("--workers", type=int)
    run.add_argument("--quiet", action="store_true", help="no progress on standard error")

    pipe = sub.add_parser("pipeline", help="run the Gaussian-first screening pipeline on a CSV")
    pipe.add_argument("csv", help="file with header time,event,<features...>")
    pipe.add_argument("--correlated", action="store_true",
                      help="report the Cox refit ranking as primary")
    pipe.add_argument("--alpha", type=float, default=0.05)

    sim = sub.add_parser("simulate", help="write one simulated dataset as CSV")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--censoring", type=float, required=True)
    sim.add_argument("--rho", type=float, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--scenario-id", type=int, default=0)
    sim.add_argument("--replicate", type=int, default=0)
    sim.add_argument("--output", required=True)
    return parser


def _cmd_run(args) -> int:
    config = build_config(args)
    progress = None if args.quiet else (lambda line: print(line, file=sys.stderr, flush=True))
    run_grid(config, progress=progress)
    return 0


def _names(ds, features):
    return [ds.feature_names[f - 1] for f in features]


def _cmd_pipeline(args) -> int:
    ds = ingest_csv(args.csv)
    res = recommended_pipeline(ds, correlated=args.correlated, alpha=args.alpha)
    out = sys.stdout
    print(f"subjects: {ds.n}  events: {int(ds.event.sum())}  features: {ds.n_features}", file=out)
    print(f"selected (p < {args.alpha:g}): {', '.join(_names(ds, res.selected_features)) or '-'}",
          file=out)
    print(f"gaussian ranking: {', '.join(_names(ds, res.gaussian_ranking)) or '-'}", file=out)
    if res.cox_refit_error is not None:
        print(f"cox refit failed: {res.cox_refit_error.kind}: {res.cox_refit_error.message}",
              file=out)
    else:
        print(f"cox refit ranking: {', '.join(_names(ds, res.cox_refit_ranking)) or '-'}",
              file=out)
    print(f"primary: {res.primary}", file=out)
    return 0


def _cmd_simulate(args) -> int:
    if args.replicate < 0:
        raise ConfigError("--replicate must be nonnegative")
    try:
        spec = ScenarioSpec(n=args.n, censoring_rate=args.censoring, rho=args.rho,
                            replicates=max(1, args.replicate + 1), master_seed=args.seed,
                            scenario_id=args.scenario_id)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    path = dump_dataset(generate_dataset(spec, args.replicate), args.output)
    print(f"wrote {path}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"run": _cmd_run, "pipeline": _cmd_pipeline, "simulate": _cmd_simulate}[args.command]
    try:
        return handler(args)
    except (ConfigError, CsvFormatError) as exc:
        print(f"survscreen: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"survscreen: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
