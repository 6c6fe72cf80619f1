"""Command-line entry points.

Subcommands: synth, label, train-msp, train, eval, compare, pipeline,
config. Run-wide settings come from built-in defaults, overridden by an
optional key=value config file (--config), overridden by flags.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from . import forecaster as fc
from . import guidance, labeling, metrics, msp, synth
from .data import SeriesFrame, align_and_downsample, load_csv, save_csv, sliding_windows
from .errors import ConfigError, DataError, NumericError
from .pipeline import RunConfig, evaluate_forecaster, load_aligned, run_pipeline, split_with_states

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _parse_horizons(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"horizons must be comma-separated integers, got {text!r}") from None


def _load_config_file(path: str) -> dict[str, str]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"no such config file: {path}")
    values: dict[str, str] = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values


_BOOL_STRINGS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _coerce(key: str, value: str, target_type) -> object:
    try:
        if target_type is bool:
            lowered = value.lower()
            if lowered not in _BOOL_STRINGS:
                raise ValueError(value)
            return _BOOL_STRINGS[lowered]
        if target_type is int:
            return int(value)
        if target_type is float:
            return float(value)
        if target_type is list:
            return _parse_horizons(value)
        return value
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {value!r}") from None


def merge_run_config(args: argparse.Namespace) -> RunConfig:
    """Defaults <- config file <- explicit flags (flags win)."""
    file_values = _load_config_file(args.config) if getattr(args, "config", None) else {}
    kwargs = {}
    for f in fields(RunConfig):
        target_type = {"horizons": list}.get(f.name, type(getattr(RunConfig(), f.name)))
        if getattr(args, f.name, None) is not None:
            kwargs[f.name] = getattr(args, f.name)
        elif f.name in file_values:
            kwargs[f.name] = _coerce(f.name, file_values[f.name], target_type)
    unknown = set(file_values) - {f.name for f in fields(RunConfig)}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**kwargs)


def _add_run_flags(p: argparse.ArgumentParser, include_horizon_sweep: bool = True) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--data", dest="data_csv", help="load series CSV")
    p.add_argument("--states", dest="states_csv", help="state labels CSV")
    p.add_argument("--checkpoint-dir", dest="checkpoint_dir")
    p.add_argument("--report-dir", dest="report_dir")
    p.add_argument("--lookback", type=int, dest="lookback")
    if include_horizon_sweep:
        p.add_argument("--horizons", type=_parse_horizons, dest="horizons")
    p.add_argument("--lr", type=float, dest="lr")
    p.add_argument("--batch", type=int, dest="batch")
    p.add_argument("--patience", type=int, dest="patience")
    p.add_argument("--max-epochs", type=int, dest="max_epochs")
    p.add_argument("--alpha", type=float, dest="alpha")
    p.add_argument("--weight-mode", choices=guidance.WEIGHT_MODES, dest="weight_mode")
    p.add_argument("--w", type=int, dest="w", help="labeling window size")
    p.add_argument("--min-s", type=int, dest="min_s")
    p.add_argument("--max-s", type=int, dest="max_s")
    p.add_argument("--seed", type=int, dest="seed")
    p.add_argument("--period-seconds", type=int, dest="period_seconds")
    p.add_argument("--forecaster-kind", choices=("linear", "mlp"), dest="forecaster_kind")
    p.add_argument("--hidden", type=int, dest="hidden")
    p.add_argument(
        "--flat-linear",
        action="store_false",
        dest="per_variable",
        default=None,
        help="use one flattened linear map instead of per-variable maps",
    )
    p.add_argument("--trunk-channels", type=int, dest="trunk_channels")
    p.add_argument("--ue-channels", type=int, dest="ue_channels")
    p.add_argument("--kernel-width", type=int, dest="kernel_width")


def cmd_synth(args: argparse.Namespace) -> int:
    overrides = {}
    for key in ("length", "noise_sigma", "spike_rate", "seed"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if args.no_household_total:
        overrides["include_household_total"] = False
    if args.appliances:
        config = synth.config_from_json(args.appliances, **overrides)
    else:
        config = synth.default_household()
        for key, value in overrides.items():
            setattr(config, key, value)
    frame, truth = synth.generate(config)
    save_csv(frame, args.out)
    n_apps = len(config.appliances)
    truth_frame = SeriesFrame(
        frame.timestamps, frame.values[:, :n_apps], frame.variable_names[:n_apps]
    )
    labeling.save_states_csv(truth, truth_frame, args.states_out)
    print(f"wrote {args.out} ({frame.length} rows, {frame.n_variables} columns)")
    print(f"wrote {args.states_out} (+ sidecar)")
    return EXIT_OK


def cmd_label(args: argparse.Namespace) -> int:
    config = merge_run_config(args)
    frame = load_csv(config.data_csv)
    frame = align_and_downsample(frame, config.period_seconds)
    profile = labeling.identify_states(
        frame, w=config.w, min_s=config.min_s, max_s=config.max_s, seed=config.seed
    )
    labeling.save_states_csv(profile, frame, args.out)
    counts = ",".join(str(int(n)) for n in profile.counts)
    print(f"wrote {args.out} (+ sidecar); states per variable: {counts}")
    return EXIT_OK


def _prepare_windows(config: RunConfig, horizon: int):
    frame, profile = load_aligned(config)
    frames, labels, stats = split_with_states(frame, profile)
    windows = [
        sliding_windows(f, lab, config.lookback, horizon) for f, lab in zip(frames, labels)
    ]
    return frame, profile, windows, stats


def cmd_train_msp(args: argparse.Namespace) -> int:
    config = merge_run_config(args)
    frame, profile, (train_w, val_w, _), _ = _prepare_windows(config, args.horizon)
    msp_config = msp.MspConfig(
        lookback=config.lookback,
        horizon=args.horizon,
        n_variables=frame.n_variables,
        class_counts=[int(n) for n in profile.counts],
        trunk_channels=config.trunk_channels,
        ue_channels=config.ue_channels,
        kernel_width=config.kernel_width,
        seed=config.seed,
    )
    model = msp.MspModel(msp_config)
    history = msp.train_msp(
        model,
        train_w,
        val_w,
        lr=config.lr,
        batch_size=config.batch,
        patience=config.patience,
        max_epochs=config.max_epochs,
    )
    msp.save_msp(model, args.out)
    print(
        f"wrote {args.out} (best val loss {history.best_val_loss:.6f} "
        f"at epoch {history.best_epoch}/{history.stopped_epoch})"
    )
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = merge_run_config(args)
    frame, _, (train_w, val_w, _), _ = _prepare_windows(config, args.horizon)
    fc_config = fc.ForecasterConfig(
        kind=config.forecaster_kind,
        lookback=config.lookback,
        horizon=args.horizon,
        n_variables=frame.n_variables,
        hidden=config.hidden,
        per_variable=config.per_variable,
        seed=config.seed,
    )
    model = fc.make_forecaster(fc_config)
    if args.msp:
        teacher = msp.load_msp(args.msp)
        history = fc.train_with_guidance(
            model,
            teacher,
            train_w,
            val_w,
            guidance.GuidanceConfig(alpha=config.alpha, mode=config.weight_mode),
            lr=config.lr,
            batch_size=config.batch,
            patience=config.patience,
            max_epochs=config.max_epochs,
        )
        mode = "guided"
    else:
        history = fc.train_plain(
            model,
            train_w,
            val_w,
            lr=config.lr,
            batch_size=config.batch,
            patience=config.patience,
            max_epochs=config.max_epochs,
        )
        mode = "plain"
    fc.save_forecaster(model, args.out)
    print(
        f"wrote {args.out} ({mode}, best val MAE {history.best_val_loss:.6f} "
        f"at epoch {history.best_epoch}/{history.stopped_epoch})"
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = merge_run_config(args)
    model = fc.load_forecaster(args.model)
    horizon = model.config.horizon
    config.lookback = model.config.lookback
    _, _, (_, _, test_w), stats = _prepare_windows(config, horizon)
    m, mp, mr, mpr = evaluate_forecaster(model, test_w, stats)
    report = metrics.EvalReport([horizon], [m], [mp], [mr], [mpr])
    metrics.save_report_csv(report, args.out)
    print(f"wrote {args.out} (H={horizon}: mae {m:.6f}, mape_sym {mp:.6f})")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    baseline = metrics.load_report_csv(args.baseline)
    treated = metrics.load_report_csv(args.treated)
    improvement = metrics.percent_improvement(baseline, treated)
    metrics.save_comparison_csv(baseline, treated, improvement, args.out)
    print(
        f"wrote {args.out} (avg improvement: mae {improvement.average['mae']:.3f}%, "
        f"mape_sym {improvement.average['mape_sym']:.3f}%)"
    )
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    config = merge_run_config(args)
    result = run_pipeline(config)
    for name, path in result.paths.items():
        print(f"wrote {path}")
    print(
        f"avg improvement: mae {result.improvement.average['mae']:.3f}%, "
        f"mape_sym {result.improvement.average['mape_sym']:.3f}%"
    )
    return EXIT_OK


def cmd_config(args: argparse.Namespace) -> int:
    config = merge_run_config(args)
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if f.name == "horizons":
            value = ",".join(str(h) for h in value)
        print(f"{f.name}={value}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loadcast",
        description="Residential load forecasting with appliance-state labeling "
        "and event-guided training",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic household data + truth CSV pair")
    p.add_argument("--out", default="data.csv")
    p.add_argument("--states-out", default="truth_states.csv")
    p.add_argument("--appliances", help="JSON appliance spec file (default: built-in household)")
    p.add_argument("--length", type=int)
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--spike-rate", type=float, dest="spike_rate")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-household-total", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("label", help="cluster per-variable states and write the label CSV")
    _add_run_flags(p)
    p.add_argument("--out", default="states.csv")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train-msp", help="train the state predictor at one horizon")
    _add_run_flags(p)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--out", default="msp.json")
    p.set_defaults(func=cmd_train_msp)

    p = sub.add_parser("train", help="train a forecaster (guided when --msp is given)")
    _add_run_flags(p)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--msp", help="frozen state-predictor checkpoint for guided training")
    p.add_argument("--out", default="forecaster.json")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a forecaster checkpoint on the test split")
    _add_run_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default="report.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="percent improvement between two report CSVs")
    p.add_argument("--baseline", required=True)
    p.add_argument("--treated", required=True)
    p.add_argument("--out", default="comparison.csv")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("pipeline", help="full run: teacher + plain/guided forecasters per horizon")
    _add_run_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("config", help="print the effective configuration")
    _add_run_flags(p)
    p.set_defaults(func=cmd_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
