"""Command-line front end.

    swarmdiff gen-scenario --preset fig2 --out fig2.yaml
    swarmdiff validate --scenario fig2.yaml
    swarmdiff run --scenario fig2.yaml --out results/
    swarmdiff decay-trace --scenario fig2.yaml --out results/ --fragment 2
    swarmdiff train-forecast --series requests.csv --out model/

Exit codes: 0 success, 1 invalid scenario or arguments, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from .diffusion import FragmentSwarmStats, InertFragmentError, permeability
from .forecast import SeriesForecaster, forecast_mse, persistence_forecast, save_checkpoint
from .forecast.synthetic import seasonal_series
from .sim import engine
from .sim.presets import PRESETS, preset, random_scenario
from .sim.scenario import (
    ScenarioError,
    apply_overrides,
    load_scenario,
    parse_set_options,
    save_scenario,
)
from .sim.traces import decay_trace

log = logging.getLogger("swarmdiff")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _setup_logging() -> None:
    level = os.environ.get("SWARM_LOG_LEVEL", "warn").lower()
    logging.basicConfig(
        level=LOG_LEVELS.get(level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _scenario(args):
    if args.scenario and getattr(args, "preset", None):
        raise UsageError("give either --scenario or --preset, not both")
    if args.scenario:
        sc = load_scenario(args.scenario)
    elif getattr(args, "preset", None):
        sc = preset(args.preset, seed=args.seed or 0)
    else:
        raise UsageError("--scenario PATH (or --preset NAME) is required")
    overrides = parse_set_options(args.set)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "steps", None) is not None and args.command == "run":
        overrides["steps"] = args.steps
    if getattr(args, "no_forecast", False):
        overrides["forecast_enabled"] = False
    return apply_overrides(sc, overrides)


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# -- subcommands ---------------------------------------------------------


def cmd_validate(args) -> int:
    sc = _scenario(args)
    print(f"ok: {sc.name or 'scenario'} ({sc.node_count} nodes, {sc.fragment_count} fragments)")
    return EXIT_OK


def cmd_run(args) -> int:
    sc = _scenario(args)
    out = _out_dir(args)
    log.info("running %s for %d steps", sc.name or "scenario", sc.parameters.steps)
    metrics = engine.run(sc)

    for step in range(len(metrics.chi)):
        chi = metrics.chi_normalized(step)
        _write_csv(
            out / f"heatmap_step_{step:03d}.csv",
            ["peer"] + [f"fragment_{k}" for k in range(sc.fragment_count)],
            [[j, *map(repr, row)] for j, row in enumerate(chi.tolist())],
        )

    rows = []
    for snap in metrics.snapshots:
        for k in range(sc.fragment_count):
            T, S, rho = snap.users_total[k], snap.seeders[k], snap.share_ratio[k]
            try:
                D = permeability(FragmentSwarmStats(k, T, S, rho))
            except InertFragmentError:
                D = float("nan")
            rows.append([snap.step, k, S, T, repr(rho), repr(D)])
    _write_csv(out / "availability.csv", ["step", "fragment", "seeders", "users_total", "share_ratio", "permeability"], rows)

    _write_csv(
        out / "transfers.csv",
        ["step_started", "source", "destination", "fragment", "duration_steps", "completed", "aborted", "step_finished", "chi"],
        [
            [t.step_started, t.source, t.destination, t.fragment, t.duration_steps, int(t.completed), int(t.aborted),
             "" if t.step_finished is None else t.step_finished, repr(t.chi)]
            for t in metrics.transfers
        ],
    )
    (out / "metrics.json").write_text(metrics.to_json())
    print(f"{metrics.steps} steps, {len(metrics.completed_transfers())} completed transfers -> {out}")
    return EXIT_OK


def cmd_decay_trace(args) -> int:
    sc = _scenario(args)
    out = _out_dir(args)
    max_tau = args.steps if args.steps is not None else 60
    try:
        peers, table = decay_trace(sc, args.fragment, max_tau)
    except ValueError as err:
        raise ScenarioError([str(err)]) from None
    path = out / f"decay_trace_fragment_{args.fragment}.csv"
    _write_csv(
        path,
        ["tau"] + [f"peer_{j}" for j in peers],
        [[tau, *map(repr, row)] for tau, row in enumerate(table.tolist())],
    )
    print(f"{len(peers)} peers x {max_tau + 1} steps -> {path}")
    return EXIT_OK


def cmd_gen_scenario(args) -> int:
    overrides = parse_set_options(args.set)
    name = args.preset or "random"
    if name not in PRESETS:
        raise UsageError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    seed = args.seed or 0
    if name == "random":
        n = int(overrides.pop("node_count", 11))
        K = int(overrides.pop("fragment_count", 5))
        rarity = overrides.pop("rarity", None)
        if rarity is not None:
            rarity = [float(v) for v in str(rarity).split(",")]
        if n < 1 or K < 1:
            raise UsageError("node_count and fragment_count must be positive")
        try:
            sc = random_scenario(n, K, rarity, seed=seed)
        except ValueError as err:
            raise UsageError(str(err)) from None
    else:
        sc = preset(name, seed=seed)
    if args.steps is not None:
        overrides["steps"] = args.steps
    sc = apply_overrides(sc, overrides)
    out = Path(args.out or f"{name}.yaml")
    if out.suffix not in (".yaml", ".yml", ".json"):
        out.mkdir(parents=True, exist_ok=True)
        out = out / f"{name}.yaml"
    save_scenario(sc, out)
    print(f"wrote {out}")
    return EXIT_OK


def _read_series(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"series file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and not _is_number(rows[0][-1]):
        rows = rows[1:]
    values = [(int(float(r[0])), float(r[1])) for r in rows if r]
    values.sort()
    return np.array([v for _, v in values])


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def cmd_train_forecast(args) -> int:
    opts = {k: yaml.safe_load(v) for k, v in parse_set_options(args.set).items()}
    known = {"levels", "M", "hidden", "H", "horizon", "r", "epochs", "learning_rate", "target", "split"}
    unknown = set(opts) - known
    if unknown:
        raise UsageError(f"unknown options for train-forecast: {', '.join(sorted(unknown))}")
    levels = int(opts.get("levels", opts.get("M", 4)))
    hidden = int(opts.get("hidden", opts.get("H", 16)))
    horizon = int(opts.get("horizon", opts.get("r", 6)))
    epochs = int(opts.get("epochs", 500))
    lr = float(opts.get("learning_rate", 1e-2))
    split = float(opts.get("split", 0.75))
    seed = args.seed or 0
    x = _read_series(args.series) if args.series else seasonal_series(480, seed=seed)
    cut = int(len(x) * split)
    out = _out_dir(args)

    f = SeriesForecaster(levels, hidden, horizon, target_mode=opts.get("target", "increment"), seed=seed)
    report = f.fit(x[:cut], epochs=epochs, learning_rate=lr)
    pred = f.predict_all(x)
    mse = forecast_mse(x, pred, horizon, cut)
    base = forecast_mse(x, persistence_forecast(x), horizon, cut)
    save_checkpoint(
        out / "checkpoint.json",
        f.net,
        {
            "levels": levels,
            "window": f.window,
            "target_mode": f.target_mode,
            "input_scale": f.in_scale.to_dict(),
            "output_scale": f.out_scale.to_dict(),
            "learning_rate": lr,
            "epochs": epochs,
        },
    )
    _write_csv(out / "training_loss.csv", ["epoch", "loss"], [[i, repr(v)] for i, v in enumerate(report.losses)])
    _write_csv(
        out / "forecast.csv",
        ["step", "value", "forecast_of_step_plus_r"],
        [[t, repr(float(x[t])), "" if np.isnan(pred[t]) else repr(float(pred[t]))] for t in range(len(x))],
    )
    summary = {"final_loss": report.final_loss, "test_mse": mse, "persistence_mse": base, "horizon": horizon}
    (out / "report.json").write_text(json.dumps(summary, indent=1))
    print(json.dumps(summary))
    return EXIT_OK


# -- parser --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="swarmdiff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, preset_ok=True):
        p.add_argument("--scenario", metavar="PATH")
        if preset_ok:
            p.add_argument("--preset", choices=PRESETS)
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--seed", type=int)
        p.add_argument("--steps", type=int)
        p.add_argument("--set", action="append", metavar="KEY=VALUE", default=[])
        return p

    common(sub.add_parser("validate", help="check a scenario file"))
    p = common(sub.add_parser("run", help="simulate and write heatmaps, availability and transfers"))
    p.add_argument("--no-forecast", action="store_true")
    p = common(sub.add_parser("decay-trace", help="normalised urgency against measurement age"))
    p.add_argument("--fragment", type=int, default=2, metavar="INDEX")
    common(sub.add_parser("gen-scenario", help="write a generated scenario"))
    p = common(sub.add_parser("train-forecast", help="train the wavelet-recurrent forecaster on a series"), preset_ok=False)
    p.add_argument("--series", metavar="CSV", help="step,value rows (default: synthetic seasonal series)")
    return parser


COMMANDS = {
    "validate": cmd_validate,
    "run": cmd_run,
    "decay-trace": cmd_decay_trace,
    "gen-scenario": cmd_gen_scenario,
    "train-forecast": cmd_train_forecast,
}


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (ScenarioError, UsageError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as err:  # noqa: BLE001 - top-level exit code contract
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
