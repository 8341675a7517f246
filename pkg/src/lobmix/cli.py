"""Command-line entry point: ``lobmix <command> [--config run.toml] [--set key=value ...]``.

Commands: generate, build, train, evaluate, simulate, fit-benchmark.

Config files are TOML with one table per component (``generator``,
``dataset``, ``net``, ``train``, ``sim``, ``benchmark``) plus top-level
``seed``; ``--set section.key=value`` overrides entries (values parsed as
TOML when possible).  Relative output paths are placed under
``$LOBMIX_OUTPUT_DIR`` when it is set.

Exit codes: 0 success, 1 usage or config error, 2 I/O error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path

import tomli

from . import __version__
from ._binio import ContainerError, config_hash
from .benchmarks import (FitError, GlmParams, fit_birth_death, fit_glm,
                         forecast_birth_death_dataset, forecast_glm, load_benchmark, save_benchmark)
from .evaluation import evaluate, period_labels
from .features import (DatasetConfig, NormalizationStats, build_joint_dataset, fit_normalization, read_dataset,
                       resolve_splits, split_by_date, write_dataset)
from .mixtures import Family
from .net import (NetConfig, TrainConfig, TrainingDivergence, load_checkpoint,
                  save_checkpoint, train, train_config_from_header)
from .orderflow import GeneratorConfig, OrderFlowGenerator, ParseError, Pair, read_stream, write_stream
from .sim import (DegenerateForecastError, SimConfig, histogram_json, run_experiment, scenarios_csv,
                  t_test_json, trajectories_csv)

logger = logging.getLogger("lobmix")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3
OUTPUT_ENV = "LOBMIX_OUTPUT_DIR"
SPLIT_NAMES = ("train", "validation", "test")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# --------------------------------------------------------------------------
# config handling


def _parse_value(text: str):
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def load_config(path: str | None, overrides: list[str]) -> dict:
    cfg: dict = {}
    if path:
        try:
            with open(path, "rb") as fh:
                cfg = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise UsageError(f"{path}: {exc}") from exc
    for item in overrides or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        node = cfg
        parts = key.strip().split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise UsageError(f"--set {key}: {p} is not a table")
        node[parts[-1]] = _parse_value(value.strip())
    return cfg


def _section(cfg: dict, name: str, cls, extra: dict | None = None):
    raw = dict(cfg.get(name, {}))
    if extra:
        for k, v in extra.items():
            raw.setdefault(k, v)
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise UsageError(f"[{name}] unknown keys: {', '.join(sorted(unknown))}")
    for k, v in list(raw.items()):
        if isinstance(v, list):
            raw[k] = tuple(tuple(x) if isinstance(x, list) else x for x in v)
    try:
        if hasattr(cls, "from_dict"):
            return cls.from_dict(raw)
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"[{name}] {exc}") from exc


def _seed(cfg: dict) -> int:
    return int(cfg.get("seed", 0))


def _out_path(path: str | Path) -> Path:
    p = Path(path)
    base = os.environ.get(OUTPUT_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _meta(command: str, cfg: dict) -> dict:
    return {"command": command, "config_hash": config_hash(cfg), "tool_version": __version__,
            "seed": _seed(cfg)}


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=str) + "\n"


# --------------------------------------------------------------------------
# commands


def cmd_generate(args, cfg: dict) -> int:
    """Write a synthetic NDJSON stream plus a ``.meta.json`` sidecar."""
    extra = {"seed": _seed(cfg)}
    if args.pair:
        extra["pair"] = args.pair
    gcfg = _section(cfg, "generator", GeneratorConfig, extra)
    gen_cfg = cfg.get("generate", {})
    duration = float(args.duration if args.duration is not None else gen_cfg.get("duration", 3600.0))
    max_events = args.max_events if args.max_events is not None else gen_cfg.get("max_events")
    if duration < 0:
        raise UsageError("duration must be non-negative")
    out = _out_path(args.out)
    gen = OrderFlowGenerator(gcfg)

    def limited():
        for i, ev in enumerate(gen.events(duration)):
            if max_events is not None and i >= int(max_events):
                return
            yield ev

    n = write_stream(limited(), out)
    meta = _meta("generate", cfg)
    meta.update({"events": n, "duration": duration, "generator": asdict(gcfg)})
    _write_text(Path(str(out) + ".meta.json"), _json(meta))
    logger.info("wrote %d events to %s", n, out)
    return EXIT_OK


def cmd_build(args, cfg: dict) -> int:
    """Build train/validation/test datasets from one or two streams."""
    dcfg = _section(cfg, "dataset", DatasetConfig)
    streams = args.stream or cfg.get("paths", {}).get("streams")
    if not streams:
        raise UsageError("build needs at least one --stream")
    if len(streams) > 2:
        raise UsageError("at most two streams (pair A and pair B)")
    per_pair = [_read_pair_stream(path, code) for code, path in zip(Pair, streams)]
    ts = [e.timestamp for evs in per_pair for e in evs[:1] + evs[-1:]]
    if not ts:
        raise UsageError("input streams are empty")
    splits = resolve_splits(dcfg, min(ts), max(ts))
    samples = build_joint_dataset(per_pair, dcfg)
    parts = split_by_date(samples, splits)
    if len(parts[0]) == 0:
        raise UsageError("training split is empty")
    stats = fit_normalization(parts[0])
    out_dir = _out_path(Path(args.out_dir) / "x").parent
    meta = _meta("build", cfg)
    meta.update({"streams": [str(s) for s in streams], "splits": [list(r) for r in splits]})
    for name, part in zip(SPLIT_NAMES, parts):
        m = dict(meta, split=name)
        write_dataset(out_dir / f"{name}.lmx", part, dcfg, stats, m)
    logger.info("built %s samples", "/".join(str(len(p)) for p in parts))
    return EXIT_OK


def _read_pair_stream(path, code: Pair) -> list:
    """Read a stream, relabelling its events with the pair slot it fills."""
    events = read_stream(path)
    if any(e.pair is not code for e in events):
        events = [replace(e, pair=code) for e in events]
    return events


def _load_split(data_dir, name):
    samples, header = read_dataset(Path(data_dir) / f"{name}.lmx")
    return samples, header


def cmd_train(args, cfg: dict) -> int:
    head = args.head or cfg.get("train", {}).get("head") or cfg.get("head")
    family = None
    if not args.resume:
        try:
            family = Family(head)
        except ValueError:
            raise UsageError(f"unknown head {head!r}; choose poisson, negbin or ztp") from None
    net_cfg = _section(cfg, "net", NetConfig, {"seed": _seed(cfg)})
    tcfg_raw = {k: v for k, v in cfg.get("train", {}).items() if k != "head"}
    tcfg = _section({"train": tcfg_raw}, "train", TrainConfig, {"seed": _seed(cfg)})
    extra_epochs = None
    if args.epochs is not None:
        tcfg = replace(tcfg, max_epochs=args.epochs)
    tr, h_tr = _load_split(args.data_dir, "train")
    va, _ = _load_split(args.data_dir, "validation")
    stats = NormalizationStats.from_dict(h_tr["normalization"])
    state = None
    if args.resume:
        model0, state, header = load_checkpoint(args.resume)
        if state is None:
            raise UsageError(f"{args.resume} holds no training state")
        net_cfg, family = model0.config, model0.family
        tcfg = train_config_from_header(header) or tcfg
        if args.epochs is not None:
            extra_epochs = args.epochs
            tcfg = replace(tcfg, max_epochs=max(tcfg.max_epochs, state.epoch + args.epochs))
    model, state = train(tr, va, net_cfg, family, tcfg, stats=stats, state=state, max_epochs=extra_epochs)
    meta = _meta("train", cfg)
    meta["dataset_config_hash"] = h_tr.get("meta", {}).get("config_hash")
    out = _out_path(args.out)
    save_checkpoint(out, model, state, tcfg, meta)
    log_path = _out_path(args.log) if args.log else out.with_suffix(".log.csv")
    buf = io.StringIO()
    for k in sorted(meta):
        buf.write(f"# {k}: {meta[k]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "train_nll", "val_nll"])
    for h in state.history:
        w.writerow([h["epoch"], repr(h["train_nll"]), repr(h["val_nll"])])
    _write_text(log_path, buf.getvalue())
    timing = log_path.with_suffix(".timing.csv")
    _write_text(timing, "epoch,wall_time\n" + "".join(
        f"{h['epoch']},{h.get('wall_time', '')}\n" for h in state.history))
    logger.info("trained %s for %d epochs, best val NLL %.5f", family.value, state.epoch, state.best_val)
    return EXIT_OK


def cmd_fit_benchmark(args, cfg: dict) -> int:
    bcfg = cfg.get("benchmark", {})
    kind = args.kind
    out = _out_path(args.out)
    tr, header = _load_split(args.data_dir, "train")
    if kind == "glm":
        params = fit_glm(tr, tol=float(bcfg.get("tol", 1e-8)), max_iter=int(bcfg.get("max_iter", 500)))
    elif kind == "birth_death":
        streams = args.stream or header.get("meta", {}).get("streams")
        if not streams:
            raise UsageError("birth_death needs --stream (or a dataset built from streams)")
        train_end = header["meta"]["splits"][0][1]
        events = [e for e in read_stream(streams[0]) if e.timestamp < train_end]
        params = fit_birth_death(events, header["tick_size"], int(bcfg.get("n_levels", 5)))
    else:
        raise UsageError(f"unknown benchmark kind {kind!r}")
    save_benchmark(out, params)
    meta = _meta("fit-benchmark", cfg)
    d = json.loads(out.read_text())
    d["meta"] = meta
    _write_text(out, json.dumps(d, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


def _named_paths(items: list[str] | None, what: str) -> dict[str, str]:
    out = {}
    for it in items or []:
        if "=" in it:
            name, path = it.split("=", 1)
        else:
            path = it
            name = Path(it).stem
        if name in out:
            raise UsageError(f"duplicate {what} name {name!r}")
        out[name] = path
    return out


def _forecasts(args, cfg: dict, samples, header) -> tuple[dict, list, list]:
    """Load every requested model and forecast the given samples."""
    fcs, deep, bench = {}, [], []
    for name, path in _named_paths(args.checkpoint, "checkpoint").items():
        model, _, _ = load_checkpoint(path)
        fcs[name] = model.forecast(samples)
        deep.append(name)
    bcfg = cfg.get("benchmark", {})
    for name, path in _named_paths(args.benchmark, "benchmark").items():
        params = load_benchmark(path)
        if isinstance(params, GlmParams):
            fcs[name] = forecast_glm(params, samples)
        else:
            streams = args.stream or header.get("meta", {}).get("streams")
            if not streams:
                raise UsageError("birth-death forecasts need --stream")
            evs = {int(code): _read_pair_stream(p, code) for code, p in zip(Pair, streams)}
            fcs[name] = forecast_birth_death_dataset(
                params, evs, samples, header["tau"], int(bcfg.get("n_paths", 2000)), _seed(cfg),
                header.get("config", {}).get("price_reference", "mid"))
        bench.append(name)
    if not fcs:
        raise UsageError("no models given (use --checkpoint and/or --benchmark)")
    return fcs, deep, bench


def cmd_evaluate(args, cfg: dict) -> int:
    samples, header = _load_split(args.data_dir, args.split)
    fcs, _, _ = _forecasts(args, cfg, samples, header)
    baseline = args.baseline or cfg.get("evaluate", {}).get("baseline") or next(iter(fcs))
    periods = period_labels(samples.anchor_ts, cfg.get("evaluate", {}).get("periods"))
    meta = _meta("evaluate", cfg)
    try:
        report = evaluate(fcs, samples.target, baseline, periods, meta=meta)
    except KeyError as exc:
        raise UsageError(str(exc)) from exc
    out_dir = _out_path(Path(args.out_dir) / "x").parent
    _write_text(out_dir / "report.json", report.to_json() + "\n")
    _write_text(out_dir / "report.csv", report.to_csv())
    return EXIT_OK


def cmd_simulate(args, cfg: dict) -> int:
    samples, header = _load_split(args.data_dir, args.split)
    extra = {"seed": _seed(cfg), "tau": header["tau"], "tick_size": float(header["tick_size"])}
    scfg = _section(cfg, "sim", SimConfig, extra)
    fcs, deep, bench = _forecasts(args, cfg, samples, header)
    res = run_experiment(fcs, samples, scfg)
    res.meta = _meta("simulate", cfg)
    out_dir = _out_path(Path(args.out_dir) / "x").parent
    _write_text(out_dir / "scenarios.csv", scenarios_csv(res))
    _write_text(out_dir / "trajectories.csv", trajectories_csv(res))
    _write_text(out_dir / "histogram.json", histogram_json(res) + "\n")
    _write_text(out_dir / "ttests.json", t_test_json(res, bench, deep) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lobmix", description="Mixture-density forecasting of tick-quantized price moves")
    p.add_argument("--version", action="version", version=f"lobmix {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="TOML run configuration")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. --set net.state_size=16")

    g = sub.add_parser("generate", help="write a synthetic order-flow stream")
    common(g)
    g.add_argument("--out", required=True)
    g.add_argument("--duration", type=float, help="seconds of simulated time")
    g.add_argument("--max-events", type=int)
    g.add_argument("--pair", type=int, choices=(1, 2))
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("build", help="build train/validation/test datasets")
    common(b)
    b.add_argument("--stream", action="append", help="stream file (repeat for pair B)")
    b.add_argument("--out-dir", required=True)
    b.set_defaults(func=cmd_build)

    t = sub.add_parser("train", help="train a deep mixture model")
    common(t)
    t.add_argument("--data-dir", required=True)
    t.add_argument("--head", help="poisson, negbin or ztp")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--log", help="training log CSV (default next to checkpoint)")
    t.add_argument("--epochs", type=int, help="override max epochs (additional epochs with --resume)")
    t.add_argument("--resume", help="checkpoint to continue from")
    t.set_defaults(func=cmd_train)

    for name, func, hlp in (("evaluate", cmd_evaluate, "score models on a split"),
                            ("simulate", cmd_simulate, "Kelly trading simulation")):
        e = sub.add_parser(name, help=hlp)
        common(e)
        e.add_argument("--data-dir", required=True)
        e.add_argument("--split", default="test", choices=SPLIT_NAMES)
        e.add_argument("--checkpoint", action="append", metavar="NAME=PATH")
        e.add_argument("--benchmark", action="append", metavar="NAME=PATH")
        e.add_argument("--stream", action="append", help="streams for birth-death replay")
        e.add_argument("--out-dir", required=True)
        if name == "evaluate":
            e.add_argument("--baseline", help="model name used for loss scaling")
        e.set_defaults(func=func)

    f = sub.add_parser("fit-benchmark", help="fit a benchmark model on the training split")
    common(f)
    f.add_argument("--kind", required=True, choices=("glm", "birth_death"))
    f.add_argument("--data-dir", required=True)
    f.add_argument("--stream", action="append")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit_benchmark)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = load_config(args.config, args.set)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"lobmix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (OSError, ContainerError, ParseError) as exc:
        print(f"lobmix: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TrainingDivergence, FloatingPointError, DegenerateForecastError, FitError) as exc:
        print(f"lobmix: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"lobmix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
