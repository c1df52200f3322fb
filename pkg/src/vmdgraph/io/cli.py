"""``vmdgraph`` command line.

Every command reads a YAML config (optional) plus ``--set key=value``
overrides, reuses fingerprinted caches and writes UTF-8 CSV/JSON into the
output directory. Failures print one JSON object to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from ..data import synthetic_ring
from ..graph import default_sigma
from ..model import basis_tensor
from ..modeselect import write_k_selection_csv
from ..traineval.metrics import evaluate
from ..traineval.studies import ablation_table, sweep, write_ablation_csv, write_sweep_csv
from ..traineval.training import baseline_predictions, predict, write_history_csv
from .bench import run_bench, write_bench_csv
from .config import ConfigError, RunConfig, parse_value
from .container import atomic_write_text
from .ingest import IngestError, write_distances_csv, write_flows_csv, write_metadata_csv
from .workspace import Workspace

EXIT_FAILURE = 1
EXIT_USAGE = 2

# direct flags and the config key each one sets
DIRECT_FLAGS = {
    "cache_dir": "cache_dir",
    "out": "output_dir",
    "num_modes": "vmd.num_modes",
    "variant": "model.variant",
    "seed": "train.seed",
    "workers": "workers",
}


class MissingArtifactError(RuntimeError):
    pass


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# output helpers


def _csv_text(header, rows) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    return repr(float(x))


def _write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _matrix_csv(path: Path, node_ids, M) -> None:
    rows = [[nid] + [_fmt(v) for v in row] for nid, row in zip(node_ids, M)]
    atomic_write_text(path, _csv_text(["node_id"] + list(node_ids), rows))


def forecast_rows(ds, pred, split: str = "test"):
    """``node_id, origin_timestamp, horizon_step, y_true, y_pred`` rows."""
    target = ds.targets(split)
    starts = ds.starts[split]
    rows = []
    for w, s in enumerate(starts):
        origin = ds.timestamps[s + ds.window - 1].isoformat() if ds.timestamps else str(s + ds.window - 1)
        for n, nid in enumerate(ds.node_ids):
            for h in range(ds.horizon):
                rows.append([nid, origin, h + 1, _fmt(target[w, n, h]), _fmt(pred[w, n, h])])
    return rows


FORECAST_HEADER = ["node_id", "origin_timestamp", "horizon_step", "y_true", "y_pred"]


# ---------------------------------------------------------------------------
# commands


def cmd_decompose(ws: Workspace, args) -> dict:
    sets = ws.modesets()
    rows = []
    for ms in sets:
        for k in range(ms.num_modes):
            rows.append([ms.node_id, k + 1, _fmt(ms.omegas[k]), ms.iterations_used,
                         str(ms.converged).lower(), _fmt(ms.reconstruction_residual)])
    path = ws.out / "modes.csv"
    atomic_write_text(path, _csv_text(
        ["node_id", "mode", "omega", "iterations", "converged", "reconstruction_residual"], rows))
    return {"nodes": len(sets), "num_modes": ws.cfg.vmd.num_modes,
            "converged": sum(ms.converged for ms in sets), "outputs": [str(path)]}


def _write_selection(ws: Workspace) -> dict:
    sel = ws.selection()
    path = ws.out / "k_selection.csv"
    write_k_selection_csv(sel, path)
    info = {"k": sel.k, "status": sel.status, "zeta": sel.zeta,
            "sampled_nodes": sel.sampled_nodes}
    _write_json(ws.out / "selection.json", info)
    return {**info, "outputs": [str(path), str(ws.out / "selection.json")]}


def cmd_select_k(ws: Workspace, args) -> dict:
    return _write_selection(ws)


def cmd_build_graph(ws: Workspace, args) -> dict:
    g = ws.graph()
    ops = ws.spectral_ops()
    _matrix_csv(ws.out / "adjacency.csv", g.node_ids, g.adjacency)
    _matrix_csv(ws.out / "laplacian.csv", g.node_ids, ops.laplacian)
    _matrix_csv(ws.out / "scaled_laplacian.csv", g.node_ids, ops.scaled_laplacian)
    sigma = ws.cfg["graph"]["sigma"]
    info = {"nodes": g.num_nodes, "edges": int(g.adjacency.sum() // 2),
            "sigma": float(sigma) if sigma is not None else default_sigma(g.distances),
            "r": float(ws.cfg["graph"]["r"]), "lambda_max": ops.lambda_max,
            "isolated_nodes": [nid for nid, d in zip(g.node_ids, g.adjacency.sum(1)) if d == 0]}
    _write_json(ws.out / "graph.json", info)
    return info


def _metrics(ws: Workspace, model, ds, result, split: str):
    basis = basis_tensor(ws.spectral_ops())
    pred = predict(model, ds, split, basis)
    target = ds.targets(split)
    rep = evaluate(pred, target)
    base = evaluate(baseline_predictions(ds, split), target)
    info = {
        "split": split,
        "model": rep.to_dict(),
        "historical_last": base.to_dict(),
        "config_fingerprint": ws.cfg.fingerprint("data", "vmd", "graph", "model", "train"),
        "seed": int(ws.cfg["train"]["seed"]),
        "best_epoch": result.best_epoch,
        "epochs_run": len(result.history) - 1,
        "stopped_early": result.stopped_early,
        "diverged": result.diverged,
    }
    _write_json(ws.out / "metrics.json", info)
    atomic_write_text(ws.out / "forecasts.csv", _csv_text(FORECAST_HEADER, forecast_rows(ds, pred, split)))
    return rep, base


def cmd_train(ws: Workspace, args) -> dict:
    model, ds, result = ws.trained()
    write_history_csv(result, ws.out / "history.csv")
    rep, base = _metrics(ws, model, ds, result, "test")
    return {"best_epoch": result.best_epoch, "test_mae": rep.average["mae"],
            "historical_last_mae": base.average["mae"]}


def _require_checkpoint(ws: Workspace):
    if not ws.has_checkpoint():
        raise MissingArtifactError(
            f"no checkpoint matching the current config in {ws.cache}; run 'vmdgraph train' first")
    return ws.trained()


def cmd_evaluate(ws: Workspace, args) -> dict:
    model, ds, result = _require_checkpoint(ws)
    rep, base = _metrics(ws, model, ds, result, args.split)
    return {"split": args.split, "mae": rep.average["mae"], "rmse": rep.average["rmse"],
            "mape": rep.average["mape"], "historical_last_mae": base.average["mae"]}


def _write_ablation(ws: Workspace, model, ds, split: str) -> dict:
    table = ablation_table(model, ds, basis_tensor(ws.spectral_ops()), split)
    write_ablation_csv(table, ws.out / "ablation.csv")
    return {k: rep.average["mae"] for k, rep in table.items()}


def cmd_ablate(ws: Workspace, args) -> dict:
    model, ds, _ = _require_checkpoint(ws)
    deltas = _write_ablation(ws, model, ds, args.split)
    return {"delta_mae_average": {str(k): v for k, v in deltas.items()}}


def cmd_sweep(ws: Workspace, args) -> dict:
    specs = ws.cfg.sweep_specs()
    if not specs:
        raise ConfigError("config has no 'sweep' entries")
    rows = sweep(specs, ws.inputs().series, ws.spectral_ops())
    write_sweep_csv(rows, ws.out / "sweep.csv")
    return {"runs": len(rows), "failed": sum(bool(r.values["error"]) for r in rows)}


def cmd_bench(ws: Workspace, args) -> dict:
    rows = run_bench(quick=args.quick)
    write_bench_csv(rows, ws.out / "bench.csv")
    ratios = [r["ratio_vs_previous"] for r in rows
              if r["benchmark"] == "spatial_attention" and r["ratio_vs_previous"] != ""]
    conv_ok = all(r["expected"] == r["observed"] for r in rows if r["benchmark"] == "conv_output_size")
    return {"rows": len(rows), "spatial_attention_doubling_ratios": ratios,
            "conv_sizes_match": conv_ok}


def cmd_export_plots(ws: Workspace, args) -> dict:
    model, ds, result = _require_checkpoint(ws)
    write_history_csv(result, ws.out / "history.csv")
    basis = basis_tensor(ws.spectral_ops())
    pred = predict(model, ds, "test", basis)
    atomic_write_text(ws.out / "forecasts.csv", _csv_text(FORECAST_HEADER, forecast_rows(ds, pred)))
    _write_ablation(ws, model, ds, "test")
    out = ["history.csv", "forecasts.csv", "ablation.csv"]
    if not args.skip_k_selection:
        _write_selection(ws)
        out.append("k_selection.csv")
    return {"outputs": [str(ws.out / name) for name in out]}


def cmd_synth(ws: Workspace, args) -> dict:
    """Write a synthetic ring network as ingestible CSV files plus a config."""
    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    net = synthetic_ring(args.nodes, args.length, args.data_seed)
    write_flows_csv(net.series, dest / "flows.csv")
    write_metadata_csv(net.metadata, dest / "metadata.csv")
    write_distances_csv(net.series.node_ids, net.distances, dest / "distances.csv")
    cfg = {"data": {"flows": "flows.csv", "metadata": "metadata.csv", "distances": "distances.csv"}}
    atomic_write_text(dest / "config.yaml", yaml.safe_dump(cfg, sort_keys=True))
    return {"outputs": [str(dest / n) for n in ("flows.csv", "metadata.csv", "distances.csv",
                                                 "config.yaml")]}


COMMANDS = {
    "decompose": (cmd_decompose, "decompose every node and cache the modes"),
    "select-k": (cmd_select_k, "choose the number of modes from a node sample"),
    "build-graph": (cmd_build_graph, "build adjacency and Laplacian matrices"),
    "train": (cmd_train, "train the forecaster and report test metrics"),
    "evaluate": (cmd_evaluate, "score the cached checkpoint"),
    "ablate": (cmd_ablate, "per-mode ablation with the cached checkpoint"),
    "sweep": (cmd_sweep, "train one model per 'sweep' config entry"),
    "bench": (cmd_bench, "timing tables for decomposition and the network"),
    "export-plots": (cmd_export_plots, "write plot-ready CSVs without retraining"),
    "synth": (cmd_synth, "write a synthetic ring dataset as CSV"),
}


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key (repeatable)")
    common.add_argument("--cache-dir", help="cache directory (beats VMDGRAPH_CACHE_DIR)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--num-modes", type=int, help="shorthand for vmd.num_modes")
    common.add_argument("--variant", choices=["v1", "v2", "v3"], help="shorthand for model.variant")
    common.add_argument("--seed", type=int, help="shorthand for train.seed")
    common.add_argument("--workers", type=int, help="decomposition worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="vmdgraph", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name in ("evaluate", "ablate"):
            p.add_argument("--split", choices=["train", "val", "test"], default="test")
        if name == "bench":
            p.add_argument("--quick", action="store_true", help="small sizes only")
        if name == "export-plots":
            p.add_argument("--skip-k-selection", action="store_true")
        if name == "synth":
            p.add_argument("dest", help="directory for the CSV files")
            p.add_argument("--nodes", type=int, default=10)
            p.add_argument("--length", type=int, default=2000)
            p.add_argument("--data-seed", type=int, default=0)
    return parser


def collect_overrides(args) -> list[tuple[str, object]]:
    """Merge ``--set`` pairs with direct flags; the same key twice is an error."""
    pairs = []
    seen = {}
    for item in args.overrides:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, text = item.split("=", 1)
        key = key.strip()
        if key in seen:
            raise UsageError(f"--set {key} given more than once")
        seen[key] = "--set"
        pairs.append((key, parse_value(text)))
    for attr, key in DIRECT_FLAGS.items():
        value = getattr(args, attr, None)
        if value is None:
            continue
        flag = "--" + attr.replace("_", "-")
        if key in seen:
            raise UsageError(f"{flag} conflicts with --set {key}")
        seen[key] = flag
        pairs.append((key, value))
    return pairs


def _fail(command, exc, code) -> int:
    err = {"status": "error", "command": command, "error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, IngestError):
        err["problems"] = [{"line": ln, "message": msg} for ln, msg in exc.problems]
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = collect_overrides(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail(args.command, exc, EXIT_USAGE)
    try:
        cfg = RunConfig.load(args.config, overrides)
    except (ConfigError, OSError, yaml.YAMLError) as exc:
        return _fail(args.command, exc, EXIT_USAGE)

    ws = Workspace(cfg)
    func = COMMANDS[args.command][0]
    try:
        if args.command != "synth":
            ws.out.mkdir(parents=True, exist_ok=True)
        summary = func(ws, args)
    except Exception as exc:
        if args.verbose:
            logging.exception("command failed")
        return _fail(args.command, exc, EXIT_FAILURE)
    print(json.dumps({"status": "ok", "command": args.command, **summary},
                     sort_keys=True, default=_json_default))
    return 0


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    return str(obj)


if __name__ == "__main__":
    sys.exit(main())
