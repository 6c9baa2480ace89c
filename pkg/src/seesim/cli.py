"""Command-line pipeline: parse -> cluster -> campaign -> train -> predict -> report.

Every stage reads files and writes a deterministic JSON artifact; wall times,
timestamps and input digests go to a ``<artifact>.manifest.json`` sidecar.

Exit codes: 0 success, 2 usage error, 3 input error, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import campaign as cp
from .clustering import ClusteringError, ClusterParams, cluster_cells, clusters_from_json, clusters_to_json
from .faultdb import FaultDbError, load_fault_db
from .flow import (combined_classes, high_sensitivity_proportions, node_features, train_from_campaign,
                   unlabeled_nodes, verify_by_injection)
from .gatesim import SimulationError, Stimulus, simulate
from .learn.metrics import LengthMismatch
from .learn.selection import TooFewSamples, predict_sensitivity
from .learn.svm import SvmError, SvmModel
from .netlist import NetlistError, load_design, summarize
from .vcd import write_vcd

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3, 4
INPUT_ERRORS = (NetlistError, FaultDbError, SimulationError, ClusteringError, cp.CampaignError, SvmError,
                TooFewSamples, LengthMismatch, OSError, json.JSONDecodeError, KeyError)


class UsageError(Exception):
    pass


def _digest(path: str | os.PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Manifest:
    def __init__(self, command: str, args: argparse.Namespace):
        self.doc = {
            "tool": "seesim",
            "version": __version__,
            "command": command,
            "started": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "inputs": {},
            "seeds": {},
            "wall_times": {},
        }
        for key in ("netlist", "clusters", "db", "stimulus", "campaign", "model", "predictions", "modules"):
            path = getattr(args, key, None)
            if path:
                self.doc["inputs"][key] = {"path": str(path), "sha256": _digest(path)}
        if getattr(args, "seed", None) is not None:
            self.doc["seeds"]["seed"] = args.seed

    def time(self, stage: str, seconds: float) -> None:
        self.doc["wall_times"][stage] = seconds

    def write(self, artifact: str | os.PathLike) -> None:
        self.doc["finished"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
        Path(f"{artifact}.manifest.json").write_text(json.dumps(self.doc, indent=2) + "\n")


def _write(path: str | os.PathLike, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


def _dump(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _design(args):
    return load_design(Path(args.netlist).read_text(), args.top)


def _stimulus(args) -> Stimulus:
    return Stimulus.from_json(Path(args.stimulus).read_text())


def _clusters(args):
    clusters, _ = clusters_from_json(Path(args.clusters).read_text())
    return clusters


def _campaign_result(args):
    doc = json.loads(Path(args.campaign).read_text())
    return doc, cp.report_from_json(doc)


# --------------------------------------------------------------------------
# subcommands


def cmd_parse(args) -> None:
    man = Manifest("parse", args)
    t0 = time.perf_counter()
    design = _design(args)
    man.time("parse", time.perf_counter() - t0)
    text = _dump(summarize(design))
    if args.output:
        _write(args.output, text)
        man.write(args.output)
    else:
        sys.stdout.write(text)


def cmd_cluster(args) -> None:
    man = Manifest("cluster", args)
    design = _design(args)
    params = ClusterParams(args.kn, args.ln, args.seed, args.max_iterations)
    t0 = time.perf_counter()
    clusters = cluster_cells(design.cells, params)
    man.time("cluster", time.perf_counter() - t0)
    _write(args.output, clusters_to_json(clusters, params))
    man.write(args.output)


def cmd_campaign(args) -> None:
    man = Manifest("campaign", args)
    design = _design(args)
    stim = _stimulus(args)
    clusters = _clusters(args)
    db = load_fault_db(Path(args.db).read_text())
    cfg = cp.CampaignConfig(args.let, args.flux, args.area, args.window, args.fraction, args.seed,
                            Path(args.stimulus).name)
    samples = cp.sample_cells(clusters, cfg.sample_fraction, cfg.seed)
    events = cp.build_injection_list(design, samples, db, cfg, stim)
    golden = simulate(design, stim)
    t0 = time.perf_counter()
    result = cp.run_campaign(design, stim, events, clusters, samples, jobs=args.jobs, golden=golden)
    man.time("injection", time.perf_counter() - t0)
    man.doc["num_events"] = len(events)
    cp.finalize(result, clusters, cfg)
    _write(args.output, cp.dumps(cp.campaign_report(result, cfg, design)))
    _write(Path(args.output).with_suffix(".txt"), cp.format_table(result, cfg, design.top))
    if args.dump_vcd:
        out = Path(args.dump_vcd)
        out.mkdir(parents=True, exist_ok=True)
        (out / "golden.vcd").write_text(write_vcd(golden, design))
        for k, o in enumerate(result.outcomes):
            if o.soft_error:
                faulty = simulate(design, stim, [o.event])
                (out / f"event_{k:05d}.vcd").write_text(write_vcd(faulty, design))
    man.write(args.output)


def cmd_train(args) -> None:
    man = Manifest("train", args)
    design = _design(args)
    stim = _stimulus(args)
    clusters = _clusters(args)
    _, result = _campaign_result(args)
    out = Path(args.out_dir)
    t0 = time.perf_counter()
    vectors = node_features(design, clusters, stim)
    trained = train_from_campaign(vectors, result, args.tau, args.folds, args.seed, jobs=args.jobs)
    man.time("train", time.perf_counter() - t0)
    _write(out / "model.json", trained.model.to_json())
    _write(out / "metrics.json", _dump(trained.metrics_doc()))
    _write(out / "dataset.json", trained.dataset.to_json())
    with open(out / "feature_curve.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["num_features", "mean_cv_accuracy", "added_feature"])
        names = trained.metrics_doc()["selection_order"]
        for k, (score, name) in enumerate(zip(trained.curve, names), start=1):
            w.writerow([k, repr(score), name])
    with open(out / "roc.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fpr", "tpr"])
        for x, y in trained.roc_points:
            w.writerow([repr(x), repr(y)])
    man.write(out / "model.json")


def cmd_predict(args) -> None:
    man = Manifest("predict", args)
    design = _design(args)
    stim = _stimulus(args)
    clusters = _clusters(args)
    _, result = _campaign_result(args)
    model = SvmModel.from_json(Path(args.model).read_text())
    t0 = time.perf_counter()
    vectors = node_features(design, clusters, stim)
    targets = vectors if args.all_nodes else unlabeled_nodes(vectors, result)
    pred = predict_sensitivity(model, targets)
    man.time("predict", time.perf_counter() - t0)
    man.time("classify", pred.wall_time)
    tau = args.tau if args.tau is not None else result.chip_ser
    doc = {
        "tau": tau,
        "nodes": [
            {"cell": n, "name": design.cells[n].name, "label": "high" if lab > 0 else "low", "score": float(s)}
            for n, lab, s in zip(pred.nodes, pred.labels, pred.scores)
        ],
        "num_high": int((pred.labels > 0).sum()),
        "classes": {str(k): v for k, v in combined_classes(result, tau, pred).items()},
    }
    if args.verify_per_node:
        if not args.db:
            raise UsageError("--verify-per-node needs --db")
        db = load_fault_db(Path(args.db).read_text())
        let = args.let if args.let is not None else result_config(args)["let"]
        ver = verify_by_injection(design, stim, clusters, db, pred, tau, args.verify_per_node, let, args.seed,
                                  jobs=args.jobs)
        man.time("full_injection", ver.wall_time)
        doc["verification"] = {
            "per_node": args.verify_per_node,
            "let": let,
            "metrics": ver.metrics.as_dict(),
            "truth": {str(k): v for k, v in sorted(ver.labels.items())},
        }
    _write(args.output, _dump(doc))
    man.write(args.output)


def result_config(args) -> dict:
    return json.loads(Path(args.campaign).read_text())["config"]


def cmd_report(args) -> None:
    man = Manifest("report", args)
    camp_doc, result = _campaign_result(args)
    pred_doc = json.loads(Path(args.predictions).read_text())
    pred_man_path = Path(f"{args.predictions}.manifest.json")
    camp_man_path = Path(f"{args.campaign}.manifest.json")
    pred_times = json.loads(pred_man_path.read_text())["wall_times"] if pred_man_path.exists() else {}
    camp_times = json.loads(camp_man_path.read_text())["wall_times"] if camp_man_path.exists() else {}
    report: dict = {
        "campaign": {
            "config": camp_doc["config"],
            "chip_ser": result.chip_ser,
            "clusters": [{"id": r.cluster_id, "size": r.size, "ser": r.ser, "unsampled": r.unsampled}
                         for r in result.clusters],
            "xsect_set": result.xsect_set,
            "xsect_seu": result.xsect_seu,
            "sensitivity_histogram": camp_doc.get("sensitivity_histogram"),
        },
        "prediction": {"nodes": len(pred_doc["nodes"]), "num_high": pred_doc["num_high"], "tau": pred_doc["tau"]},
    }
    ver = pred_doc.get("verification")
    comparison = {"campaign_injection_s": camp_times.get("injection"), "prediction_s": pred_times.get("predict")}
    if ver:
        comparison["full_injection_s"] = pred_times.get("full_injection")
        comparison["model_accuracy"] = ver["metrics"]["accuracy"]
        if pred_times.get("predict"):
            comparison["speedup"] = pred_times["full_injection"] / pred_times["predict"]
    report["comparison"] = comparison
    lines = [f"chip SER: {100 * result.chip_ser:.2f}%   predicted nodes: {len(pred_doc['nodes'])}   "
             f"high: {pred_doc['num_high']}"]
    if "speedup" in comparison:
        lines.append(f"full injection {comparison['full_injection_s']:.3f} s  vs  prediction "
                     f"{comparison['prediction_s']:.4f} s  ->  speedup {comparison['speedup']:.1f}x, "
                     f"model accuracy {100 * comparison['model_accuracy']:.2f}%")
    if args.modules:
        if not args.netlist:
            raise UsageError("--modules needs --netlist")
        design = _design(args)
        module_map = json.loads(Path(args.modules).read_text())
        classes = {int(k): v for k, v in pred_doc["classes"].items()}
        props = high_sensitivity_proportions(design, classes, module_map)
        report["module_proportions"] = props
        lines.append("high-sensitivity share by module: " +
                     ", ".join(f"{g} {p['share_percent']:.1f}%" for g, p in props.items()))
    _write(args.output, _dump(report))
    _write(Path(args.output).with_suffix(".txt"), "\n".join(lines) + "\n")
    man.write(args.output)


# --------------------------------------------------------------------------


def _env_seed() -> int:
    raw = os.environ.get("SSRESF_SEED")
    try:
        return int(raw) if raw not in (None, "") else 0
    except ValueError:
        return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seesim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"seesim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    seed = _env_seed()
    jobs = os.cpu_count() or 1

    def design_args(sp, required=True):
        sp.add_argument("netlist", nargs=None if required else "?", help="structural netlist file")
        sp.add_argument("--top", help="top module (default: the only uninstantiated module)")

    sp = sub.add_parser("parse", help="parse and elaborate a netlist, print a design summary")
    design_args(sp)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("cluster", help="cluster cells by hierarchy")
    design_args(sp)
    sp.add_argument("--kn", type=int, required=True, help="number of clusters")
    sp.add_argument("--ln", type=int, required=True, help="layer depth")
    sp.add_argument("--seed", type=int, default=seed)
    sp.add_argument("--max-iterations", type=int, default=100)
    sp.add_argument("-o", "--output", default="clusters.json")
    sp.set_defaults(func=cmd_cluster)

    sp = sub.add_parser("campaign", help="run a fault-injection campaign")
    design_args(sp)
    sp.add_argument("--clusters", required=True)
    sp.add_argument("--db", required=True, help="SET/SEU fault database (JSON)")
    sp.add_argument("--stimulus", required=True)
    sp.add_argument("--let", type=float, required=True, help="LET in MeV*cm^2/mg")
    sp.add_argument("--flux", type=float, required=True, help="particles/(cm^2*s)")
    sp.add_argument("--area", type=float, required=True, help="device area in cm^2")
    sp.add_argument("--window", type=float, required=True, help="exposure window in s")
    sp.add_argument("--fraction", type=float, default=1.0, help="per-cluster sample fraction")
    sp.add_argument("--seed", type=int, default=seed)
    sp.add_argument("--jobs", type=int, default=jobs)
    sp.add_argument("--dump-vcd", metavar="DIR", help="write golden and soft-error VCDs here")
    sp.add_argument("-o", "--output", default="campaign.json")
    sp.set_defaults(func=cmd_campaign)

    sp = sub.add_parser("train", help="train the sensitivity classifier on campaign results")
    design_args(sp)
    sp.add_argument("--clusters", required=True)
    sp.add_argument("--stimulus", required=True)
    sp.add_argument("--campaign", required=True)
    sp.add_argument("--tau", type=float, default=None, help="label threshold (default: chip SER)")
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--seed", type=int, default=seed)
    sp.add_argument("--jobs", type=int, default=jobs)
    sp.add_argument("--out-dir", default="model")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="classify nodes with a trained model")
    design_args(sp)
    sp.add_argument("--clusters", required=True)
    sp.add_argument("--stimulus", required=True)
    sp.add_argument("--campaign", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--tau", type=float, default=None)
    sp.add_argument("--all-nodes", action="store_true", help="predict every node, not only unmeasured ones")
    sp.add_argument("--verify-per-node", type=int, default=0, metavar="K",
                    help="also inject K strikes per predicted node for ground truth and timing")
    sp.add_argument("--db")
    sp.add_argument("--let", type=float)
    sp.add_argument("--seed", type=int, default=seed)
    sp.add_argument("--jobs", type=int, default=jobs)
    sp.add_argument("-o", "--output", default="predictions.json")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("report", help="combine campaign and prediction results")
    sp.add_argument("--campaign", required=True)
    sp.add_argument("--predictions", required=True)
    sp.add_argument("--modules", help="JSON map: group -> list of instance-path prefixes")
    sp.add_argument("--netlist")
    sp.add_argument("--top")
    sp.add_argument("-o", "--output", default="report.json")
    sp.set_defaults(func=cmd_report)
    return p


def _fail(code: int, exc: BaseException) -> int:
    msg = str(exc.args[0]) if isinstance(exc, KeyError) and exc.args else str(exc)
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": msg, "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except INPUT_ERRORS as exc:
        return _fail(EXIT_INPUT, exc)
    except Exception as exc:  # invariant violations and bugs
        return _fail(EXIT_INTERNAL, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
