"""Command-line entry point.

    outbreak-onset simulate | train-reducer | calibrate | sweep | ablation | print-config

Each stage reads what earlier stages left in ``--out`` and regenerates it
when missing. Exit codes: 0 success, 1 usage/config error, 2 IO error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import pipeline as P
from .config import ExperimentConfig
from .exceptions import ConfigError, DivergenceError, OnsetError
from .io import read_json, read_vectors_csv, write_json, write_rows_csv, write_stream_csv, write_vectors_csv
from .metrics import ablation, project_2d, write_svg_scatter
from .reduce import SGDAutoencoder
from .stream import EmbeddingPool, build_stream, replicate_seed
from .volumes import write_volume

logger = logging.getLogger("outbreak_onset")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", type=Path, help="output directory (overrides config)")
    common.add_argument("--threads", type=int, help="worker threads (default: available cores)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="outbreak-onset", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("simulate", parents=[common], help="simulate volumes and write per-disease descriptor CSVs")
    p.add_argument("--dump-volumes", type=int, default=0, metavar="N", help="also write the first N raw volumes per disease")
    sub.add_parser("train-reducer", parents=[common], help="train the autoencoder and write embeddings")
    sub.add_parser("calibrate", parents=[common], help="estimate thresholds on novel-free streams")
    p = sub.add_parser("sweep", parents=[common], help="latency / FP table over R and window sizes")
    p.add_argument("--traces", type=int, default=0, metavar="N", help="dump score traces of the first N replicates per R")
    p.add_argument("--streams", type=int, default=0, metavar="N", help="dump the first N replicate streams per R")
    p = sub.add_parser("ablation", parents=[common], help="silhouette of raw / gram / fused descriptors")
    p.add_argument("--project", action="store_true", help="also write 2D projections (CSV + SVG)")
    sub.add_parser("print-config", parents=[common], help="print the effective configuration")
    return parser


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.out is not None:
        cfg.out_dir = str(args.out)
    if args.threads is not None:
        cfg.threads = args.threads
    return cfg.validate()


def _threads(cfg) -> int:
    return cfg.threads or os.cpu_count() or 1


def _prepare_out(cfg) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write-test"
    probe.write_text("")
    probe.unlink()
    (out / "config.yaml").write_text(cfg.dump())
    return out


def _descriptor_path(out, label):
    return out / "descriptors" / f"{label}.csv"


def _embedding_path(out, label):
    return out / "embeddings" / f"{label}.csv"


def stage_simulate(cfg, out, dump_volumes=0):
    labels = [d.id for d in cfg.diseases]
    descs = P.simulate_descriptors(cfg, cfg.cohort.cases_per_disease, P.POOL_COHORT, threads=_threads(cfg))
    for label in labels:
        ids, X = descs[label]
        write_vectors_csv(_descriptor_path(out, label), ids, [label] * len(ids), X, prefix="f")
    if dump_volumes:
        vols = P.simulate_volumes(cfg, dump_volumes, P.POOL_COHORT, threads=_threads(cfg))
        for label, vs in vols.items():
            for i, v in enumerate(vs):
                write_volume(v, out / "volumes" / f"{label}-{i:04d}.raw")
    write_json(out / "simulate.json", {"cases": {k: len(v[0]) for k, v in descs.items()}, "master_seed": cfg.master_seed})
    return descs


def load_descriptors(cfg, out):
    labels = [d.id for d in cfg.diseases]
    if not all(_descriptor_path(out, k).exists() for k in labels):
        return stage_simulate(cfg, out)
    descs = {}
    for label in labels:
        ids, _, _, X = read_vectors_csv(_descriptor_path(out, label))
        descs[label] = (ids, X)
    return descs


def stage_train(cfg, out):
    descs = load_descriptors(cfg, out)
    model = P.train_reducer(cfg, threads=_threads(cfg))
    model.save(out / "model.bin")
    pools = P.embed_pools(model, descs)
    for label, pool in pools.items():
        write_vectors_csv(_embedding_path(out, label), pool.case_ids, [label] * len(pool), pool.vectors, prefix="e")
    write_json(out / "train.json", {"loss_curve": model.loss_curve_, "n_train": cfg.autoencoder.n_train_per_disease * len(cfg.known_diseases)})
    return pools


def load_pools(cfg, out):
    labels = [d.id for d in cfg.diseases]
    if not all(_embedding_path(out, k).exists() for k in labels):
        return stage_train(cfg, out)
    pools = {}
    for label in labels:
        ids, _, _, Z = read_vectors_csv(_embedding_path(out, label))
        pools[label] = EmbeddingPool(label, Z, ids)
    return pools


def stage_calibrate(cfg, out):
    pools = load_pools(cfg, out)
    cal = P.calibrate_all(cfg, pools, threads=_threads(cfg))
    write_json(out / "calibration.json", cal.to_dict())
    rows = [c.to_dict() for w in sorted(cal.stats) for c in cal.stats[w].values()]
    write_rows_csv(out / "calibration.csv", rows, ["score", "w_s", "mu", "sigma", "s", "n_calibration_streams", "scale_floor"])
    return pools, cal


def load_calibration(cfg, out):
    path = out / "calibration.json"
    if not path.exists():
        return stage_calibrate(cfg, out)
    cal = P.Calibration.from_dict(read_json(path))
    if set(cal.stats) != {int(w) for w in cfg.detector.w_s}:
        return stage_calibrate(cfg, out)
    return load_pools(cfg, out), cal


def stage_sweep(cfg, out, n_traces=0, n_streams=0):
    pools, cal = load_calibration(cfg, out)
    rows, cells = P.sweep(cfg, pools, cal, threads=_threads(cfg), keep_reports=True)
    write_rows_csv(out / "results.csv", rows, P.RESULT_FIELDS)
    write_json(out / "results.json", {"master_seed": cfg.master_seed, "rows": rows})
    for R in cfg.detector.R:
        for r in range(min(n_traces, cfg.detector.n_replicates)):
            for w in cfg.detector.w_s:
                trace = cells[("ped", int(w), R)][r].score_trace
                write_rows_csv(
                    out / "traces" / f"R{R}_w{w}_rep{r:03d}.csv",
                    [{"day": a, "d_dev": b, "s_kde": c} for a, b, c in trace],
                    ["day", "d_dev", "s_kde"],
                )
        for r in range(min(n_streams, cfg.detector.n_replicates)):
            stream = build_stream(
                cfg.stream.stream_config(R), pools, cfg.novel_disease, seed=replicate_seed(cfg.master_seed, P.SWEEP_KEY, r)
            )
            write_stream_csv(out / "streams" / f"R{R}_rep{r:03d}.csv", stream)
    return rows


def stage_ablation(cfg, out, project=False):
    vols = P.simulate_volumes(cfg, cfg.ablation.n_per_disease, P.ABLATION_COHORT, threads=_threads(cfg))
    scores, emb, labels = ablation(vols, cfg.ablation.n_components, P.bank_for(cfg), return_embeddings=True)
    write_rows_csv(out / "ablation.csv", [{"variant": k, "silhouette": v} for k, v in scores.items()], ["variant", "silhouette"])
    if project:
        for variant, Z in emb.items():
            xy = project_2d(Z)
            write_rows_csv(
                out / f"projection_{variant}.csv",
                [{"label": lab, "x": x, "y": y} for lab, (x, y) in zip(labels, xy)],
                ["label", "x", "y"],
            )
            write_svg_scatter(out / f"projection_{variant}.svg", xy, labels, title=f"{variant} (silhouette {scores[variant]:.3f})")
    return scores


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        if args.command == "print-config":
            sys.stdout.write(cfg.dump())
            return EXIT_OK
        out = _prepare_out(cfg)
        if args.command == "simulate":
            stage_simulate(cfg, out, args.dump_volumes)
        elif args.command == "train-reducer":
            stage_train(cfg, out)
        elif args.command == "calibrate":
            stage_calibrate(cfg, out)
        elif args.command == "sweep":
            stage_sweep(cfg, out, args.traces, args.streams)
        elif args.command == "ablation":
            scores = stage_ablation(cfg, out, args.project)
            for k, v in scores.items():
                print(f"{k}\t{v:.4f}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DivergenceError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OnsetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
