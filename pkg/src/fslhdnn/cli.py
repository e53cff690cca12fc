"""Command-line front end.

Subcommands: gen-synth, cluster, extract, encode, train, infer, episode,
cost, convert. Exit codes: 0 ok, 2 validation, 3 numeric, 4 I/O/format.
Set FSLHD_LOG=debug|info|warning to control logging.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .classifier import infer as hdc_infer
from .classifier import train_batched
from .clustering import cluster_layer
from .cost import (CostBreakdown, cost_fsl_hdnn, cost_full_ft, cost_partial_ft,
                   estimate_ft_phases, estimate_partial_gc, hdc_cost_per_sample)
from .crp import CrpConfig, Hypervector, encode
from .early_exit import (ExitPolicy, branch_setup, infer_early_exit,
                         train_branches, exit_statistics)
from .episodes import (EpisodeSpec, FeatureDataset, make_synthetic_dataset,
                       run_episodes)
from .errors import FslError, FormatError, ValidationError
from .extractor import ModelGraph, run_model
from .model_io import (load_class_memory, load_clustered, load_model,
                       save_class_memory, save_clustered)
from .numerics import DType, Tensor, tensor
from .tensor_io import load_tensor, save_tensor

log = logging.getLogger("fslhdnn")


def _setup_logging():
    level = os.environ.get("FSLHD_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_metrics(path, rows, fmt):
    if fmt == "json":
        _write_json(path, rows)
        return
    keys = sorted({k for r in rows for k in r})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def _load_crp_config(path):
    with open(path) as fh:
        cfg = json.load(fh)
    try:
        return CrpConfig(int(cfg["F"]), int(cfg["D"]), int(cfg["seed"]))
    except KeyError as exc:
        raise FormatError(f"crp config missing key {exc}") from None


def cmd_gen_synth(args):
    ds = make_synthetic_dataset(args.classes, args.dim, args.per_class,
                                args.separation, args.seed)
    save_tensor(args.out, tensor(ds.features, DType.F32))
    save_tensor(args.labels, tensor(ds.labels.astype(np.int32), DType.I32))
    log.info("wrote %s samples to %s", len(ds.labels), args.out)


def cmd_cluster(args):
    w = load_tensor(args.weights)
    layer = cluster_layer(w, args.ch_sub, args.centroids, args.seed,
                          stride=args.stride, padding=args.padding)
    save_clustered(args.out, layer)


def cmd_extract(args):
    model = load_model(args.model)
    image = load_tensor(args.input)
    result = run_model(model, image, args.mode)
    base, ext = os.path.splitext(args.branches)
    paths = []
    for bf in result.branches:
        path = args.branches if len(result.branches) == 1 else f"{base}.{bf.block_index}{ext}"
        save_tensor(path, tensor(bf.values, DType.F32))
        paths.append(path)
    _write_json(args.branches + ".json", {
        "branches": [{"block": b.block_index, "dim": b.dim,
                      "path": os.path.basename(p)}
                     for b, p in zip(result.branches, paths)],
        "ops": {"multiplies": result.ops.multiplies, "adds": result.ops.adds,
                "index_accumulates": result.ops.index_accumulates},
    })


def cmd_encode(args):
    config = _load_crp_config(args.config)
    feats = load_tensor(args.features).data
    if feats.ndim == 1:
        feats = feats[None]
    hvs = [encode(config, row.astype(np.int64), args.bits) for row in feats]
    out = np.stack([hv.values for hv in hvs])
    save_tensor(args.out, tensor(out if len(hvs) > 1 else out[0], DType.I32))
    _write_json(args.out + ".json", {"declared_bits": args.bits,
                                     "D": config.hv_dim, "F": config.feature_dim})


def cmd_train(args):
    config = _load_crp_config(args.config)
    feats = load_tensor(args.features).data
    labels = load_tensor(args.labels).data.astype(int).ravel()
    if feats.ndim != 2 or len(feats) != len(labels):
        raise ValidationError("features must be [n, F] matching labels")
    pairs = [(feats[i].astype(np.int64), int(labels[i])) for i in range(len(labels))]
    memory = train_batched(pairs, config, args.bits)
    save_class_memory(args.out, memory)


def _parse_early_exit(text):
    policy = {}
    for part in text.split(","):
        k, _, v = part.partition("=")
        policy[k.strip().lower()] = int(v)
    if "es" not in policy or "ec" not in policy:
        raise ValidationError("--early-exit expects Es=<int>,Ec=<int>")
    return ExitPolicy(policy["es"], policy["ec"], enabled=True)


def cmd_infer(args):
    memory = load_class_memory(args.memory)
    if args.early_exit or args.model:
        if not (args.model and args.images):
            raise ValidationError("early-exit inference needs --model and --images")
        model = load_model(args.model)
        images = load_tensor(args.images).data
        if images.ndim == 3:
            images = images[None]
        setup = branch_setup(model, images[0], memory.hv_dim, args.seed,
                             feature_bits=args.feature_bits, mode=args.mode)
        policy = (_parse_early_exit(args.early_exit) if args.early_exit
                  else ExitPolicy(enabled=False))
        preds, traces = [], []
        for img in images:
            pred, trace = infer_early_exit(model, memory, img, setup, policy,
                                           mode=args.mode)
            preds.append(pred.class_id)
            traces.append(trace)
        _write_json(args.out, {"predictions": preds})
        if args.trace_out:
            with open(args.trace_out, "w") as fh:
                for t in traces:
                    fh.write(json.dumps({
                        "exit_block": t.exit_block,
                        "layers_executed": t.layers_executed,
                        "predictions": t.predictions,
                    }, sort_keys=True) + "\n")
            stats = exit_statistics(traces, model)
            log.info("avg conv layers executed: %.2f", stats["avg_layers"])
        return
    if not args.hv:
        raise ValidationError("provide --hv, or --model/--images for early exit")
    hv = load_tensor(args.hv).data
    if hv.ndim == 1:
        hv = hv[None]
    preds = [hdc_infer(Hypervector(row.astype(np.int32)), memory).class_id
             for row in hv]
    _write_json(args.out, {"predictions": preds})


def cmd_episode(args):
    feats = load_tensor(args.dataset).data
    labels = load_tensor(args.labels).data.astype(int).ravel()
    ds = FeatureDataset(np.asarray(feats, np.float32), labels)
    specs = [EpisodeSpec(args.n_way, args.k_shot, args.q_query, args.seed + i)
             for i in range(args.episodes)]
    results, summary = run_episodes(ds, specs, threads=args.threads,
                                    hv_dim=args.hv_dim, crp_seed=args.seed,
                                    feature_bits=args.feature_bits,
                                    hv_bits=args.bits)
    if args.out_format == "json":
        _write_json(args.out, {"episodes": results, "summary": summary})
    else:
        _write_metrics(args.out, results, "csv")


def _parse_episode_shape(text):
    try:
        n, k = text.lower().split("x")
        return int(n), int(k)
    except ValueError:
        raise ValidationError("--episode expects NxK, e.g. 10x5") from None


def cmd_cost(args):
    model = load_model(args.model)
    n_way, k_shot = _parse_episode_shape(args.episode)
    in_ch = None
    for layer in model.layers:
        if hasattr(layer, "weights"):
            w = layer.weights
            in_ch = w.cin if hasattr(w, "cin") else w.shape[1]
            break
    if in_ch is None:
        raise ValidationError("model has no conv layer")
    probe = np.zeros((in_ch, args.input_hw, args.input_hw), np.float32)
    fp_direct = run_model(model, probe, "direct").ops.total()
    fp_clustered = run_model(model, probe, "clustered").ops.total()
    result = run_model(model, probe, "direct")
    feature_dim = result.branches[-1].dim
    n_sample = n_way * k_shot
    hdc = hdc_cost_per_sample(feature_dim, args.hv_dim, n_way)
    phases = estimate_ft_phases(fp_direct)
    regimes = args.regimes.split(",")
    out = {"assumptions": {
        "full_ft_iterations": args.full_iters,
        "partial_ft_iterations": args.partial_iters,
        "gradient_phase_costs": "full FT: GC=FP, BP=FP, WU=0.1*FP; partial FT: GC=3*C*F head retraining",
        "input_hw": args.input_hw,
    }}
    if "full" in regimes:
        out["full"] = cost_full_ft(CostBreakdown(
            cost_fp=fp_direct, t_itr=args.full_iters, n_sample=n_sample, **phases))
    if "partial" in regimes:
        out["partial"] = cost_partial_ft(CostBreakdown(
            cost_fp=fp_direct,
            cost_gc=estimate_partial_gc(feature_dim, n_way),
            t_itr=args.partial_iters, n_sample=n_sample))
    if "knn" in regimes:
        out["knn"] = n_sample * fp_direct  # feature extraction only
    if "hdnn" in regimes:
        out["hdnn"] = cost_fsl_hdnn(CostBreakdown(
            cost_fp=fp_clustered, cost_hdc=hdc, n_sample=n_sample))
    _write_json(args.out, out)


def cmd_convert(args):
    shape = tuple(int(d) for d in args.shape.lower().split("x"))
    with open(args.raw, "rb") as fh:
        raw = fh.read()
    count = int(np.prod(shape))
    if len(raw) != count:
        raise FormatError(f"raw file holds {len(raw)} bytes, shape needs {count}")
    planes = np.frombuffer(raw, np.uint8).reshape(shape).astype(np.float32)
    save_tensor(args.out, tensor(planes, DType.F32))


def build_parser():
    p = argparse.ArgumentParser(prog="fslhdnn", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--out-format", choices=["json", "csv"], default="json")

    sp = sub.add_parser("gen-synth", help="generate the synthetic benchmark")
    common(sp)
    sp.add_argument("--classes", type=int, default=20)
    sp.add_argument("--dim", type=int, default=256)
    sp.add_argument("--per-class", type=int, default=40)
    sp.add_argument("--separation", type=float, default=4.0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--labels", required=True)
    sp.set_defaults(func=cmd_gen_synth)

    sp = sub.add_parser("cluster", help="K-means-cluster a conv weight tensor")
    common(sp)
    sp.add_argument("--weights", required=True)
    sp.add_argument("--ch-sub", type=int, required=True)
    sp.add_argument("--centroids", type=int, required=True)
    sp.add_argument("--stride", type=int, default=1)
    sp.add_argument("--padding", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_cluster)

    sp = sub.add_parser("extract", help="run a model and dump branch features")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--mode", choices=["direct", "clustered"], default="direct")
    sp.add_argument("--branches", required=True)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("encode", help="project features into hypervectors")
    common(sp)
    sp.add_argument("--config", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--bits", type=int, default=16)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("train", help="batched single-pass HDC training")
    common(sp)
    sp.add_argument("--config", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--bits", type=int, default=4)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("infer", help="L1 nearest-class inference")
    common(sp)
    sp.add_argument("--memory", required=True)
    sp.add_argument("--hv")
    sp.add_argument("--model")
    sp.add_argument("--images")
    sp.add_argument("--mode", choices=["direct", "clustered"], default="direct")
    sp.add_argument("--early-exit", metavar="Es=2,Ec=2")
    sp.add_argument("--feature-bits", type=int, default=4)
    sp.add_argument("--trace-out")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("episode", help="run N-way k-shot episodes")
    common(sp)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--n-way", type=int, default=5)
    sp.add_argument("--k-shot", type=int, default=5)
    sp.add_argument("--q-query", type=int, default=5)
    sp.add_argument("--episodes", type=int, default=1)
    sp.add_argument("--hv-dim", type=int, default=4096)
    sp.add_argument("--feature-bits", type=int, default=4)
    sp.add_argument("--bits", type=int, default=4)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_episode)

    sp = sub.add_parser("cost", help="analytic op-count comparison")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--episode", default="10x5")
    sp.add_argument("--regimes", default="full,partial,knn,hdnn")
    sp.add_argument("--hv-dim", type=int, default=4096)
    sp.add_argument("--input-hw", type=int, default=16)
    sp.add_argument("--full-iters", type=int, default=5)
    sp.add_argument("--partial-iters", type=int, default=15)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_cost)

    sp = sub.add_parser("convert", help="raw RGB byte planes -> FSLT tensor")
    common(sp)
    sp.add_argument("--raw", required=True)
    sp.add_argument("--shape", required=True, metavar="CxHxW")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_convert)
    return p


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except FslError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
