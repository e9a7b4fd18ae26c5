"""Command-line surface: score, mine, eval, ablate, sweep, synth, bench."""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import errors, kernels, metrics, mining, mkio
from .heatmap import ABLATION_TOGGLES, Toggles, baseline_map, maskomaly
from .model import HyperParams, QueryIndexSet
from .synth import SynthSpec, synth_generate

EXIT_CODES = {
    errors.DimensionMismatch: 10,
    errors.RangeViolation: 11,
    errors.RowSumViolation: 12,
    errors.BadMagic: 13,
    errors.TruncatedPayload: 14,
    errors.MalformedHeader: 15,
    errors.LabelViolation: 16,
    errors.InvalidToggles: 17,
    errors.InconsistentQueryCount: 18,
    errors.InvalidBins: 19,
    errors.NoPositives: 20,
    errors.DegenerateLabels: 21,
    errors.GridMismatch: 22,
    errors.InfeasibleSpec: 23,
}
EXIT_IO = 3
EXIT_OTHER = 9


@dataclass
class RunConfig:
    """Everything one subcommand run needs, resolved from flags."""

    hyper: HyperParams = field(default_factory=HyperParams)
    toggles: Toggles = field(default_factory=Toggles)
    t_ground: float = 0.3
    mdm_margins: tuple = (0.6, 0.7)
    metric_mode: str = "exact"
    bins: int = metrics.DEFAULT_BINS
    threads: int = 1
    seed: int = 0
    backend: str | None = None


def _add_common(parser: argparse.ArgumentParser):
    g = parser.add_argument_group("pipeline hyperparameters")
    g.add_argument("--lambda", dest="lam", type=float, default=HyperParams.lam)
    g.add_argument("--t-mask", type=float, default=HyperParams.t_mask)
    g.add_argument("--t-border", type=float, default=HyperParams.t_border)
    g.add_argument("--eps-border", type=float, default=HyperParams.eps_border)
    g.add_argument("--t-iou", type=float, default=HyperParams.t_iou)
    g.add_argument("--t-query", type=float, default=HyperParams.t_query)
    g.add_argument("--eps-query", type=float, default=HyperParams.eps_query)
    g.add_argument("--t-ground", type=float, default=0.3)
    g.add_argument("--mdm-grid", type=int, default=HyperParams.mdm_grid)
    g.add_argument("--mdm-margin", type=float, action="append", default=None,
                   help="may repeat; defaults to 0.6 and 0.7")
    t = parser.add_argument_group("stage toggles")
    t.add_argument("--no-accept", action="store_true")
    t.add_argument("--no-reject", action="store_true")
    t.add_argument("--no-borders", action="store_true")
    t.add_argument("--no-init", action="store_true")
    m = parser.add_argument_group("metrics and execution")
    m.add_argument("--metric-mode", choices=("exact", "binned"), default="exact")
    m.add_argument("--bins", type=int, default=metrics.DEFAULT_BINS)
    m.add_argument("--threads", type=int, default=1)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--backend", choices=("compiled", "fallback"), default=None)


def _config(args) -> RunConfig:
    return RunConfig(
        hyper=HyperParams(
            lam=args.lam,
            t_mask=args.t_mask,
            t_border=args.t_border,
            eps_border=args.eps_border,
            t_iou=args.t_iou,
            t_query=args.t_query,
            eps_query=args.eps_query,
            mdm_grid=args.mdm_grid,
            mdm_margin=(args.mdm_margin or [0.6])[0],
        ),
        toggles=Toggles(
            accept=not args.no_accept,
            reject=not args.no_reject,
            borders=not args.no_borders,
            init=not args.no_init,
        ),
        t_ground=args.t_ground,
        mdm_margins=tuple(args.mdm_margin) if args.mdm_margin else (0.6, 0.7),
        metric_mode=args.metric_mode,
        bins=args.bins,
        threads=max(1, args.threads),
        seed=args.seed,
        backend=args.backend,
    )


def _bundle_paths(spec: str):
    path = Path(spec)
    if path.is_dir():
        found = sorted(path.glob("*.mkio"))
        if not found:
            raise FileNotFoundError(f"no *.mkio files in {path}")
        return found
    if not path.exists():
        raise FileNotFoundError(f"{path} does not exist")
    return [path]


def _label_for(bundle_path: Path, labels_dir: Path) -> Path:
    candidate = labels_dir / (bundle_path.stem + ".pgm")
    if not candidate.exists():
        raise FileNotFoundError(f"no label map {candidate} for {bundle_path.name}")
    return candidate


def _parallel_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _load_query_sets(path_str):
    if not path_str:
        return QueryIndexSet(), QueryIndexSet(), None
    return mkio.read_query_sets(path_str)


def _print(line: str):
    sys.stdout.write(line + "\n")


# --- subcommands -----------------------------------------------------------


def cmd_score(args) -> int:
    cfg = _config(args)
    anomalous, preset, _ = _load_query_sets(args.queries)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = _bundle_paths(args.bundles)

    def score_one(path: Path):
        masks, probs = mkio.read_bundle(path)
        heat = maskomaly(masks, probs, anomalous, preset, cfg.hyper, cfg.toggles, backend=cfg.backend)
        mkio.write_heatmap(heat, out_dir / (path.stem + ".mkio"))
        return path.name

    for name in _parallel_map(score_one, paths, cfg.threads):
        _print(f"scored {name}")
    return 0


def _load_eval_inputs(args, cfg: RunConfig):
    """Pairs of (heatmap, labelmap); raw bundles are scored on the fly."""
    anomalous, preset, _ = _load_query_sets(getattr(args, "queries", None))
    labels_dir = Path(args.labels)
    # resolve every path before reading anything
    path_pairs = [(p, _label_for(p, labels_dir)) for p in _bundle_paths(args.inputs)]

    def eval_one(paths):
        bundle_path, label_path = paths
        bundle = mkio.read_bundle(bundle_path)
        if mkio.is_heatmap(bundle):
            heat = mkio.read_heatmap(bundle_path)
        else:
            masks, probs = bundle
            heat = maskomaly(masks, probs, anomalous, preset, cfg.hyper, cfg.toggles, backend=cfg.backend)
        return heat, mkio.read_labelmap(label_path)

    return _parallel_map(eval_one, path_pairs, cfg.threads)


def _per_image_metrics(pairs, cfg: RunConfig):
    """Mean of per-image metrics over the images where they are defined."""
    sums = {"ap": 0.0, "fpr95": 0.0, "auroc": 0.0}
    sums.update({f"mdm_f1_{int(round(m * 100))}": 0.0 for m in cfg.mdm_margins})
    used = 0
    for heat, truth in pairs:
        part = metrics.ScoredPixels.from_maps(heat, truth)
        if part.n_positive == 0 or part.n_negative == 0:
            continue
        used += 1
        sums["ap"] += metrics.average_precision(part, cfg.metric_mode, cfg.bins)
        sums["fpr95"] += metrics.fpr_at_tpr(part, 0.95, cfg.metric_mode, cfg.bins)
        sums["auroc"] += metrics.auroc(part, cfg.metric_mode, cfg.bins)
        for margin in cfg.mdm_margins:
            key = f"mdm_f1_{int(round(margin * 100))}"
            sums[key] += metrics.mdm_from_scored(part, margin, cfg.hyper.mdm_grid)
    if used == 0:
        raise errors.NoPositives("no image has both positive and negative pixels")
    report = {key: value / used for key, value in sums.items()}
    report["images_used"] = used
    pixels = metrics.ScoredPixels.concatenate(
        metrics.ScoredPixels.from_maps(heat, truth) for heat, truth in pairs
    )
    return report, pixels


def _pooled_metrics(pairs, cfg: RunConfig) -> dict:
    pixels = metrics.ScoredPixels.concatenate(
        metrics.ScoredPixels.from_maps(heat, truth) for heat, truth in pairs
    )
    if cfg.metric_mode == "binned":
        stats = metrics.ThresholdStats.empty(cfg.bins)
        for heat, truth in pairs:
            part = metrics.ThresholdStats.from_scored(
                metrics.ScoredPixels.from_maps(heat, truth), cfg.bins
            )
            stats = metrics.merge_stats(stats, part)
        report = {
            "ap": metrics.ap_from_stats(stats),
            "fpr95": metrics.fpr_at_tpr_from_stats(stats, 0.95),
            "auroc": metrics.auroc_from_stats(stats),
        }
    else:
        report = {
            "ap": metrics.average_precision(pixels),
            "fpr95": metrics.fpr_at_tpr(pixels, 0.95),
            "auroc": metrics.auroc(pixels),
        }
    for margin in cfg.mdm_margins:
        key = f"mdm_f1_{int(round(margin * 100))}"
        report[key] = metrics.mdm_from_scored(pixels, margin, cfg.hyper.mdm_grid)
    report["pixels"] = len(pixels.scores)
    report["positives"] = pixels.n_positive
    return report, pixels


def cmd_eval(args) -> int:
    cfg = _config(args)
    pairs = _load_eval_inputs(args, cfg)
    if args.per_image:
        report, pixels = _per_image_metrics(pairs, cfg)
    else:
        report, pixels = _pooled_metrics(pairs, cfg)
    for key, value in report.items():
        _print(f"{key} {value:.6f}" if isinstance(value, float) else f"{key} {value}")
    if args.report:
        mkio.write_report(args.report, report)
    if args.curve_dir:
        curve_dir = Path(args.curve_dir)
        curve_dir.mkdir(parents=True, exist_ok=True)
        t, precision, recall = metrics.pr_curve(pixels)
        mkio.write_table(curve_dir / "pr.tsv", ("threshold", "precision", "recall"),
                         zip(t.tolist(), precision.tolist(), recall.tolist()))
        t, fpr, tpr = metrics.roc_curve(pixels)
        mkio.write_table(curve_dir / "roc.tsv", ("threshold", "fpr", "tpr"),
                         zip(t.tolist(), fpr.tolist(), tpr.tolist()))
    return 0


def _load_mining_inputs(args):
    labels_dir = Path(args.labels)
    path_pairs = [(p, _label_for(p, labels_dir)) for p in _bundle_paths(args.bundles)]
    bundles = [mkio.read_bundle(p) for p, _ in path_pairs]
    truths = [mkio.read_labelmap(lp) for _, lp in path_pairs]
    return bundles, truths


def cmd_mine(args) -> int:
    cfg = _config(args)
    bundles, truths = _load_mining_inputs(args)
    report = mining.query_anomaly_iou(bundles, truths)
    anomalous = mining.select_anomalous_queries(report, cfg.hyper.t_iou)
    if args.road:
        road_dir = Path(args.road)
        roads = [
            mkio.read_labelmap(road_dir / (path.stem + ".pgm"))
            for path in _bundle_paths(args.bundles)
        ]
        inliers = mining.ground_query_init(bundles, roads, cfg.t_ground)
    else:
        inliers = QueryIndexSet()
    ious = [float(report.avg_iou[q]) for q in anomalous]
    mkio.write_query_sets(args.out, anomalous, inliers, ious)
    _print(f"anomalous queries: {list(anomalous)}")
    _print(f"preset inliers: {list(inliers)}")
    if args.iou_report:
        mkio.write_table(
            args.iou_report,
            ("query", "avg_iou", "images"),
            [(q, float(report.avg_iou[q]), int(report.image_counts[q])) for q in range(report.n_queries)],
        )
    if args.histogram:
        edges = [float(x) for x in args.hist_edges.split(",")]
        counts = mining.iou_histogram(report, edges)
        mkio.write_table(
            args.histogram,
            ("bin_low", "bin_high", "count"),
            [(edges[i], edges[i + 1], int(counts[i])) for i in range(len(counts))],
        )
    if args.specialization_report:
        spec_report = mining.specialized_queries(
            [probs for _masks, probs in bundles], cfg.hyper.t_query, cfg.hyper.eps_query
        )
        mkio.write_table(
            args.specialization_report,
            ("query", "dominant_class", "fraction", "specialized"),
            [
                (q, int(spec_report.dominant_class[q]), float(spec_report.fraction[q]),
                 int(spec_report.specialized[q]))
                for q in range(len(spec_report.fraction))
            ],
        )
    return 0


def cmd_ablate(args) -> int:
    cfg = _config(args)
    anomalous, preset, _ = _load_query_sets(args.queries)
    bundles, truths = _load_mining_inputs(args)

    rows = []
    variants = [(1, None)] + [(vid, ABLATION_TOGGLES[vid]) for vid in sorted(ABLATION_TOGGLES)]
    for vid, toggles in variants:
        pairs = []
        for (masks, probs), truth in zip(bundles, truths):
            if toggles is None:
                heat = baseline_map(masks, probs)
            else:
                heat = maskomaly(masks, probs, anomalous, preset, cfg.hyper, toggles, backend=cfg.backend)
            pairs.append((heat, truth))
        report, _ = _pooled_metrics(pairs, cfg)
        flags = ("n/a",) * 4 if toggles is None else tuple(
            "on" if v else "off" for v in (toggles.accept, toggles.reject, toggles.borders, toggles.init)
        )
        rows.append((vid, *flags, report["ap"], report["fpr95"], report["auroc"]))
        _print(f"id {vid}: ap {report['ap']:.6f} fpr95 {report['fpr95']:.6f} auroc {report['auroc']:.6f}")
    mkio.write_table(
        args.out,
        ("id", "accept", "reject", "borders", "init", "ap", "fpr95", "auroc"),
        rows,
    )
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    anomalous, preset, _ = _load_query_sets(args.queries)
    bundles, truths = _load_mining_inputs(args)
    rows = mining.rank_sweep(
        anomalous,
        bundles,
        truths,
        cfg.hyper,
        n_max=args.n_max,
        preset_inliers=preset,
        toggles=cfg.toggles,
        mode=cfg.metric_mode,
        bins=cfg.bins,
        backend=cfg.backend,
    )
    for row in rows:
        _print(f"n {row['n']}: ap {row['ap']:.6f} fpr95 {row['fpr95']:.6f} auroc {row['auroc']:.6f}")
    mkio.write_table(
        args.out,
        ("n", "ap", "fpr95", "auroc"),
        [(r["n"], r["ap"], r["fpr95"], r["auroc"]) for r in rows],
    )
    return 0


def cmd_synth(args) -> int:
    cfg = _config(args)
    spec = SynthSpec(
        height=args.height,
        width=args.width,
        n_classes=args.classes,
        n_inlier_queries=args.inlier_queries,
        n_anomaly_queries=args.anomaly_queries,
        anomaly_shapes=args.shapes,
        noise_level=args.noise,
    )
    out_dir = Path(args.out)
    (out_dir / "bundles").mkdir(parents=True, exist_ok=True)
    (out_dir / "labels").mkdir(parents=True, exist_ok=True)
    planted_a = planted_i = None
    for i in range(args.count):
        masks, probs, labels, planted_a, planted_i = synth_generate(cfg.seed + i, spec)
        mkio.write_bundle(masks, probs, out_dir / "bundles" / f"img_{i:03d}.mkio")
        mkio.write_labelmap(labels, out_dir / "labels" / f"img_{i:03d}.pgm")
    mkio.write_query_sets(out_dir / "planted.json", planted_a, planted_i)
    _print(f"wrote {args.count} scenes to {out_dir}")
    _print(f"planted anomalous queries: {list(planted_a)}")
    return 0


def cmd_bench(args) -> int:
    cfg = _config(args)
    if args.bundle:
        masks, probs = mkio.read_bundle(args.bundle)
        anomalous = _load_query_sets(args.queries)[0] if args.queries else QueryIndexSet()
    else:
        masks, probs, anomalous = bench_mod.make_bench_bundle(
            args.height, args.width, args.queries_n, args.classes, cfg.seed
        )
    backends = kernels.available_backends() if args.bench_backend == "both" else (args.bench_backend,)
    _print(
        f"score path: {masks.height}x{masks.width}, N={masks.n_queries}, "
        f"C={probs.n_classes}, reps={args.reps}"
    )
    for result in bench_mod.run_benchmark(
        masks, probs, anomalous, hyper=cfg.hyper, toggles=cfg.toggles,
        repetitions=args.reps, backends=backends,
    ):
        _print(
            f"{result['backend']}: mean {result['mean_s'] * 1e3:.2f} ms, "
            f"min {result['min_s'] * 1e3:.2f} ms over {result['repetitions']} runs"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maskomaly",
        description="Anomaly heatmaps from mask-network outputs: scoring, mining, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="bundles -> heatmap files")
    p.add_argument("--bundles", required=True, help="bundle file or directory")
    p.add_argument("--queries", default=None, help="query-set sidecar (anomalous + preset inliers)")
    p.add_argument("--out", required=True, help="output directory for heatmaps")
    _add_common(p)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("mine", help="validation bundles + ground truth -> query sets")
    p.add_argument("--bundles", required=True)
    p.add_argument("--labels", required=True, help="directory of P5 label maps")
    p.add_argument("--road", default=None, help="directory of P5 road-prediction maps")
    p.add_argument("--out", required=True, help="query-set sidecar to write")
    p.add_argument("--iou-report", default=None, help="optional per-query IoU table")
    p.add_argument("--histogram", default=None, help="optional IoU histogram table")
    p.add_argument("--hist-edges", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    p.add_argument("--specialization-report", default=None,
                   help="optional per-query class-specialization table")
    _add_common(p)
    p.set_defaults(fn=cmd_mine)

    p = sub.add_parser("eval", help="heatmaps or bundles + ground truth -> metrics report")
    p.add_argument("--inputs", required=True, help="heatmap/bundle file or directory")
    p.add_argument("--labels", required=True)
    p.add_argument("--queries", default=None)
    p.add_argument("--report", default=None, help="metrics report file to write")
    p.add_argument("--curve-dir", default=None, help="directory for PR/ROC curve tables")
    p.add_argument("--per-image", action="store_true",
                   help="average per-image metrics instead of pooling pixels")
    _add_common(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate", help="run the stage-toggle matrix")
    p.add_argument("--bundles", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--queries", default=None)
    p.add_argument("--out", required=True, help="ablation table to write")
    _add_common(p)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("sweep", help="mask-count study: metrics for top-n anomalous queries")
    p.add_argument("--bundles", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--n-max", type=int, default=16)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("synth", help="generate a synthetic fixture suite")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--height", type=int, default=80)
    p.add_argument("--width", type=int, default=120)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--inlier-queries", type=int, default=4)
    p.add_argument("--anomaly-queries", type=int, default=3)
    p.add_argument("--shapes", choices=("rect", "disc", "mixed"), default="rect")
    p.add_argument("--noise", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("bench", help="time the score path")
    p.add_argument("--bundle", default=None, help="time this bundle instead of a generated one")
    p.add_argument("--queries", default=None)
    p.add_argument("--height", type=int, default=720)
    p.add_argument("--width", type=int, default=1280)
    p.add_argument("--queries-n", type=int, default=100)
    p.add_argument("--classes", type=int, default=19)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--bench-backend", choices=("compiled", "fallback", "both"), default="both")
    _add_common(p)
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except errors.MaskomalyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CODES.get(type(exc), EXIT_OTHER)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
