"""Command-line surface: validate, saliency, sweep-rho, rerank, eval, synth.

Every subcommand exits 0 on success and nonzero with a category-prefixed
message on stderr otherwise.  `--jobs` only controls how many worker
threads run; it never changes any output byte.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as bundle_io
from .errors import ParameterError, ReidflowError
from .evaluation import compare_table, run_trials
from .flow import split_by_velocity
from .model import PipelineConfig, ReidDataset, validate_inputs
from .rerank import rerank_all
from .saliency import saliency_scores, select_key_persons, sweep_rho, union_key_sets
from .synth import SynthParams, generate_flow


def _load(args) -> tuple[ReidDataset, PipelineConfig]:
    config = (
        bundle_io.load_config(args.config) if args.config else PipelineConfig()
    )
    dataset = bundle_io.load_bundle(args.bundle, config)
    return dataset, config


def _cmd_validate(args) -> int:
    dataset, _ = _load(args)
    report = validate_inputs(dataset.bank, dataset.probe, dataset.gallery)
    print(report)
    if report.ok:
        return 0
    print(
        f"validation: bundle failed with {len(report.issues)} issue(s)",
        file=sys.stderr,
    )
    return 1


def _cmd_saliency(args) -> int:
    dataset, config = _load(args)
    bank, probe = dataset.bank, dataset.probe
    if args.feature:
        names = [args.feature]
    else:
        names = [s.name for s in bank.spaces if s.has_embeddings]
    if not names:
        raise ParameterError("no embedding feature spaces in this bundle")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in names:
        space = bank.space(name)
        if not space.has_embeddings:
            raise ParameterError(
                f"feature {name!r} is a precomputed metric; it has no saliency"
            )
        table = saliency_scores(space, probe, config.k_nn)
        selected = {pid for pid, _ in select_key_persons(table, config.rho_for(space))}
        lines = ["id,score,raw_knn_mean,is_key"]
        for pid in probe.ids:
            lines.append(
                f"{pid},{table.scores[pid]:.6f},{table.raw_knn_mean[pid]:.6f},"
                f"{1 if pid in selected else 0}"
            )
        (out / f"saliency_{name}.csv").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
    keys = union_key_sets(bank, probe, config)
    lines = ["id,feature,score"]
    for entry in keys.union:
        lines.append(f"{entry.id},{entry.feature},{entry.score:.6f}")
    (out / "keys.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"{len(keys)} key person(s) across {len(names)} feature space(s)")
    for entry in keys.union:
        print(f"  {entry.id}  {entry.feature}  {entry.score:.6f}")
    return 0


def _parse_grid(tok: str) -> np.ndarray:
    try:
        start, stop, count = tok.split(":")
        grid = np.linspace(float(start), float(stop), int(count))
    except ValueError:
        raise ParameterError(
            f"grid must look like start:stop:count, got {tok!r}"
        ) from None
    if grid.size == 0:
        raise ParameterError("grid must contain at least one point")
    return grid


def _cmd_sweep_rho(args) -> int:
    dataset, config = _load(args)
    space = dataset.bank.space(args.feature)
    grid = _parse_grid(args.grid)
    rows = sweep_rho(
        space, dataset.probe, dataset.gallery, grid, k=config.k_nn
    )
    written = bundle_io.emit_results(args.out, sweep=rows)
    print("rho sigma n_keys")
    for rho, sigma, n_keys in rows:
        print(f"{rho:.6f} {sigma:.6f} {n_keys}")
    print(f"wrote {written['sweep']}")
    return 0


def _cmd_rerank(args) -> int:
    dataset, config = _load(args)
    probe = split_by_velocity(
        dataset.probe, config.angle_threshold, config.speed_tolerance
    )
    gallery = split_by_velocity(
        dataset.gallery, config.angle_threshold, config.speed_tolerance
    )
    keys = union_key_sets(dataset.bank, probe, config)
    scores = rerank_all(
        probe, gallery, dataset.bank, keys, config, jobs=args.jobs
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["query,rank,gallery_id,score"]
    for i, pid in enumerate(scores.probe_ids):
        row = scores.values[i]
        order = sorted(
            range(len(scores.gallery_ids)),
            key=lambda j: (row[j], scores.gallery_ids[j]),
        )
        for rank, j in enumerate(order, start=1):
            lines.append(f"{pid},{rank},{scores.gallery_ids[j]},{row[j]:.6f}")
    path = out / "rankings.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(
        f"re-ranked {len(scores.probe_ids)} queries with {len(keys)} key "
        f"person(s); wrote {path}"
    )
    return 0


def _cmd_eval(args) -> int:
    dataset, config = _load(args)
    seed = args.seed if args.seed is not None else config.seed
    result = run_trials(
        dataset,
        config,
        num_trials=args.trials,
        split=args.split,
        seed=seed,
        jobs=args.jobs,
    )
    curves = [("baseline", result.baseline_curve), ("key-aided", result.curve)]
    written = bundle_io.emit_results(args.out, named_curves=curves)
    size = result.curve.accuracy.size
    ranks = [r for r in (1, 5, 10, 20) if r <= size]
    print(compare_table(curves, ranks))
    print(f"wrote {written['cmc']}, {written['summary']}, {written['svg']}")
    return 0


def _cmd_synth(args) -> int:
    params = SynthParams(
        num_identities=args.n,
        num_features=args.features,
        dims=args.dim,
        salient_fraction=args.salient_fraction,
        cluster_spread=args.cluster_spread,
        cross_view_noise=args.view_noise,
        arrival_rate=args.arrival_rate,
        transit_mean=args.transit_mean,
        transit_jitter=args.transit_jitter,
        direction_split=args.direction_split,
        speed_spread=args.speed_spread,
        seed=args.seed if args.seed is not None else 0,
    )
    probe, gallery, bank, _ = generate_flow(params)
    written = bundle_io.dump_dataset(probe, gallery, bank, args.out)
    print(
        f"generated {len(probe)} identities x 2 cameras, "
        f"{len(bank.spaces)} feature space(s); wrote {len(written)} files "
        f"to {args.out}"
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reidflow",
        description=(
            "Key-person-aided re-identification re-ranking over temporally "
            "ordered pedestrian flows."
        ),
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="pipeline config file")
    common.add_argument(
        "--seed", type=int, metavar="N", help="override the configured seed"
    )
    common.add_argument(
        "--out", metavar="DIR", default=".", help="output directory (default .)"
    )
    common.add_argument(
        "--jobs",
        type=int,
        default=1,
        metavar="N",
        help="worker threads; never affects results",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "validate", parents=[common], help="check a dataset bundle for defects"
    )
    p.add_argument("bundle", help="bundle directory")
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser(
        "saliency",
        parents=[common],
        help="write saliency tables and the key-person list",
    )
    p.add_argument("bundle", help="bundle directory")
    p.add_argument("--feature", metavar="NAME", help="restrict to one feature")
    p.set_defaults(handler=_cmd_saliency)

    p = sub.add_parser(
        "sweep-rho",
        parents=[common],
        help="trace key-set size and precision along a threshold grid",
    )
    p.add_argument("bundle", help="bundle directory")
    p.add_argument("--feature", required=True, metavar="NAME")
    p.add_argument(
        "--grid",
        default="0:1:21",
        metavar="START:STOP:COUNT",
        help="threshold grid (default 0:1:21)",
    )
    p.set_defaults(handler=_cmd_sweep_rho)

    p = sub.add_parser(
        "rerank", parents=[common], help="write per-query ranked gallery lists"
    )
    p.add_argument("bundle", help="bundle directory")
    p.set_defaults(handler=_cmd_rerank)

    p = sub.add_parser(
        "eval",
        parents=[common],
        help="repeated-split CMC evaluation against the baseline",
    )
    p.add_argument("bundle", help="bundle directory")
    p.add_argument("--trials", type=int, default=10, metavar="N")
    p.add_argument("--split", type=float, default=0.5, metavar="F")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser(
        "synth", parents=[common], help="generate a synthetic dataset bundle"
    )
    p.add_argument("--n", type=int, default=200, help="identities (default 200)")
    p.add_argument(
        "--features", type=int, default=3, help="feature spaces (default 3)"
    )
    p.add_argument(
        "--dim", type=int, default=64, help="embedding dimension (default 64)"
    )
    p.add_argument("--salient-fraction", type=float, default=0.1)
    p.add_argument("--cluster-spread", type=float, default=1.0)
    p.add_argument("--view-noise", type=float, default=1.3)
    p.add_argument("--arrival-rate", type=float, default=30.0)
    p.add_argument("--transit-mean", type=float, default=300.0)
    p.add_argument("--transit-jitter", type=float, default=15.0)
    p.add_argument("--direction-split", type=float, default=0.5)
    p.add_argument("--speed-spread", type=float, default=0.2)
    p.set_defaults(handler=_cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ReidflowError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
