"""CMC curves, the repeated half-split trial protocol, and report tables."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EvaluationError, ParameterError
from .flow import build_flow, split_by_velocity
from .model import FeatureBank, PipelineConfig, ReidDataset, ScoreMatrix
from .rerank import rerank_all
from .saliency import union_key_sets


@dataclass(frozen=True)
class CMCCurve:
    """Cumulative match accuracy per rank r = 1..gallery size."""

    accuracy: np.ndarray
    num_queries: int

    def __post_init__(self) -> None:
        acc = np.array(self.accuracy, dtype=np.float64)
        acc.setflags(write=False)
        if acc.ndim != 1 or acc.size == 0:
            raise ParameterError("accuracy must be a non-empty vector")
        if acc.min() < 0.0 or acc.max() > 1.0 + 1e-12:
            raise ParameterError("accuracy values must lie in [0, 1]")
        if np.any(np.diff(acc) < -1e-12):
            raise ParameterError("accuracy must be non-decreasing in rank")
        object.__setattr__(self, "accuracy", acc)

    def at(self, rank: int) -> float:
        """Accuracy at a 1-based rank."""
        if not 1 <= rank <= self.accuracy.size:
            raise ParameterError(
                f"rank {rank} outside 1..{self.accuracy.size}"
            )
        return float(self.accuracy[rank - 1])


def rank_of_true_match(
    ranked: Sequence[str] | Sequence[tuple[str, float]], true_id: str
) -> int:
    """1-based position of the true match in an already-ordered gallery list."""
    for pos, item in enumerate(ranked, start=1):
        gid = item[0] if isinstance(item, tuple) else item
        if gid == true_id:
            return pos
    raise EvaluationError(f"true match {true_id!r} absent from ranked list")


def cmc_curve(ranks: Sequence[int], gallery_size: int) -> CMCCurve:
    """Fraction of queries whose true match appears within each rank."""
    if not ranks:
        raise ParameterError("cmc needs at least one query rank")
    for r in ranks:
        if not 1 <= r <= gallery_size:
            raise ParameterError(
                f"rank {r} outside 1..{gallery_size}"
            )
    counts = np.bincount(ranks, minlength=gallery_size + 1)[1:]
    acc = np.cumsum(counts) / len(ranks)
    return CMCCurve(accuracy=acc, num_queries=len(ranks))


def _ranks_from_matrix(scores: ScoreMatrix, truth: dict[str, str]) -> list[int]:
    """Rank of each probe's true match under (score, gallery id) ordering."""
    gids = scores.gallery_ids
    ranks = []
    for i, pid in enumerate(scores.probe_ids):
        true_id = truth[pid]
        row = scores.values[i]
        try:
            jt = gids.index(true_id)
        except ValueError:
            raise EvaluationError(
                f"true match {true_id!r} of probe {pid!r} absent from gallery"
            ) from None
        key_true = (row[jt], true_id)
        better = sum(
            1 for j, gid in enumerate(gids) if (row[j], gid) < key_true
        )
        ranks.append(better + 1)
    return ranks


@dataclass(frozen=True)
class EvalResult:
    """Averaged and per-trial curves for the key-aided and baseline rankings."""

    curve: CMCCurve
    baseline_curve: CMCCurve
    trials: tuple[CMCCurve, ...]
    baseline_trials: tuple[CMCCurve, ...]


def _average(trials: Sequence[CMCCurve]) -> CMCCurve:
    stack = np.vstack([t.accuracy for t in trials])
    return CMCCurve(
        accuracy=stack.mean(axis=0),
        num_queries=sum(t.num_queries for t in trials),
    )


def run_trials(
    dataset: ReidDataset,
    config: PipelineConfig,
    num_trials: int = 10,
    split: float = 0.5,
    seed: int = 0,
    bank: FeatureBank | None = None,
    jobs: int = 1,
) -> EvalResult:
    """Repeated random-split evaluation of the full pipeline.

    Each trial draws `split` of the probe identities as the test set (the
    held-out rest is reserved for external metric calibration and otherwise
    unused), re-selects key persons on the test flow, re-ranks, and scores
    a CMC curve against the baseline metric's own curve.  Trial t is seeded
    from (seed, t), so results are reproducible and independent of how many
    workers run them.
    """
    if not 0.0 < split <= 1.0:
        raise ParameterError("split must lie in (0, 1]")
    if num_trials < 1:
        raise ParameterError("num_trials must be >= 1")
    if seed < 0:
        raise ParameterError("seed must be >= 0")
    bank = bank or dataset.bank
    probe, gallery = dataset.probe, dataset.gallery
    missing = [rec.id for rec in probe.members if rec.true_match is None]
    if missing:
        raise ParameterError(
            f"evaluation needs true_match on every probe member; missing for "
            f"{missing[0]!r}"
        )
    truth = dataset.ground_truth()
    if len(set(truth.values())) != len(truth):
        raise ParameterError("two probe members share the same true match")
    for pid, gid in truth.items():
        if gid not in gallery:
            raise ParameterError(
                f"true match {gid!r} of probe {pid!r} not in gallery"
            )

    all_ids = probe.ids
    n_test = int(round(len(all_ids) * split))
    if n_test < 2:
        raise ParameterError(
            f"split {split} of {len(all_ids)} identities leaves {n_test} "
            f"test members; need at least 2"
        )
    if config.k_nn > n_test - 1:
        raise ParameterError(
            f"k_nn={config.k_nn} too large for test sets of {n_test}"
        )

    def one_trial(t: int) -> tuple[CMCCurve, CMCCurve]:
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([seed, t]))
        )
        idx = rng.choice(len(all_ids), size=n_test, replace=False)
        idx.sort()
        test_ids = [all_ids[i] for i in idx]
        p_flow = build_flow([probe.record(pid) for pid in test_ids], probe.camera)
        g_flow = build_flow(
            [gallery.record(truth[pid]) for pid in test_ids], gallery.camera
        )
        p_flow = split_by_velocity(
            p_flow, config.angle_threshold, config.speed_tolerance
        )
        g_flow = split_by_velocity(
            g_flow, config.angle_threshold, config.speed_tolerance
        )
        keys = union_key_sets(bank, p_flow, config)
        reranked = rerank_all(p_flow, g_flow, bank, keys, config, jobs=1)
        base_space = bank.space(config.baseline_feature or bank.baseline)
        base = ScoreMatrix(
            probe_ids=p_flow.ids,
            gallery_ids=g_flow.ids,
            values=base_space.distances(
                p_flow.ids, p_flow.camera, g_flow.ids, g_flow.camera
            ),
        )
        g_size = len(g_flow.ids)
        return (
            cmc_curve(_ranks_from_matrix(reranked, truth), g_size),
            cmc_curve(_ranks_from_matrix(base, truth), g_size),
        )

    if jobs > 1 and num_trials > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one_trial, range(num_trials)))
    else:
        results = [one_trial(t) for t in range(num_trials)]

    key_curves = tuple(r[0] for r in results)
    base_curves = tuple(r[1] for r in results)
    return EvalResult(
        curve=_average(key_curves),
        baseline_curve=_average(base_curves),
        trials=key_curves,
        baseline_trials=base_curves,
    )


def compare_table(
    curves: Sequence[tuple[str, CMCCurve]],
    ranks: Sequence[int] = (1, 5, 10, 20),
) -> str:
    """Accuracy table, one row per method, values x100 at one decimal."""
    for name, curve in curves:
        for r in ranks:
            if r > curve.accuracy.size:
                raise ParameterError(
                    f"curve {name!r} has no rank {r} (gallery of "
                    f"{curve.accuracy.size})"
                )
    headers = ["method"] + [f"r={r}" for r in ranks]
    rows = [
        [name] + [f"{curve.at(r) * 100.0:.1f}" for r in ranks]
        for name, curve in curves
    ]
    widths = [
        max(len(headers[c]), *(len(row[c]) for row in rows)) if rows else len(headers[c])
        for c in range(len(headers))
    ]
    lines = []
    for row in [headers] + rows:
        cells = [row[0].ljust(widths[0])] + [
            row[c].rjust(widths[c]) for c in range(1, len(row))
        ]
        lines.append(" ".join(cells).rstrip())
    return "\n".join(lines)
