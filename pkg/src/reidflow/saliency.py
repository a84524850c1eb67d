"""K-NN saliency scoring and key-person selection over a feature bank."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import NotFoundError, ParameterError
from .model import (
    FeatureBank,
    FeatureSpace,
    FlowSet,
    KeyEntry,
    KeySet,
    PipelineConfig,
)


@dataclass(frozen=True)
class SaliencyTable:
    """Saliency scores of one flow under one feature space.

    `raw_knn_mean` holds the mean distance to each member's k nearest
    neighbours before normalization; `scores` is its min-max rescaling to
    [0, 1].  When all raw values coincide every score is 0 (nobody stands
    out in a uniform set).
    """

    feature: str
    scores: Mapping[str, float]
    raw_knn_mean: Mapping[str, float]
    k_used: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", dict(self.scores))
        object.__setattr__(self, "raw_knn_mean", dict(self.raw_knn_mean))

    def score(self, pid: str) -> float:
        try:
            return self.scores[pid]
        except KeyError:
            raise NotFoundError(f"id {pid!r} not in saliency table") from None


def _check_k(k: int, n: int) -> None:
    if not 1 <= k <= n - 1:
        raise ParameterError(
            f"k={k} out of range: need 1 <= k <= {n - 1} for a set of {n}"
        )


def knn_mean_distance(
    space: FeatureSpace, flow: FlowSet, person: str, k: int
) -> float:
    """Mean distance from `person` to its k nearest other members of `flow`."""
    n = len(flow)
    _check_k(k, n)
    flow.record(person)
    ids = flow.ids
    row = space.distances([person], flow.camera, ids, flow.camera)[0]
    self_pos = ids.index(person)
    others = np.delete(row, self_pos)
    return float(np.partition(others, k - 1)[:k].mean())


def saliency_scores(space: FeatureSpace, flow: FlowSet, k: int) -> SaliencyTable:
    """Score every member of `flow` by normalized mean k-NN distance.

    Each member's own zero distance is excluded from its neighbour pool.
    Scores are min-max normalized over the flow, so the most isolated member
    scores 1 and the best-embedded member scores 0.
    """
    n = len(flow)
    if n < 2:
        raise ParameterError("saliency needs a flow of at least 2 members")
    _check_k(k, n)
    ids = flow.ids
    d = space.distances(ids, flow.camera, ids, flow.camera)
    raw = _kernels.knn_mean_from_matrix(d, k)
    lo = raw.min()
    hi = raw.max()
    if hi > lo:
        scores = (raw - lo) / (hi - lo)
    else:
        scores = np.zeros_like(raw)
    return SaliencyTable(
        feature=space.name,
        scores={pid: float(s) for pid, s in zip(ids, scores)},
        raw_knn_mean={pid: float(r) for pid, r in zip(ids, raw)},
        k_used=k,
    )


def select_key_persons(
    table: SaliencyTable, rho: float
) -> list[tuple[str, float]]:
    """Members scoring at least `rho`, by descending score then ascending id.

    A threshold above 1 selects nobody; that is a supported way to switch a
    feature off.
    """
    if rho < 0:
        raise ParameterError("rho must be >= 0")
    picked = [(pid, s) for pid, s in table.scores.items() if s >= rho]
    picked.sort(key=lambda item: (-item[1], item[0]))
    return picked


def union_key_sets(
    bank: FeatureBank, flow: FlowSet, config: PipelineConfig
) -> KeySet:
    """Select key persons per feature space and merge them into one set.

    Each space uses its own threshold (config overrides win).  A person
    selected by several features is attributed to the feature where its
    saliency is maximal; ties go to the earlier space in bank order.  Spaces
    without embeddings (precomputed metrics) cannot define saliency and are
    skipped.
    """
    per_feature: dict[str, tuple[tuple[str, float], ...]] = {}
    best: dict[str, KeyEntry] = {}
    for space in bank.spaces:
        if not space.has_embeddings:
            continue
        table = saliency_scores(space, flow, config.k_nn)
        picked = select_key_persons(table, config.rho_for(space))
        per_feature[space.name] = tuple(picked)
        for pid, s in picked:
            cur = best.get(pid)
            if cur is None or s > cur.score:
                best[pid] = KeyEntry(id=pid, feature=space.name, score=s)
    union = tuple(
        sorted(best.values(), key=lambda e: (-e.score, e.id))
    )
    return KeySet(per_feature=per_feature, union=union)


def sweep_rho(
    space: FeatureSpace,
    probe: FlowSet,
    gallery: FlowSet,
    grid: Sequence[float],
    k: int = 5,
) -> list[tuple[float, float, int]]:
    """Trace key-set size and key-match precision along a threshold grid.

    For each rho the key set is selected from `probe`; sigma is the fraction
    of key persons whose nearest gallery member under this space's metric is
    their true match (1.0 for an empty key set).  Useful for picking rho:
    raise it until sigma is high while the set stays non-trivial.
    """
    missing = [rec.id for rec in probe.members if rec.true_match is None]
    if missing:
        raise ParameterError(
            f"rho sweep needs true_match on every probe member; missing for "
            f"{missing[0]!r}" + (f" and {len(missing) - 1} more" if len(missing) > 1 else "")
        )
    table = saliency_scores(space, probe, k)
    gallery_ids = gallery.ids
    d = space.distances(probe.ids, probe.camera, gallery_ids, gallery.camera)
    top_match: dict[str, str] = {}
    for i, pid in enumerate(probe.ids):
        row = d[i]
        best_j = min(
            range(len(gallery_ids)), key=lambda j: (row[j], gallery_ids[j])
        )
        top_match[pid] = gallery_ids[best_j]
    truth = {rec.id: rec.true_match for rec in probe.members}

    out: list[tuple[float, float, int]] = []
    for rho in grid:
        picked = select_key_persons(table, rho)
        n_keys = len(picked)
        if n_keys == 0:
            sigma = 1.0
        else:
            hits = sum(1 for pid, _ in picked if top_match[pid] == truth[pid])
            sigma = hits / n_keys
        out.append((float(rho), sigma, n_keys))
    return out
