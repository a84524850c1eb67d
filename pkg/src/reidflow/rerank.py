"""Key-person-aided re-ranking: anchors, temporal windows, weighted scores.

A query is re-ranked in four steps: pick its temporally nearest key persons,
match each key across cameras to get a confidence d_key, project a temporal
candidate window around each key's match, then discount the baseline
distances of candidates covered by windows.  Weights never exceed 1, so
candidates outside every window keep their baseline score.
"""

from __future__ import annotations

import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .flow import SubsetPairing, correspond_subsets
from .model import (
    WEIGHT_COMBINE_RULES,
    FeatureBank,
    FlowSet,
    KeySet,
    PipelineConfig,
    ScoreMatrix,
)

_EPS = sys.float_info.epsilon


@dataclass(frozen=True)
class KeyAnchor:
    """One key person matched across cameras, as seen from one query.

    `delta_t` is the probe-side frame gap query_T - key_T; `d_key` is the
    key's normalized top-match distance, in (0, 1].
    """

    key_id: str
    feature: str
    delta_t: int
    top_match_id: str
    top_match_time: int
    d_key: float

    def __post_init__(self) -> None:
        if not 0.0 < self.d_key <= 1.0:
            raise ParameterError(
                f"d_key must lie in (0, 1], got {self.d_key}"
            )


@dataclass(frozen=True)
class CandidateWindow:
    """Gallery members whose entering frame falls in an anchor's interval."""

    anchor: KeyAnchor
    member_ids: tuple[str, ...]
    interval: tuple[float, float]


def nearest_key_persons(
    query: str, flow: FlowSet, keys: KeySet, L: int
) -> list[str]:
    """Up to L key persons closest to the query in entering time.

    When the flow is split into velocity subsets, only keys sharing the
    query's subset are considered.  The query itself is eligible if it is a
    key person.  Ties on |gap| prefer the earlier key, then the smaller id.
    An empty result signals that the caller should fall back to the
    baseline ranking.
    """
    if L < 1:
        raise ParameterError("L must be >= 1")
    t_query = flow.entering_frame(query)
    label = flow.subset_of(query)
    if label is None:
        pool = [pid for pid in flow.ids if pid in keys]
    else:
        pool = [pid for pid in flow.subset(label).member_ids if pid in keys]
    pool.sort(
        key=lambda pid: (
            abs(t_query - flow.entering_frame(pid)),
            flow.entering_frame(pid),
            pid,
        )
    )
    return pool[:L]


def _top_match(row: np.ndarray, candidates: Sequence[str]) -> int:
    return min(range(len(candidates)), key=lambda j: (row[j], candidates[j]))


def match_key_person(
    key: str,
    feature: str,
    gallery: FlowSet,
    bank: FeatureBank,
    *,
    probe_camera: str,
    candidate_ids: Sequence[str] | None = None,
    delta_t: int = 0,
) -> KeyAnchor:
    """Match a probe-side key person against gallery candidates.

    The key's distance row (under `feature`) is divided by its maximum so
    values lie in (0, 1]; the anchor's confidence d_key is the normalized
    distance to the argmin candidate.  A degenerate all-zero row yields
    d_key = 1 (no information, no discount), and an exact-zero minimum in a
    non-degenerate row is clamped to the smallest positive weight so the
    (0, 1] contract holds.
    """
    candidates = tuple(candidate_ids) if candidate_ids is not None else gallery.ids
    if not candidates:
        raise ParameterError("key matching needs at least one gallery candidate")
    space = bank.space(feature)
    row = space.distances([key], probe_camera, candidates, gallery.camera)[0]
    j = _top_match(row, candidates)
    top_id = candidates[j]
    m = float(row.max())
    if m == 0.0:
        d_key = 1.0
    else:
        d_key = max(float(row[j]) / m, _EPS)
    return KeyAnchor(
        key_id=key,
        feature=feature,
        delta_t=delta_t,
        top_match_id=top_id,
        top_match_time=gallery.entering_frame(top_id),
        d_key=d_key,
    )


def candidate_window(
    anchor: KeyAnchor,
    gallery: FlowSet,
    tau: float,
    *,
    candidate_ids: Sequence[str] | None = None,
) -> CandidateWindow:
    """Gallery members expected to contain the query's match, by time.

    The interval spans top_match_time + (1 -/+ tau) * delta_t with endpoints
    ordered, so a key that enters after the query (negative delta_t) projects
    a window before its match.  Membership is inclusive.
    """
    if tau < 0:
        raise ParameterError("tau must be >= 0")
    a = anchor.top_match_time + (1.0 - tau) * anchor.delta_t
    b = anchor.top_match_time + (1.0 + tau) * anchor.delta_t
    lo, hi = (a, b) if a <= b else (b, a)
    pool = candidate_ids if candidate_ids is not None else gallery.ids
    members = tuple(
        gid for gid in pool if lo <= gallery.entering_frame(gid) <= hi
    )
    return CandidateWindow(anchor=anchor, member_ids=members, interval=(lo, hi))


def compute_weights(
    windows: Sequence[CandidateWindow],
    gallery_ids: Sequence[str],
    combine: str = "min",
) -> np.ndarray:
    """Per-candidate weight: combined d_key of covering windows, else 1."""
    if combine not in WEIGHT_COMBINE_RULES:
        raise ParameterError(f"combine must be one of {WEIGHT_COMBINE_RULES}")
    covering: dict[str, list[float]] = {}
    for win in windows:
        for gid in win.member_ids:
            covering.setdefault(gid, []).append(win.anchor.d_key)
    omega = np.ones(len(gallery_ids))
    for i, gid in enumerate(gallery_ids):
        ds = covering.get(gid)
        if not ds:
            continue
        if combine == "min":
            omega[i] = min(ds)
        elif combine == "max":
            omega[i] = max(ds)
        elif combine == "mean":
            omega[i] = sum(ds) / len(ds)
        else:
            prod = 1.0
            for d in ds:
                prod *= d
            omega[i] = prod
    return omega


def rerank_scores(base_row: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Weighted dissimilarities: elementwise product of base row and weights."""
    base = np.asarray(base_row, dtype=np.float64)
    w = np.asarray(omega, dtype=np.float64)
    if base.shape != w.shape:
        raise ParameterError(
            f"length mismatch: {base.shape[0]} scores vs {w.shape[0]} weights"
        )
    if base.size and base.min() < 0:
        raise ParameterError("baseline scores must be >= 0")
    if w.size and not (w.min() > 0 and w.max() <= 1.0):
        raise ParameterError("weights must lie in (0, 1]")
    return base * w


def _baseline_name(bank: FeatureBank, config: PipelineConfig) -> str:
    return config.baseline_feature or bank.baseline


def _gallery_candidates(
    query: str,
    probe: FlowSet,
    gallery: FlowSet,
    pairing: SubsetPairing | None,
) -> tuple[str, ...]:
    """Gallery ids eligible for the query's windows and key matches."""
    label = probe.subset_of(query)
    if label is None or pairing is None or gallery.subsets is None:
        return gallery.ids
    glabel = pairing.gallery_label_for(label)
    if glabel is None:
        return gallery.ids
    return gallery.subset(glabel).member_ids


def _rerank_one(
    query: str,
    probe: FlowSet,
    gallery: FlowSet,
    bank: FeatureBank,
    keys: KeySet,
    config: PipelineConfig,
    pairing: SubsetPairing | None,
    base_row: np.ndarray,
    memo: dict | None = None,
) -> np.ndarray:
    t_query = probe.entering_frame(query)
    near = nearest_key_persons(query, probe, keys, config.num_keys)
    candidates = _gallery_candidates(query, probe, gallery, pairing)
    windows = []
    for key in near:
        feature = keys.entry(key).feature
        cache_key = (key, feature, candidates)
        hit = memo.get(cache_key) if memo is not None else None
        if hit is None:
            anchor0 = match_key_person(
                key,
                feature,
                gallery,
                bank,
                probe_camera=probe.camera,
                candidate_ids=candidates,
            )
            hit = (anchor0.top_match_id, anchor0.top_match_time, anchor0.d_key)
            if memo is not None:
                memo[cache_key] = hit
        anchor = KeyAnchor(
            key_id=key,
            feature=feature,
            delta_t=t_query - probe.entering_frame(key),
            top_match_id=hit[0],
            top_match_time=hit[1],
            d_key=hit[2],
        )
        windows.append(
            candidate_window(anchor, gallery, config.tau, candidate_ids=candidates)
        )
    omega = compute_weights(windows, gallery.ids, config.weight_combine)
    return rerank_scores(base_row, omega)


def rerank_query(
    query: str,
    probe: FlowSet,
    gallery: FlowSet,
    bank: FeatureBank,
    keys: KeySet,
    config: PipelineConfig,
) -> list[tuple[str, float]]:
    """Re-rank the gallery for one query; returns (id, score) ascending.

    With no applicable key persons the result equals the baseline ranking.
    Ties in the final score break by ascending gallery id.
    """
    base_space = bank.space(_baseline_name(bank, config))
    base_row = base_space.distances(
        [query], probe.camera, gallery.ids, gallery.camera
    )[0]
    pairing = None
    if probe.subsets is not None and gallery.subsets is not None:
        pairing = correspond_subsets(probe, gallery, config.direction_map)
    d_star = _rerank_one(
        query, probe, gallery, bank, keys, config, pairing, base_row
    )
    order = sorted(range(len(gallery.ids)), key=lambda j: (d_star[j], gallery.ids[j]))
    return [(gallery.ids[j], float(d_star[j])) for j in order]


def rerank_all(
    probe: FlowSet,
    gallery: FlowSet,
    bank: FeatureBank,
    keys: KeySet,
    config: PipelineConfig,
    jobs: int = 1,
) -> ScoreMatrix:
    """Re-ranked score matrix for every probe member.

    Anchors of shared key persons are computed once and reused.  With
    jobs > 1 queries are processed in a thread pool; results are collected
    in probe order, so the output does not depend on scheduling.
    """
    base_space = bank.space(_baseline_name(bank, config))
    base = base_space.distances(
        probe.ids, probe.camera, gallery.ids, gallery.camera
    )
    pairing = None
    if probe.subsets is not None and gallery.subsets is not None:
        pairing = correspond_subsets(probe, gallery, config.direction_map)
    memo: dict = {}

    def one(i: int) -> np.ndarray:
        return _rerank_one(
            probe.ids[i], probe, gallery, bank, keys, config, pairing,
            base[i], memo,
        )

    n = len(probe.ids)
    if jobs > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, range(n)))
    else:
        rows = [one(i) for i in range(n)]
    values = np.vstack(rows) if rows else np.zeros((0, len(gallery.ids)))
    return ScoreMatrix(
        probe_ids=probe.ids, gallery_ids=gallery.ids, values=values
    )
