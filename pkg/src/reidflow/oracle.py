"""Unoptimized reference implementations used to cross-check the pipeline.

Everything here is written as plain loops over the domain types, sharing no
code with the production paths (`_kernels`, `saliency`, `rerank`, `flow`
clustering).  Tests compare the two against each other; these functions are
also handy when debugging a surprising ranking by hand.
"""

from __future__ import annotations

import math
import sys
from typing import Mapping, Sequence

from .errors import ParameterError, ValidationError
from .model import FeatureBank, FeatureSpace, FlowSet, KeySet, PipelineConfig

_EPS = sys.float_info.epsilon


def _vec(space: FeatureSpace, camera: str, pid: str) -> Sequence[float]:
    assert space.embeddings is not None
    try:
        return space.embeddings[camera][pid]
    except KeyError:
        raise ValidationError(
            f"feature {space.name!r}, camera {camera!r}: missing embedding "
            f"for id {pid!r}"
        ) from None


def _dist(
    space: FeatureSpace, camera_a: str, pid_a: str, camera_b: str, pid_b: str
) -> float:
    if space.metric == "precomputed":
        pre = space.precomputed
        assert pre is not None
        if camera_a == pre.row_camera and camera_b == pre.col_camera:
            return pre.matrix.lookup(pid_a, pid_b)
        if camera_a == pre.col_camera and camera_b == pre.row_camera:
            return pre.matrix.lookup(pid_b, pid_a)
        raise ValidationError(
            f"feature {space.name!r}: precomputed matrix does not cover "
            f"cameras ({camera_a!r}, {camera_b!r})"
        )
    a = _vec(space, camera_a, pid_a)
    b = _vec(space, camera_b, pid_b)
    if space.metric == "euclidean":
        s = 0.0
        for i in range(len(a)):
            diff = a[i] - b[i]
            s += diff * diff
        return math.sqrt(s)
    dot = 0.0
    na = 0.0
    nb = 0.0
    for i in range(len(a)):
        dot += a[i] * b[i]
        na += a[i] * a[i]
        nb += b[i] * b[i]
    if na == 0.0 and nb == 0.0:
        return 0.0
    if na == 0.0 or nb == 0.0:
        return 1.0
    return min(2.0, max(0.0, 1.0 - dot / math.sqrt(na) / math.sqrt(nb)))


def naive_knn_mean(
    space: FeatureSpace, flow: FlowSet, person: str, k: int
) -> float:
    """Full-sort mean distance to the k nearest other members."""
    ds = sorted(
        _dist(space, flow.camera, person, flow.camera, other.id)
        for other in flow.members
        if other.id != person
    )
    if not 1 <= k <= len(ds):
        raise ParameterError(f"k={k} out of range for a set of {len(flow)}")
    total = 0.0
    for d in ds[:k]:
        total += d
    return total / k


def naive_saliency_scores(
    space: FeatureSpace, flow: FlowSet, k: int
) -> dict[str, float]:
    """Min-max normalized naive k-NN means for every member."""
    raw = {rec.id: naive_knn_mean(space, flow, rec.id, k) for rec in flow.members}
    lo = min(raw.values())
    hi = max(raw.values())
    if hi == lo:
        return {pid: 0.0 for pid in raw}
    return {pid: (v - lo) / (hi - lo) for pid, v in raw.items()}


def _cos_sim(u: tuple[float, float], v: tuple[float, float]) -> float:
    nu = math.hypot(*u)
    nv = math.hypot(*v)
    if nu == 0.0 and nv == 0.0:
        return 1.0
    if nu == 0.0 or nv == 0.0:
        return -math.inf
    return (u[0] * v[0] + u[1] * v[1]) / (nu * nv)


def _pair_subsets(
    probe: FlowSet, gallery: FlowSet, direction_map
) -> dict[str, str | None]:
    """Probe subset label -> gallery subset label (None = full gallery)."""
    assert probe.subsets is not None and gallery.subsets is not None
    out: dict[str, str | None] = {}
    if not isinstance(direction_map, str):
        glabels = {s.label for s in gallery.subsets}
        for sub in probe.subsets:
            target = direction_map.get(sub.label)
            if target is not None and target not in glabels:
                raise ValidationError(
                    f"direction map sends {sub.label!r} to unknown gallery "
                    f"subset {target!r}"
                )
            out[sub.label] = target
        return out
    flip = -1.0 if direction_map == "negate" else 1.0
    scored = []
    for i, ps in enumerate(probe.subsets):
        for j, gs in enumerate(gallery.subsets):
            sim = _cos_sim(
                ps.main_velocity,
                (flip * gs.main_velocity[0], flip * gs.main_velocity[1]),
            )
            if sim > -math.inf:
                scored.append((-sim, i, j))
    scored.sort()
    used_p: set[int] = set()
    used_g: set[int] = set()
    for _, i, j in scored:
        if i in used_p or j in used_g:
            continue
        out[probe.subsets[i].label] = gallery.subsets[j].label
        used_p.add(i)
        used_g.add(j)
    for sub in probe.subsets:
        out.setdefault(sub.label, None)
    return out


def oracle_rerank(
    query: str,
    probe: FlowSet,
    gallery: FlowSet,
    bank: FeatureBank,
    keys: KeySet,
    config: PipelineConfig,
) -> list[tuple[str, float]]:
    """Literal four-step re-ranking of one query, written as plain loops."""
    t_query = probe.entering_frame(query)
    gallery_ids = list(gallery.ids)

    # candidate pool for key matching and windows
    if probe.subsets is not None and gallery.subsets is not None:
        pairing = _pair_subsets(probe, gallery, config.direction_map)
        qlabel = probe.subset_of(query)
        assert qlabel is not None
        glabel = pairing[qlabel]
        if glabel is None:
            candidates = gallery_ids
        else:
            candidates = list(gallery.subset(glabel).member_ids)
        key_pool = list(probe.subset(qlabel).member_ids)
    else:
        candidates = gallery_ids
        key_pool = list(probe.ids)

    # step 1: nearest key persons by |time gap|
    eligible = [pid for pid in key_pool if pid in keys]
    eligible.sort(
        key=lambda pid: (
            abs(t_query - probe.entering_frame(pid)),
            probe.entering_frame(pid),
            pid,
        )
    )
    near = eligible[: config.num_keys]

    # steps 2 and 3: match each key, project its window
    windows: list[tuple[float, set[str]]] = []
    for key in near:
        feature = keys.entry(key).feature
        space = bank.space(feature)
        if not candidates:
            raise ParameterError(
                "key matching needs at least one gallery candidate"
            )
        row = [
            _dist(space, probe.camera, key, gallery.camera, gid)
            for gid in candidates
        ]
        j = min(range(len(candidates)), key=lambda c: (row[c], candidates[c]))
        m = max(row)
        d_key = 1.0 if m == 0.0 else max(row[j] / m, _EPS)
        delta_t = t_query - probe.entering_frame(key)
        t_top = gallery.entering_frame(candidates[j])
        a = t_top + (1.0 - config.tau) * delta_t
        b = t_top + (1.0 + config.tau) * delta_t
        lo, hi = (a, b) if a <= b else (b, a)
        members = {
            gid for gid in candidates if lo <= gallery.entering_frame(gid) <= hi
        }
        windows.append((d_key, members))

    # step 4: weights, then weighted baseline scores
    base_space = bank.space(config.baseline_feature or bank.baseline)
    scored = []
    for gid in gallery_ids:
        ds = [d_key for d_key, members in windows if gid in members]
        if not ds:
            omega = 1.0
        elif config.weight_combine == "min":
            omega = min(ds)
        elif config.weight_combine == "max":
            omega = max(ds)
        elif config.weight_combine == "mean":
            omega = sum(ds) / len(ds)
        else:
            omega = 1.0
            for d in ds:
                omega *= d
        base = _dist(base_space, probe.camera, query, gallery.camera, gid)
        scored.append((gid, omega * base))
    scored.sort(key=lambda item: (item[1], item[0]))
    return scored
