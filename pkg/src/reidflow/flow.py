"""Temporally ordered flows, velocity subsets, and cross-camera pairing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import InputError, NotFoundError
from .model import FlowSet, PedestrianRecord, VelocitySubset

STATIONARY_LABEL = "stationary"


def build_flow(records: Sequence[PedestrianRecord], camera: str) -> FlowSet:
    """Assemble a camera's records into a flow ordered by entering frame.

    The sort is stable: records entering at the same frame keep their input
    order.  Duplicate identities are rejected.
    """
    for rec in records:
        if rec.camera != camera:
            raise InputError(
                f"record {rec.id!r} belongs to camera {rec.camera!r}, "
                f"not {camera!r}"
            )
    ordered = tuple(sorted(records, key=lambda r: r.entering_frame))
    return FlowSet(camera=camera, members=ordered)


def temporal_distance(flow: FlowSet, a: str, b: str) -> int:
    """Signed frame gap T_a - T_b between two members of the same flow."""
    return flow.entering_frame(a) - flow.entering_frame(b)


def _angle_deg(u: tuple[float, float], v: tuple[float, float]) -> float:
    nu = math.hypot(*u)
    nv = math.hypot(*v)
    cos = (u[0] * v[0] + u[1] * v[1]) / (nu * nv)
    return math.degrees(math.acos(max(-1.0, min(1.0, cos))))


def split_by_velocity(flow: FlowSet, theta: float, epsilon: float) -> FlowSet:
    """Partition a flow into subsets of similar velocity.

    Clustering is greedy: the unassigned member with the highest speed seeds
    a subset and defines its main velocity; every unassigned member whose
    speed lies within epsilon of the seed's and whose direction deviates from
    the seed's by less than theta degrees joins it.  Zero-velocity members
    have no direction and are collected into a shared "stationary" subset.

    Subset labels are "v0", "v1", ... in creation order; member order inside
    each subset follows the parent flow.
    """
    if not theta > 0:
        raise InputError("theta must be > 0 degrees")
    if epsilon < 0:
        raise InputError("epsilon must be >= 0")

    moving = [rec for rec in flow.members if rec.speed > 0.0]
    still = tuple(rec.id for rec in flow.members if rec.speed == 0.0)

    unassigned = list(moving)
    subsets: list[VelocitySubset] = []
    while unassigned:
        seed = max(unassigned, key=lambda r: r.speed)
        v_main = seed.velocity
        speed_main = seed.speed
        taken = [
            rec
            for rec in unassigned
            if abs(rec.speed - speed_main) <= epsilon
            and _angle_deg(rec.velocity, v_main) < theta
        ]
        if seed not in taken:
            taken.append(seed)
        taken_ids = {rec.id for rec in taken}
        subsets.append(
            VelocitySubset(
                label=f"v{len(subsets)}",
                main_velocity=v_main,
                member_ids=tuple(
                    rec.id for rec in flow.members if rec.id in taken_ids
                ),
            )
        )
        unassigned = [rec for rec in unassigned if rec.id not in taken_ids]
    if still:
        subsets.append(
            VelocitySubset(
                label=STATIONARY_LABEL,
                main_velocity=(0.0, 0.0),
                member_ids=still,
            )
        )
    return FlowSet(camera=flow.camera, members=flow.members, subsets=tuple(subsets))


@dataclass(frozen=True)
class SubsetPairing:
    """Correspondence between probe and gallery velocity subsets.

    `pairs` maps a probe subset label to its gallery counterpart.  Probe
    subsets in `fallbacks` found no counterpart; their members are matched
    against the full gallery instead.
    """

    pairs: tuple[tuple[str, str], ...]
    fallbacks: tuple[str, ...]

    def gallery_label_for(self, probe_label: str) -> str | None:
        """Gallery subset label paired with `probe_label`, or None on fallback."""
        for p, g in self.pairs:
            if p == probe_label:
                return g
        if probe_label in self.fallbacks:
            return None
        raise NotFoundError(f"probe subset {probe_label!r} not in pairing")


def _pair_similarity(u: tuple[float, float], v: tuple[float, float]) -> float:
    nu = math.hypot(*u)
    nv = math.hypot(*v)
    if nu == 0.0 and nv == 0.0:
        return 1.0
    if nu == 0.0 or nv == 0.0:
        return -math.inf
    return (u[0] * v[0] + u[1] * v[1]) / (nu * nv)


def correspond_subsets(
    probe: FlowSet,
    gallery: FlowSet,
    direction_map: str | Mapping[str, str] = "identity",
) -> SubsetPairing:
    """Pair probe velocity subsets with gallery ones.

    With a mapping, pairs are taken verbatim (labels must exist).  With
    "identity" or "negate", subsets are paired greedily by cosine similarity
    of their main velocities, each gallery subset used at most once; "negate"
    flips gallery directions first, for camera pairs facing opposite ways.
    Probe subsets left without a counterpart become fallback entries.
    """
    if probe.subsets is None or gallery.subsets is None:
        raise InputError("both flows must be split before pairing subsets")

    probe_subs = probe.subsets
    gallery_subs = gallery.subsets

    if not isinstance(direction_map, str):
        gallery_labels = {s.label for s in gallery_subs}
        pairs: list[tuple[str, str]] = []
        fallbacks: list[str] = []
        for sub in probe_subs:
            target = direction_map.get(sub.label)
            if target is None:
                fallbacks.append(sub.label)
                continue
            if target not in gallery_labels:
                raise NotFoundError(
                    f"direction map sends {sub.label!r} to unknown gallery "
                    f"subset {target!r}"
                )
            pairs.append((sub.label, target))
        return SubsetPairing(tuple(pairs), tuple(fallbacks))

    if direction_map not in ("identity", "negate"):
        raise InputError(
            "direction_map must be 'identity', 'negate' or an explicit map"
        )
    flip = -1.0 if direction_map == "negate" else 1.0

    candidates = []
    for i, ps in enumerate(probe_subs):
        for j, gs in enumerate(gallery_subs):
            gv = (flip * gs.main_velocity[0], flip * gs.main_velocity[1])
            sim = _pair_similarity(ps.main_velocity, gv)
            if sim > -math.inf:
                candidates.append((-sim, i, j))
    candidates.sort()

    used_probe: set[int] = set()
    used_gallery: set[int] = set()
    chosen: dict[int, int] = {}
    for _, i, j in candidates:
        if i in used_probe or j in used_gallery:
            continue
        chosen[i] = j
        used_probe.add(i)
        used_gallery.add(j)

    pairs = [
        (probe_subs[i].label, gallery_subs[chosen[i]].label)
        for i in range(len(probe_subs))
        if i in chosen
    ]
    fallbacks = [
        probe_subs[i].label for i in range(len(probe_subs)) if i not in chosen
    ]
    return SubsetPairing(tuple(pairs), tuple(fallbacks))
