"""Domain types shared by every pipeline stage.

All types are immutable after construction and safe to share across worker
threads.  Scores follow a single convention throughout the package: values
are dissimilarities, lower means more similar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import InputError, NotFoundError, ParameterError, ValidationError

WEIGHT_COMBINE_RULES = ("min", "max", "mean", "product")
EMBEDDING_METRICS = ("euclidean", "cosine")
METRICS = EMBEDDING_METRICS + ("precomputed",)


def _frozen_array(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PedestrianRecord:
    """One pedestrian observed by one camera.

    `entering_frame` is the frame index at which the person enters the view;
    `velocity` is a single representative 2-vector in units per frame.
    `true_match` names the same person's identity in the opposite camera and
    is used only for evaluation.
    """

    id: str
    camera: str
    entering_frame: int
    velocity: tuple[float, float] = (0.0, 0.0)
    true_match: str | None = None

    def __post_init__(self) -> None:
        if self.entering_frame < 0:
            raise InputError(f"record {self.id!r}: entering_frame must be >= 0")
        vx, vy = self.velocity
        if not (math.isfinite(vx) and math.isfinite(vy)):
            raise InputError(f"record {self.id!r}: velocity must be finite")

    @property
    def speed(self) -> float:
        vx, vy = self.velocity
        return math.hypot(vx, vy)


@dataclass(frozen=True)
class VelocitySubset:
    """Members of a flow sharing a main velocity (speed and direction)."""

    label: str
    main_velocity: tuple[float, float]
    member_ids: tuple[str, ...]


@dataclass(frozen=True)
class FlowSet:
    """A camera's pedestrians as a temporally ordered flow.

    Members are sorted ascending by entering frame; ties keep their input
    order (the order is a total preorder).  An optional velocity partition
    restricts cross-camera association to corresponding subsets.
    """

    camera: str
    members: tuple[PedestrianRecord, ...]
    subsets: tuple[VelocitySubset, ...] | None = None

    def __post_init__(self) -> None:
        by_id: dict[str, int] = {}
        prev = -1
        for i, rec in enumerate(self.members):
            if rec.camera != self.camera:
                raise InputError(
                    f"record {rec.id!r} belongs to camera {rec.camera!r}, "
                    f"not {self.camera!r}"
                )
            if rec.id in by_id:
                raise InputError(f"duplicate id {rec.id!r} in camera {self.camera!r}")
            if rec.entering_frame < prev:
                raise InputError("flow members must be sorted by entering frame")
            prev = rec.entering_frame
            by_id[rec.id] = i
        object.__setattr__(self, "_index", by_id)
        if self.subsets is not None:
            seen: set[str] = set()
            for sub in self.subsets:
                for mid in sub.member_ids:
                    if mid not in by_id:
                        raise InputError(
                            f"subset {sub.label!r} references unknown id {mid!r}"
                        )
                    if mid in seen:
                        raise InputError(f"id {mid!r} appears in two velocity subsets")
                    seen.add(mid)
            if len(seen) != len(self.members):
                raise InputError("velocity subsets must cover the whole flow")
            by_subset = {
                mid: sub.label for sub in self.subsets for mid in sub.member_ids
            }
            object.__setattr__(self, "_subset_of", by_subset)
        else:
            object.__setattr__(self, "_subset_of", None)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[PedestrianRecord]:
        return iter(self.members)

    def __contains__(self, pid: str) -> bool:
        return pid in self._index  # type: ignore[attr-defined]

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(rec.id for rec in self.members)

    def record(self, pid: str) -> PedestrianRecord:
        try:
            return self.members[self._index[pid]]  # type: ignore[attr-defined]
        except KeyError:
            raise NotFoundError(
                f"id {pid!r} not found in camera {self.camera!r}"
            ) from None

    def entering_frame(self, pid: str) -> int:
        return self.record(pid).entering_frame

    def subset_of(self, pid: str) -> str | None:
        """Label of the velocity subset containing `pid`, or None if unsplit."""
        self.record(pid)
        if self._subset_of is None:  # type: ignore[attr-defined]
            return None
        return self._subset_of[pid]  # type: ignore[attr-defined]

    def subset(self, label: str) -> VelocitySubset:
        for sub in self.subsets or ():
            if sub.label == label:
                return sub
        raise NotFoundError(
            f"no velocity subset {label!r} in camera {self.camera!r}"
        )


@dataclass(frozen=True)
class ScoreMatrix:
    """Probe x gallery dissimilarity matrix; lower means more similar."""

    probe_ids: tuple[str, ...]
    gallery_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = _frozen_array(self.values)
        if vals.shape != (len(self.probe_ids), len(self.gallery_ids)):
            raise ValidationError(
                f"matrix shape {vals.shape} does not match "
                f"{len(self.probe_ids)}x{len(self.gallery_ids)} ids"
            )
        if not np.all(np.isfinite(vals)):
            raise ValidationError("distance matrix contains non-finite entries")
        if vals.size and vals.min() < 0:
            raise ValidationError("distance matrix contains negative entries")
        object.__setattr__(self, "values", vals)
        object.__setattr__(
            self, "_prow", {pid: i for i, pid in enumerate(self.probe_ids)}
        )
        object.__setattr__(
            self, "_gcol", {gid: j for j, gid in enumerate(self.gallery_ids)}
        )

    def lookup(self, probe_id: str, gallery_id: str) -> float:
        prow = self._prow  # type: ignore[attr-defined]
        gcol = self._gcol  # type: ignore[attr-defined]
        if probe_id not in prow:
            raise NotFoundError(f"probe id {probe_id!r} not in score matrix")
        if gallery_id not in gcol:
            raise NotFoundError(f"gallery id {gallery_id!r} not in score matrix")
        return float(self.values[prow[probe_id], gcol[gallery_id]])

    def row(self, probe_id: str) -> np.ndarray:
        try:
            return self.values[self._prow[probe_id]]  # type: ignore[attr-defined]
        except KeyError:
            raise NotFoundError(f"probe id {probe_id!r} not in score matrix") from None

    def submatrix(
        self, probe_ids: Sequence[str], gallery_ids: Sequence[str]
    ) -> np.ndarray:
        prow = self._prow  # type: ignore[attr-defined]
        gcol = self._gcol  # type: ignore[attr-defined]
        try:
            ri = [prow[p] for p in probe_ids]
            ci = [gcol[g] for g in gallery_ids]
        except KeyError as exc:
            raise NotFoundError(
                f"id {exc.args[0]!r} not in score matrix"
            ) from None
        return self.values[np.ix_(ri, ci)]


@dataclass(frozen=True)
class PrecomputedMetric:
    """A stored cross-view distance matrix standing in for a learned metric."""

    matrix: ScoreMatrix
    row_camera: str
    col_camera: str


@dataclass(frozen=True)
class FeatureSpace:
    """A named embedding table per camera with a metric and saliency threshold.

    `embeddings` maps camera -> identity -> vector of length `dim`.  With
    metric "precomputed" no embeddings are needed; the space then carries a
    cross-view `PrecomputedMetric` and can serve as the baseline metric (and
    for key matching) but cannot define saliency.

    Construction checks structure only; data-level defects (missing ids,
    wrong dimensions, non-finite entries) are surfaced by `validate_inputs`
    as a report, or at use time by `vectors`.
    """

    name: str
    dim: int
    embeddings: Mapping[str, Mapping[str, np.ndarray]] | None = None
    metric: str = "euclidean"
    rho: float = 0.9
    precomputed: PrecomputedMetric | None = None

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise ValidationError(
                f"feature {self.name!r}: unknown metric {self.metric!r}"
            )
        if not 0.0 <= self.rho <= 1.0:
            raise ValidationError(f"feature {self.name!r}: rho must be in [0, 1]")
        if self.metric == "precomputed":
            if self.precomputed is None:
                raise ValidationError(
                    f"feature {self.name!r}: precomputed metric requires a matrix"
                )
        elif self.embeddings is None:
            raise ValidationError(f"feature {self.name!r}: embeddings required")
        if self.embeddings is not None:
            if self.dim < 1:
                raise ValidationError(f"feature {self.name!r}: dim must be >= 1")
            frozen = {
                camera: {
                    pid: _frozen_array(np.asarray(vec).reshape(-1))
                    for pid, vec in table.items()
                }
                for camera, table in self.embeddings.items()
            }
            object.__setattr__(self, "embeddings", frozen)

    @property
    def has_embeddings(self) -> bool:
        return self.embeddings is not None

    def vectors(self, camera: str, ids: Sequence[str]) -> np.ndarray:
        """Stack the embeddings of `ids` in the given camera into a matrix."""
        if self.embeddings is None:
            raise ValidationError(
                f"feature {self.name!r} has no embeddings (precomputed metric)"
            )
        table = self.embeddings.get(camera)
        if table is None:
            raise ValidationError(
                f"feature {self.name!r} has no table for camera {camera!r}"
            )
        if not ids:
            return np.empty((0, self.dim))
        vecs = []
        for pid in ids:
            v = table.get(pid)
            if v is None:
                raise ValidationError(
                    f"feature {self.name!r}, camera {camera!r}: missing embedding "
                    f"for id {pid!r}"
                )
            if v.shape[0] != self.dim:
                raise ValidationError(
                    f"feature {self.name!r}, camera {camera!r}: embedding for "
                    f"{pid!r} has length {v.shape[0]}, expected {self.dim}"
                )
            vecs.append(v)
        out = np.stack(vecs)
        if not np.all(np.isfinite(out)):
            raise ValidationError(
                f"feature {self.name!r}, camera {camera!r}: non-finite embedding"
            )
        return out

    def distances(
        self,
        ids_a: Sequence[str],
        camera_a: str,
        ids_b: Sequence[str],
        camera_b: str,
    ) -> np.ndarray:
        """Distance matrix between identities of two (possibly equal) cameras."""
        if self.metric == "precomputed":
            pre = self.precomputed
            assert pre is not None
            if camera_a == pre.row_camera and camera_b == pre.col_camera:
                return pre.matrix.submatrix(ids_a, ids_b)
            if camera_a == pre.col_camera and camera_b == pre.row_camera:
                return pre.matrix.submatrix(ids_b, ids_a).T
            raise ValidationError(
                f"feature {self.name!r}: precomputed matrix covers cameras "
                f"({pre.row_camera!r}, {pre.col_camera!r}), not "
                f"({camera_a!r}, {camera_b!r})"
            )
        a = self.vectors(camera_a, ids_a)
        b = self.vectors(camera_b, ids_b)
        return _kernels.pairwise_distances(a, b, self.metric)


@dataclass(frozen=True)
class FeatureBank:
    """An ordered collection of feature spaces plus the baseline designation."""

    spaces: tuple[FeatureSpace, ...]
    baseline: str

    def __post_init__(self) -> None:
        if not self.spaces:
            raise ValidationError("feature bank must contain at least one space")
        names = [s.name for s in self.spaces]
        if len(set(names)) != len(names):
            raise ValidationError("feature space names must be unique")
        if self.baseline not in names:
            raise ValidationError(
                f"baseline {self.baseline!r} does not name a bank member"
            )
        object.__setattr__(self, "_by_name", {s.name: s for s in self.spaces})

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.spaces)

    def space(self, name: str) -> FeatureSpace:
        try:
            return self._by_name[name]  # type: ignore[attr-defined]
        except KeyError:
            raise NotFoundError(f"no feature space {name!r} in bank") from None

    @property
    def baseline_space(self) -> FeatureSpace:
        return self.space(self.baseline)


@dataclass(frozen=True)
class KeyEntry:
    """A key person in the union set: identity, best feature, best score."""

    id: str
    feature: str
    score: float


@dataclass(frozen=True)
class KeySet:
    """Per-feature key persons plus their deduplicated union.

    The union assigns each key person the feature in which its saliency score
    is maximal (ties resolved by feature-bank order).
    """

    per_feature: Mapping[str, tuple[tuple[str, float], ...]]
    union: tuple[KeyEntry, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_feature", dict(self.per_feature))
        expected = {pid for entries in self.per_feature.values() for pid, _ in entries}
        got = {e.id for e in self.union}
        if expected != got:
            raise ValidationError("key-set union must equal the union of features")
        object.__setattr__(self, "_by_id", {e.id: e for e in self.union})

    def __len__(self) -> int:
        return len(self.union)

    def __contains__(self, pid: str) -> bool:
        return pid in self._by_id  # type: ignore[attr-defined]

    @property
    def ids(self) -> frozenset[str]:
        return frozenset(e.id for e in self.union)

    def entry(self, pid: str) -> KeyEntry:
        try:
            return self._by_id[pid]  # type: ignore[attr-defined]
        except KeyError:
            raise NotFoundError(f"id {pid!r} is not a key person") from None


@dataclass(frozen=True)
class PipelineConfig:
    """Tunables for the whole pipeline.

    Defaults correspond to one published operating point (tau=0.3 with 4 key
    persons); the neighbour count for saliency is a tunable with default 5.
    """

    k_nn: int = 5
    rho_per_feature: Mapping[str, float] = field(default_factory=dict)
    tau: float = 0.3
    num_keys: int = 4
    angle_threshold: float = 90.0
    speed_tolerance: float = math.inf
    direction_map: str | Mapping[str, str] = "identity"
    weight_combine: str = "min"
    baseline_feature: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k_nn < 1:
            raise ParameterError("k_nn must be >= 1")
        if self.tau < 0:
            raise ParameterError("tau must be >= 0")
        if self.num_keys < 1:
            raise ParameterError("num_keys must be >= 1")
        if not self.angle_threshold > 0:
            raise ParameterError("angle_threshold must be > 0 degrees")
        if self.speed_tolerance < 0:
            raise ParameterError("speed_tolerance must be >= 0")
        if self.weight_combine not in WEIGHT_COMBINE_RULES:
            raise ParameterError(
                f"weight_combine must be one of {WEIGHT_COMBINE_RULES}"
            )
        for feat, rho in self.rho_per_feature.items():
            if rho < 0:
                # Overrides above 1 are allowed: they disable a feature's
                # key selection since scores never exceed 1.
                raise ParameterError(f"rho.{feat} must be >= 0")
        if isinstance(self.direction_map, str):
            if self.direction_map not in ("identity", "negate"):
                raise ParameterError(
                    "direction_map must be 'identity', 'negate' or an explicit map"
                )
        else:
            object.__setattr__(self, "direction_map", dict(self.direction_map))
        object.__setattr__(self, "rho_per_feature", dict(self.rho_per_feature))

    def rho_for(self, space: FeatureSpace) -> float:
        """Effective saliency threshold: config override, else the space's rho."""
        return float(self.rho_per_feature.get(space.name, space.rho))


@dataclass(frozen=True)
class ReidDataset:
    """A probe flow, a gallery flow and the feature bank covering both."""

    probe: FlowSet
    gallery: FlowSet
    bank: FeatureBank

    def ground_truth(self) -> dict[str, str]:
        """Probe id -> gallery id map from the records' true_match fields."""
        return {
            rec.id: rec.true_match
            for rec in self.probe.members
            if rec.true_match is not None
        }


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of input validation; passes iff no issues were found."""

    issues: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.issues

    def __str__(self) -> str:
        if self.ok:
            return "validation passed"
        return "\n".join(self.issues)


def validate_inputs(
    bank: FeatureBank, probe: FlowSet, gallery: FlowSet
) -> ValidationReport:
    """Check that every flow member is covered by every feature space.

    Reports missing embeddings, dimension mismatches and non-finite entries
    rather than raising; an empty report means the inputs are consistent.
    """
    issues: list[str] = []
    for flow in (probe, gallery):
        for space in bank.spaces:
            if space.metric == "precomputed":
                pre = space.precomputed
                assert pre is not None
                if flow.camera == pre.row_camera:
                    known = set(pre.matrix.probe_ids)
                elif flow.camera == pre.col_camera:
                    known = set(pre.matrix.gallery_ids)
                else:
                    issues.append(
                        f"feature {space.name!r}: precomputed matrix does not "
                        f"cover camera {flow.camera!r}"
                    )
                    continue
                for rec in flow.members:
                    if rec.id not in known:
                        issues.append(
                            f"feature {space.name!r}: id {rec.id!r} missing from "
                            f"precomputed matrix for camera {flow.camera!r}"
                        )
                continue
            assert space.embeddings is not None
            table = space.embeddings.get(flow.camera)
            if table is None:
                issues.append(
                    f"feature {space.name!r}: no embedding table for camera "
                    f"{flow.camera!r}"
                )
                continue
            for rec in flow.members:
                vec = table.get(rec.id)
                if vec is None:
                    issues.append(
                        f"feature {space.name!r}: id {rec.id!r} missing an "
                        f"embedding in camera {flow.camera!r}"
                    )
                elif vec.shape[0] != space.dim:
                    issues.append(
                        f"feature {space.name!r}: id {rec.id!r} has dimension "
                        f"{vec.shape[0]}, expected {space.dim}"
                    )
                elif not np.all(np.isfinite(vec)):
                    issues.append(
                        f"feature {space.name!r}: id {rec.id!r} has a non-finite "
                        f"embedding in camera {flow.camera!r}"
                    )
    return ValidationReport(tuple(issues))
