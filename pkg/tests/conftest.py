from __future__ import annotations

import numpy as np
import pytest

from reidflow.flow import build_flow
from reidflow.model import FeatureBank, FeatureSpace, FlowSet, PedestrianRecord


def records_1d(
    values: dict[str, float],
    camera: str = "A",
    times: dict[str, int] | None = None,
    velocities: dict[str, tuple[float, float]] | None = None,
    true_matches: dict[str, str] | None = None,
) -> list[PedestrianRecord]:
    """Records for the given ids; times default to insertion order."""
    out = []
    for i, pid in enumerate(values):
        out.append(
            PedestrianRecord(
                id=pid,
                camera=camera,
                entering_frame=(times or {}).get(pid, i),
                velocity=(velocities or {}).get(pid, (1.0, 0.0)),
                true_match=(true_matches or {}).get(pid),
            )
        )
    return out


def space_1d(
    values: dict[str, float], camera: str = "A", name: str = "f", **kw
) -> FeatureSpace:
    return FeatureSpace(
        name=name,
        dim=1,
        embeddings={camera: {pid: np.array([v]) for pid, v in values.items()}},
        **kw,
    )


@pytest.fixture
def line_flow() -> FlowSet:
    """Four members at 1-D positions 0, 1, 2, 10; the last one stands out."""
    values = {"a": 0.0, "b": 1.0, "c": 2.0, "d": 10.0}
    return build_flow(records_1d(values), "A")


@pytest.fixture
def line_space() -> FeatureSpace:
    return space_1d({"a": 0.0, "b": 1.0, "c": 2.0, "d": 10.0})


def two_view_space(
    probe_values: dict[str, float],
    gallery_values: dict[str, float],
    name: str = "f",
    probe_camera: str = "A",
    gallery_camera: str = "B",
    **kw,
) -> FeatureSpace:
    return FeatureSpace(
        name=name,
        dim=1,
        embeddings={
            probe_camera: {p: np.array([v]) for p, v in probe_values.items()},
            gallery_camera: {p: np.array([v]) for p, v in gallery_values.items()},
        },
        **kw,
    )


def bank_of(*spaces: FeatureSpace, baseline: str | None = None) -> FeatureBank:
    return FeatureBank(spaces=tuple(spaces), baseline=baseline or spaces[0].name)
