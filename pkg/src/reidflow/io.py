"""File formats: metadata, embeddings, distance matrices, config, results.

Everything is comma-delimited UTF-8 text with a mandatory header line, so
fixtures stay diffable and usable from other languages.  Dataset dumps use
shortest round-trip float formatting; result files use fixed 6-decimal
formatting so reruns diff cleanly.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, InputError, NotFoundError, ParameterError
from .evaluation import CMCCurve
from .flow import build_flow
from .model import (
    FeatureBank,
    FeatureSpace,
    FlowSet,
    PedestrianRecord,
    PipelineConfig,
    PrecomputedMetric,
    ReidDataset,
    ScoreMatrix,
)

_META_COLUMNS = ("id", "camera", "t", "vx", "vy")

CONFIG_KEYS = (
    "k_nn",
    "tau",
    "num_keys",
    "angle_threshold",
    "speed_tolerance",
    "weight_combine",
    "baseline_feature",
    "direction_map",
    "seed",
)


def _read_rows(path: Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    try:
        fh = path.open(newline="", encoding="utf-8")
    except FileNotFoundError:
        raise NotFoundError(f"no such file: {path}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file, expected a header line")
        rows = [
            (lineno, row)
            for lineno, row in enumerate(reader, start=2)
            if row and any(cell.strip() for cell in row)
        ]
    return [h.strip() for h in header], rows


def parse_metadata(path: str | Path) -> list[PedestrianRecord]:
    """Read one camera's pedestrian records.

    Format: header `id,camera,t,vx,vy[,true_match]`; a blank true_match cell
    means unknown.  All rows must name the same camera.
    """
    path = Path(path)
    header, rows = _read_rows(path)
    has_tm = len(header) == 6 and header[5] == "true_match"
    if tuple(header[:5]) != _META_COLUMNS or (len(header) == 6 and not has_tm) or len(header) > 6:
        raise InputError(
            f"{path}: header must be id,camera,t,vx,vy[,true_match], "
            f"got {','.join(header)}"
        )
    records = []
    seen: set[str] = set()
    camera = None
    for lineno, row in rows:
        if len(row) != len(header):
            raise InputError(
                f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}"
            )
        pid = row[0].strip()
        cam = row[1].strip()
        if not pid:
            raise InputError(f"{path}:{lineno}: empty id")
        if pid in seen:
            raise InputError(f"{path}:{lineno}: duplicate id {pid!r}")
        seen.add(pid)
        if camera is None:
            camera = cam
        elif cam != camera:
            raise InputError(
                f"{path}:{lineno}: camera {cam!r} differs from {camera!r}; "
                f"one metadata file covers one camera"
            )
        try:
            t = int(row[2])
            vx = float(row[3])
            vy = float(row[4])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
        tm = row[5].strip() if has_tm else ""
        try:
            records.append(
                PedestrianRecord(
                    id=pid,
                    camera=cam,
                    entering_frame=t,
                    velocity=(vx, vy),
                    true_match=tm or None,
                )
            )
        except InputError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
    return records


def parse_embeddings(
    path: str | Path, expected_dim: int | None = None
) -> dict[str, np.ndarray]:
    """Read an id -> vector table; header is `id` plus one label per column."""
    path = Path(path)
    header, rows = _read_rows(path)
    if not header or header[0] != "id" or len(header) < 2:
        raise InputError(f"{path}: header must start with 'id' plus value columns")
    dim = len(header) - 1
    if expected_dim is not None and dim != expected_dim:
        raise InputError(
            f"{path}: {dim} value columns, expected {expected_dim}"
        )
    table: dict[str, np.ndarray] = {}
    for lineno, row in rows:
        if len(row) != dim + 1:
            raise InputError(
                f"{path}:{lineno}: expected {dim + 1} columns, got {len(row)}"
            )
        pid = row[0].strip()
        if not pid:
            raise InputError(f"{path}:{lineno}: empty id")
        if pid in table:
            raise InputError(f"{path}:{lineno}: duplicate id {pid!r}")
        vec = np.empty(dim)
        for c, tok in enumerate(row[1:], start=2):
            try:
                v = float(tok)
            except ValueError:
                raise InputError(
                    f"{path}:{lineno}: column {c}: not a number: {tok!r}"
                ) from None
            if not math.isfinite(v):
                raise InputError(
                    f"{path}:{lineno}: column {c}: non-finite value {tok!r}"
                )
            vec[c - 2] = v
        table[pid] = vec
    return table


def parse_distance_matrix(path: str | Path) -> ScoreMatrix:
    """Read a probe x gallery distance table.

    The header lists gallery ids after a leading `id` cell; each row starts
    with a probe id.
    """
    path = Path(path)
    header, rows = _read_rows(path)
    if not header or header[0] != "id" or len(header) < 2:
        raise InputError(f"{path}: header must be 'id' plus gallery ids")
    gallery_ids = tuple(header[1:])
    probe_ids = []
    values = []
    for lineno, row in rows:
        if len(row) != len(gallery_ids) + 1:
            raise InputError(
                f"{path}:{lineno}: expected {len(gallery_ids) + 1} columns, "
                f"got {len(row)}"
            )
        probe_ids.append(row[0].strip())
        try:
            values.append([float(tok) for tok in row[1:]])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
    try:
        return ScoreMatrix(
            probe_ids=tuple(probe_ids),
            gallery_ids=gallery_ids,
            values=np.array(values) if values else np.zeros((0, len(gallery_ids))),
        )
    except Exception as exc:
        raise InputError(f"{path}: {exc}") from None


def _parse_direction_map(tok: str) -> str | dict[str, str]:
    if tok in ("identity", "negate"):
        return tok
    mapping: dict[str, str] = {}
    for part in tok.split(","):
        if ":" not in part:
            raise ConfigError(
                f"direction_map entries must look like probe:gallery, got {part!r}"
            )
        a, b = part.split(":", 1)
        mapping[a.strip()] = b.strip()
    return mapping


def load_config(path: str | Path) -> PipelineConfig:
    """Read a `key = value` config file into a PipelineConfig.

    Recognized keys: k_nn, tau, num_keys, angle_threshold, speed_tolerance,
    weight_combine, baseline_feature, direction_map, seed, and per-feature
    rho.<feature>.  Lines starting with `#` are comments.  Unknown keys are
    rejected rather than ignored, to catch typos.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise NotFoundError(f"no such file: {path}") from None
    kwargs: dict = {}
    rho: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, tok = line.partition("=")
        key = key.strip()
        tok = tok.strip()
        try:
            if key in ("k_nn", "num_keys", "seed"):
                kwargs[key] = int(tok)
            elif key in ("tau", "angle_threshold", "speed_tolerance"):
                kwargs[key] = float(tok)
            elif key == "weight_combine":
                kwargs[key] = tok
            elif key == "baseline_feature":
                kwargs[key] = tok
            elif key == "direction_map":
                kwargs[key] = _parse_direction_map(tok)
            elif key.startswith("rho."):
                rho[key[4:]] = float(tok)
            else:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        except ValueError:
            raise ConfigError(
                f"{path}:{lineno}: invalid value for {key}: {tok!r}"
            ) from None
    if rho:
        kwargs["rho_per_feature"] = rho
    try:
        return PipelineConfig(**kwargs)
    except ParameterError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _no_underscore(kind: str, label: str) -> None:
    if "_" in label or "/" in label or not label:
        raise InputError(
            f"{kind} label {label!r} cannot be used in bundle file names "
            f"(no underscores or slashes, non-empty)"
        )


def dump_dataset(
    probe: FlowSet,
    gallery: FlowSet,
    bank: FeatureBank,
    out_dir: str | Path,
) -> list[Path]:
    """Write a dataset bundle: per-camera metadata and per-feature tables.

    Files: `meta_<camera>.csv`, `emb_<camera>_<feature>.csv`, and
    `dist_<feature>.csv` for precomputed metrics.  Floats use shortest
    round-trip formatting, so reloading reproduces the exact values.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for flow in (probe, gallery):
        _no_underscore("camera", flow.camera)
        path = out / f"meta_{flow.camera}.csv"
        lines = ["id,camera,t,vx,vy,true_match"]
        for rec in flow.members:
            lines.append(
                f"{rec.id},{rec.camera},{rec.entering_frame},"
                f"{rec.velocity[0]!r},{rec.velocity[1]!r},{rec.true_match or ''}"
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
    for space in bank.spaces:
        _no_underscore("feature", space.name)
        if space.metric == "precomputed":
            pre = space.precomputed
            assert pre is not None
            path = out / f"dist_{space.name}.csv"
            lines = ["id," + ",".join(pre.matrix.gallery_ids)]
            for i, pid in enumerate(pre.matrix.probe_ids):
                vals = ",".join(repr(float(v)) for v in pre.matrix.values[i])
                lines.append(f"{pid},{vals}")
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(path)
            continue
        assert space.embeddings is not None
        for camera in sorted(space.embeddings):
            table = space.embeddings[camera]
            path = out / f"emb_{camera}_{space.name}.csv"
            lines = ["id," + ",".join(f"d{i}" for i in range(space.dim))]
            for pid, vec in table.items():
                lines.append(pid + "," + ",".join(repr(float(v)) for v in vec))
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(path)
    return written


def load_bundle(
    bundle_dir: str | Path, config: PipelineConfig | None = None
) -> ReidDataset:
    """Load a dataset bundle directory into memory.

    Expects exactly two `meta_<camera>.csv` files; the lexicographically
    first camera is the probe side.  Feature spaces come from
    `emb_<camera>_<feature>.csv` pairs and `dist_<feature>.csv` matrices,
    in sorted feature-name order; the baseline is the config's
    baseline_feature, else the first feature.
    """
    root = Path(bundle_dir)
    if not root.is_dir():
        raise NotFoundError(f"no such bundle directory: {root}")
    metas = sorted(root.glob("meta_*.csv"))
    if len(metas) != 2:
        raise InputError(
            f"{root}: expected exactly 2 meta_<camera>.csv files, "
            f"found {len(metas)}"
        )
    cameras = [p.stem[len("meta_"):] for p in metas]
    flows = {}
    for cam, path in zip(cameras, metas):
        records = parse_metadata(path)
        if records and records[0].camera != cam:
            raise InputError(
                f"{path}: camera column says {records[0].camera!r}, "
                f"file name says {cam!r}"
            )
        flows[cam] = build_flow(records, cam)
    probe_cam, gallery_cam = cameras

    tables: dict[str, dict[str, dict[str, np.ndarray]]] = {}
    for path in sorted(root.glob("emb_*.csv")):
        rest = path.stem[len("emb_"):]
        for cam in cameras:
            if rest.startswith(cam + "_"):
                feat = rest[len(cam) + 1:]
                tables.setdefault(feat, {})[cam] = parse_embeddings(path)
                break
        else:
            raise InputError(
                f"{path}: file name matches no camera in {cameras}"
            )
    pres: dict[str, ScoreMatrix] = {}
    for path in sorted(root.glob("dist_*.csv")):
        feat = path.stem[len("dist_"):]
        if feat in tables:
            raise InputError(
                f"feature {feat!r} has both embeddings and a distance matrix"
            )
        pres[feat] = parse_distance_matrix(path)

    names = sorted(set(tables) | set(pres))
    if not names:
        raise InputError(f"{root}: no embedding or distance files found")
    spaces = []
    for feat in names:
        if feat in pres:
            spaces.append(
                FeatureSpace(
                    name=feat,
                    dim=0,
                    metric="precomputed",
                    precomputed=PrecomputedMetric(
                        matrix=pres[feat],
                        row_camera=probe_cam,
                        col_camera=gallery_cam,
                    ),
                )
            )
            continue
        cams = tables[feat]
        first = next(iter(sorted(cams)))
        some_vec = next(iter(cams[first].values()), None)
        if some_vec is None:
            raise InputError(f"feature {feat!r}: empty embedding table")
        spaces.append(
            FeatureSpace(name=feat, dim=some_vec.shape[0], embeddings=cams)
        )

    baseline = config.baseline_feature if config else None
    if baseline is not None and baseline not in names:
        raise NotFoundError(
            f"baseline feature {baseline!r} not in bundle (have {names})"
        )
    bank = FeatureBank(spaces=tuple(spaces), baseline=baseline or names[0])
    return ReidDataset(probe=flows[probe_cam], gallery=flows[gallery_cam], bank=bank)


def write_cmc_csv(path: str | Path, curve: CMCCurve) -> Path:
    """`rank,accuracy` rows, accuracy with 6 decimals."""
    path = Path(path)
    lines = ["rank,accuracy"]
    for r in range(1, curve.accuracy.size + 1):
        lines.append(f"{r},{curve.at(r):.6f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_summary_csv(
    path: str | Path,
    named_curves: Sequence[tuple[str, CMCCurve]],
    ranks: Sequence[int] = (1, 5, 10, 20),
) -> Path:
    """One row per method with accuracies (fractions) at the given ranks."""
    path = Path(path)
    lines = ["method," + ",".join(f"r{r}" for r in ranks)]
    for name, curve in named_curves:
        cells = ",".join(f"{curve.at(r):.6f}" for r in ranks)
        lines.append(f"{name},{cells}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_rho_sweep_csv(
    path: str | Path, rows: Sequence[tuple[float, float, int]]
) -> Path:
    """`rho,sigma,n_keys` rows from a threshold sweep."""
    path = Path(path)
    lines = ["rho,sigma,n_keys"]
    for rho, sigma, n_keys in rows:
        lines.append(f"{rho:.6f},{sigma:.6f},{n_keys}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def write_cmc_svg(
    path: str | Path, named_curves: Sequence[tuple[str, CMCCurve]]
) -> Path:
    """Static line chart of CMC curves; plain hand-built SVG, byte-stable."""
    path = Path(path)
    W, H = 640.0, 480.0
    ml, mr, mt, mb = 62.0, 18.0, 18.0, 46.0
    pw, ph = W - ml - mr, H - mt - mb
    size = max(c.accuracy.size for _, c in named_curves) if named_curves else 1

    def x(r: int) -> float:
        if size == 1:
            return ml + pw / 2
        return ml + (r - 1) * pw / (size - 1)

    def y(a: float) -> float:
        return mt + (1.0 - a) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" '
        f'height="{H:.0f}" viewBox="0 0 {W:.0f} {H:.0f}">',
        f'<rect width="{W:.0f}" height="{H:.0f}" fill="white"/>',
        f'<line x1="{ml:.1f}" y1="{mt + ph:.1f}" x2="{ml + pw:.1f}" '
        f'y2="{mt + ph:.1f}" stroke="black" stroke-width="1"/>',
        f'<line x1="{ml:.1f}" y1="{mt:.1f}" x2="{ml:.1f}" '
        f'y2="{mt + ph:.1f}" stroke="black" stroke-width="1"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        yy = y(frac)
        parts.append(
            f'<line x1="{ml - 4:.1f}" y1="{yy:.2f}" x2="{ml:.1f}" '
            f'y2="{yy:.2f}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{ml - 8:.1f}" y="{yy + 4:.2f}" font-family="sans-serif" '
            f'font-size="12" text-anchor="end">{frac:.2f}</text>'
        )
    ticks = sorted({1 + round(i * (size - 1) / 4) for i in range(5)})
    for r in ticks:
        xx = x(r)
        parts.append(
            f'<line x1="{xx:.2f}" y1="{mt + ph:.1f}" x2="{xx:.2f}" '
            f'y2="{mt + ph + 4:.1f}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{xx:.2f}" y="{mt + ph + 18:.1f}" '
            f'font-family="sans-serif" font-size="12" '
            f'text-anchor="middle">{r}</text>'
        )
    parts.append(
        f'<text x="{ml + pw / 2:.1f}" y="{H - 10:.1f}" '
        f'font-family="sans-serif" font-size="13" text-anchor="middle">'
        f"rank</text>"
    )
    parts.append(
        f'<text x="16" y="{mt + ph / 2:.1f}" font-family="sans-serif" '
        f'font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 16 {mt + ph / 2:.1f})">accuracy</text>'
    )
    for c_idx, (name, curve) in enumerate(named_curves):
        color = _PALETTE[c_idx % len(_PALETTE)]
        pts = " ".join(
            f"{x(r):.2f},{y(curve.at(r)):.2f}"
            for r in range(1, curve.accuracy.size + 1)
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="2" '
            f'points="{pts}"/>'
        )
        ly = mt + ph - 14.0 - 18.0 * (len(named_curves) - 1 - c_idx)
        lx = ml + pw - 150.0
        parts.append(
            f'<line x1="{lx:.1f}" y1="{ly:.1f}" x2="{lx + 24:.1f}" '
            f'y2="{ly:.1f}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{lx + 30:.1f}" y="{ly + 4:.1f}" '
            f'font-family="sans-serif" font-size="12">{name}</text>'
        )
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path


def emit_results(
    out_dir: str | Path,
    named_curves: Sequence[tuple[str, CMCCurve]] = (),
    sweep: Sequence[tuple[float, float, int]] | None = None,
    ranks: Sequence[int] = (1, 5, 10, 20),
) -> dict[str, Path]:
    """Write the standard result files into `out_dir`.

    With curves: `cmc.csv` (the "key-aided" curve if present, else the
    first), `summary.csv` at the requested ranks (clipped to the gallery
    size), and `cmc.svg` with every curve.  With sweep rows:
    `rho_sweep.csv`.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    if named_curves:
        primary = dict(named_curves).get("key-aided", named_curves[0][1])
        written["cmc"] = write_cmc_csv(out / "cmc.csv", primary)
        min_size = min(c.accuracy.size for _, c in named_curves)
        usable = [r for r in ranks if r <= min_size]
        written["summary"] = write_summary_csv(
            out / "summary.csv", named_curves, usable
        )
        written["svg"] = write_cmc_svg(out / "cmc.svg", named_curves)
    if sweep is not None:
        written["sweep"] = write_rho_sweep_csv(out / "rho_sweep.csv", sweep)
    return written
