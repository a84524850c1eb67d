"""Acceptance checks for the whole package, one criterion per test.

Each test prints a single PASS/FAIL line (visible under `pytest -s`), so a
full run doubles as a checklist.  Tolerances are pinned in the assertions.
"""

from __future__ import annotations

import time
from contextlib import contextmanager

import numpy as np

from reidflow.cli import main as cli_main
from reidflow.evaluation import _ranks_from_matrix, cmc_curve, run_trials
from reidflow.flow import build_flow, split_by_velocity
from reidflow.io import load_config
from reidflow.model import (
    FeatureBank,
    FeatureSpace,
    KeyEntry,
    KeySet,
    PedestrianRecord,
    PipelineConfig,
    ReidDataset,
    ScoreMatrix,
)
from reidflow.oracle import naive_saliency_scores, oracle_rerank
from reidflow.rerank import (
    candidate_window,
    match_key_person,
    nearest_key_persons,
    rerank_query,
)
from reidflow.saliency import saliency_scores, select_key_persons, union_key_sets
from reidflow.synth import SynthParams, generate_flow


@contextmanager
def _verdict(num: int, name: str):
    try:
        yield
    except BaseException:
        print(f"FAIL  criterion {num:2d}: {name}")
        raise
    print(f"PASS  criterion {num:2d}: {name}")


def _line_flow(ids, times=None, velocities=None, camera="A"):
    return build_flow(
        [
            PedestrianRecord(
                id=pid,
                camera=camera,
                entering_frame=(times or {}).get(pid, i),
                velocity=(velocities or {}).get(pid, (1.0, 0.0)),
            )
            for i, pid in enumerate(ids)
        ],
        camera,
    )


# --- criterion 1 ------------------------------------------------------------

def test_criterion_01_saliency_matches_naive_oracle():
    with _verdict(1, "saliency oracle equivalence (50 sets, <10 s)"):
        t0 = time.perf_counter()
        worst = 0.0
        for i in range(50):
            rng = np.random.default_rng(i)
            if i < 3:
                n, d = 200, 64  # probe the upper size bound a few times
            else:
                n = int(rng.integers(20, 101))
                d = int(rng.integers(4, 65))
            metric = "euclidean" if i % 2 == 0 else "cosine"
            vecs = rng.normal(size=(n, d))
            if i % 5 == 0:
                vecs[rng.integers(0, n)] = 0.0
            ids = [f"p{j:03d}" for j in range(n)]
            space = FeatureSpace(
                name="f", dim=d, metric=metric,
                embeddings={"A": {pid: vecs[j] for j, pid in enumerate(ids)}},
            )
            flow = _line_flow(ids)
            k = int(rng.integers(1, min(11, n)))
            got = saliency_scores(space, flow, k).scores
            want = naive_saliency_scores(space, flow, k)
            for pid in ids:
                worst = max(worst, abs(got[pid] - want[pid]))
        elapsed = time.perf_counter() - t0
        assert worst <= 1e-9, f"worst per-member difference {worst:.3e}"
        assert elapsed < 10.0, f"took {elapsed:.1f}s"


# --- criterion 2 ------------------------------------------------------------

def test_criterion_02_threshold_monotonicity():
    with _verdict(2, "key sets shrink and nest as the threshold rises"):
        grid = np.linspace(0.0, 1.0, 21)
        for seed in range(10):
            probe, _, bank, _ = generate_flow(
                SynthParams(
                    num_identities=60, num_features=2, dims=16, seed=seed
                )
            )
            for space in bank.spaces:
                table = saliency_scores(space, probe, 5)
                prev = None
                for rho in grid:
                    cur = {p for p, _ in select_key_persons(table, float(rho))}
                    if prev is not None:
                        assert len(cur) <= len(prev)
                        assert cur <= prev
                    prev = cur


# --- criterion 3 ------------------------------------------------------------

_L_CHOICES = (1, 2, 4)
_TAU_CHOICES = (0.0, 0.1, 0.3)
_COMBINES = ("min", "max", "mean", "product")


def _random_rerank_instance(i: int):
    rng = np.random.default_rng(1000 + i)
    n = int(rng.integers(8, 51))
    n_feat = 2 if i % 3 == 0 else 1
    ids = [f"p{j:02d}" for j in range(n)]
    spaces = []
    for m in range(n_feat):
        d = int(rng.integers(2, 6))
        base = rng.normal(0.0, 1.0, (n, d))
        out_idx = rng.choice(n, size=max(1, n // 10), replace=False)
        base[out_idx] *= 8.0
        noisy = base + rng.normal(0.0, 0.8, (n, d))
        spaces.append(
            FeatureSpace(
                name=f"f{m}", dim=d,
                embeddings={
                    "A": {pid: base[j] for j, pid in enumerate(ids)},
                    "B": {pid: noisy[j] for j, pid in enumerate(ids)},
                },
            )
        )
    bank = FeatureBank(spaces=tuple(spaces), baseline="f0")
    t_a = rng.integers(0, 500, n)
    t_b = rng.integers(0, 500, n)
    split = i % 2 == 1
    vels = []
    for j in range(n):
        if split and rng.random() < 0.1:
            vels.append((0.0, 0.0))
        else:
            sign = 1.0 if rng.random() < 0.5 else -1.0
            speed = float(np.clip(rng.normal(1.0, 0.2), 0.1, None))
            vels.append((sign * speed, 0.0))
    probe = _line_flow(
        ids,
        times={pid: int(t_a[j]) for j, pid in enumerate(ids)},
        velocities={pid: vels[j] for j, pid in enumerate(ids)},
    )
    gallery = _line_flow(
        ids,
        times={pid: int(t_b[j]) for j, pid in enumerate(ids)},
        velocities={pid: vels[j] for j, pid in enumerate(ids)},
        camera="B",
    )
    cfg = PipelineConfig(
        k_nn=min(5, n - 1),
        num_keys=_L_CHOICES[i % 3],
        tau=_TAU_CHOICES[(i // 3) % 3],
        weight_combine=_COMBINES[i % 4],
        rho_per_feature=(
            {s.name: 1.01 for s in spaces}
            if i % 10 == 0
            else {s.name: float(rng.choice([0.5, 0.8])) for s in spaces}
        ),
    )
    if split:
        probe = split_by_velocity(probe, cfg.angle_threshold, cfg.speed_tolerance)
        gallery = split_by_velocity(
            gallery, cfg.angle_threshold, cfg.speed_tolerance
        )
    keys = union_key_sets(bank, probe, cfg)
    return probe, gallery, bank, keys, cfg, split


def test_criterion_03_rerank_matches_literal_oracle():
    with _verdict(3, "re-ranking equals the step-by-step oracle exactly"):
        neg_dt = 0
        overlap_queries = 0
        empty_instances = 0
        for i in range(108):
            probe, gallery, bank, keys, cfg, split = _random_rerank_instance(i)
            if len(keys) == 0:
                empty_instances += 1
            queries = list(probe.ids)
            if len(queries) > 15:
                pick = np.random.default_rng(7000 + i)
                queries = [
                    queries[j]
                    for j in sorted(
                        pick.choice(len(queries), size=15, replace=False)
                    )
                ]
            for q in queries:
                got = rerank_query(q, probe, gallery, bank, keys, cfg)
                want = oracle_rerank(q, probe, gallery, bank, keys, cfg)
                assert [g for g, _ in got] == [g for g, _ in want], (
                    f"instance {i}, query {q}: ranked ids diverge"
                )
                assert [s for _, s in got] == [s for _, s in want], (
                    f"instance {i}, query {q}: scores diverge"
                )
                if split:
                    continue
                # coverage bookkeeping on the unsplit instances
                tq = probe.entering_frame(q)
                covered: dict[str, int] = {}
                for key in nearest_key_persons(q, probe, keys, cfg.num_keys):
                    anchor = match_key_person(
                        key, keys.entry(key).feature, gallery, bank,
                        probe_camera="A",
                        delta_t=tq - probe.entering_frame(key),
                    )
                    if anchor.delta_t < 0:
                        neg_dt += 1
                    win = candidate_window(anchor, gallery, cfg.tau)
                    for gid in win.member_ids:
                        covered[gid] = covered.get(gid, 0) + 1
                if any(v >= 2 for v in covered.values()):
                    overlap_queries += 1
        assert neg_dt >= 10, "generator never produced backward time gaps"
        assert overlap_queries >= 5, "generator never produced overlapping windows"
        assert empty_instances >= 10, "generator never produced empty key sets"


# --- criterion 4 ------------------------------------------------------------

def test_criterion_04_never_worse_on_exact_transit():
    with _verdict(4, "with exact transit times no query ranks worse"):
        improved = 0
        for seed in range(20):
            params = SynthParams(
                num_identities=40, num_features=2, dims=16,
                cross_view_noise=0.8, transit_jitter=0.0, seed=seed,
            )
            probe, gallery, bank, truth = generate_flow(params)
            cfg = PipelineConfig(tau=0.3)
            p = split_by_velocity(probe, cfg.angle_threshold, cfg.speed_tolerance)
            g = split_by_velocity(
                gallery, cfg.angle_threshold, cfg.speed_tolerance
            )
            keys = union_key_sets(bank, p, cfg)
            assert len(keys) >= 1
            for entry in keys.union:
                anchor = match_key_person(
                    entry.id, entry.feature, g, bank, probe_camera="A"
                )
                assert anchor.top_match_id == truth[entry.id], (
                    f"seed {seed}: key {entry.id} mismatched; "
                    f"noise too large for this criterion's precondition"
                )
            from reidflow.rerank import rerank_all

            reranked = rerank_all(p, g, bank, keys, cfg)
            base_space = bank.space(bank.baseline)
            base = ScoreMatrix(
                p.ids, g.ids, base_space.distances(p.ids, "A", g.ids, "B")
            )
            ranks_new = _ranks_from_matrix(reranked, truth)
            ranks_old = _ranks_from_matrix(base, truth)
            for pid, rn, ro in zip(p.ids, ranks_new, ranks_old):
                assert rn <= ro, f"seed {seed}: query {pid} fell from {ro} to {rn}"
                if rn < ro:
                    improved += 1
        assert improved > 0, "property held but vacuously (baseline already perfect)"


# --- criterion 5 ------------------------------------------------------------

def _neutrality_instance(i: int):
    rng = np.random.default_rng(300 + i)
    n = int(rng.integers(8, 31))
    d = int(rng.integers(2, 6))
    ids = [f"p{j:02d}" for j in range(n)]
    base = rng.normal(0.0, 1.0, (n, d))
    noisy = base + rng.normal(0.0, 0.5, (n, d))
    space = FeatureSpace(
        name="f", dim=d,
        embeddings={
            "A": {pid: base[j] for j, pid in enumerate(ids)},
            "B": {pid: noisy[j] for j, pid in enumerate(ids)},
        },
    )
    times_a = rng.permutation(n * 7)[:n]
    times_b = rng.permutation(n * 7)[:n]
    probe = _line_flow(ids, times={pid: int(times_a[j]) for j, pid in enumerate(ids)})
    gallery = _line_flow(
        ids, times={pid: int(times_b[j]) for j, pid in enumerate(ids)}, camera="B"
    )
    return probe, gallery, space, ids


def test_criterion_05_neutral_cases_keep_the_baseline_order():
    with _verdict(5, "empty keys, whole-gallery windows, rescaled distances"):
        empty_keys = KeySet(per_feature={}, union=())
        for i in range(12):
            probe, gallery, space, ids = _neutrality_instance(i)
            bank = FeatureBank(spaces=(space,), baseline="f")
            cfg = PipelineConfig(k_nn=3, num_keys=2, tau=0.3)
            q = ids[i % len(ids)]
            base_row = space.distances([q], "A", gallery.ids, "B")[0]
            base_order = sorted(
                range(len(gallery.ids)),
                key=lambda j: (base_row[j], gallery.ids[j]),
            )
            base_ids = [gallery.ids[j] for j in base_order]

            # (a) no key persons: scores and order equal the baseline
            got = rerank_query(q, probe, gallery, bank, empty_keys, cfg)
            assert [g for g, _ in got] == base_ids
            assert [s for _, s in got] == [
                base_row[j] for j in base_order
            ]

            # (b) one key whose window spans every candidate: same order
            key = ids[(i + 3) % len(ids)]
            if key == q:
                key = ids[(i + 4) % len(ids)]
            one_key = KeySet(
                per_feature={"f": ((key, 1.0),)},
                union=(KeyEntry(key, "f", 1.0),),
            )
            wide = PipelineConfig(k_nn=3, num_keys=1, tau=1e9)
            if probe.entering_frame(q) != probe.entering_frame(key):
                got_b = rerank_query(q, probe, gallery, bank, one_key, wide)
                assert [g for g, _ in got_b] == base_ids

            # (c) uniformly rescaled distances: same order
            c = (1e-3, 7.3, 1000.0)[i % 3]
            scaled = FeatureSpace(
                name="f", dim=space.dim,
                embeddings={
                    cam: {pid: c * vec for pid, vec in table.items()}
                    for cam, table in space.embeddings.items()
                },
            )
            sbank = FeatureBank(spaces=(scaled,), baseline="f")
            keys = union_key_sets(bank, probe, cfg)
            skeys = union_key_sets(sbank, probe, cfg)
            assert keys.ids == skeys.ids
            got_ref = rerank_query(q, probe, gallery, bank, keys, cfg)
            got_scaled = rerank_query(q, probe, gallery, sbank, skeys, cfg)
            assert [g for g, _ in got_ref] == [g for g, _ in got_scaled]


# --- criterion 6 ------------------------------------------------------------

def test_criterion_06_end_to_end_rank1_gain_is_pinned():
    with _verdict(6, "generated-default rank-1 gain matches the reference run"):
        probe, gallery, bank, _ = generate_flow(SynthParams())
        ds = ReidDataset(probe=probe, gallery=gallery, bank=bank)
        res = run_trials(ds, PipelineConfig(), num_trials=10, split=0.5, seed=0)
        base_r1 = res.baseline_curve.at(1)
        key_r1 = res.curve.at(1)
        assert key_r1 > base_r1
        # reference run values, tolerance one percentage point
        assert abs(base_r1 - 0.647) <= 0.01, f"baseline r1 drifted: {base_r1:.4f}"
        assert abs(key_r1 - 0.922) <= 0.01, f"key-aided r1 drifted: {key_r1:.4f}"


# --- criterion 7 ------------------------------------------------------------

def test_criterion_07_cmc_hand_values():
    with _verdict(7, "cmc accuracies equal hand-computed fractions"):
        got = cmc_curve([1, 2, 4], 5).accuracy.tolist()
        assert got == [1 / 3, 2 / 3, 2 / 3, 1.0, 1.0]
        got = cmc_curve([1, 1, 3], 3).accuracy.tolist()
        assert got == [2 / 3, 2 / 3, 1.0]
        assert cmc_curve([2], 2).accuracy.tolist() == [0.0, 1.0]
        # monotone on a real run as well
        probe, gallery, bank, _ = generate_flow(
            SynthParams(num_identities=30, dims=8, seed=2)
        )
        ds = ReidDataset(probe=probe, gallery=gallery, bank=bank)
        res = run_trials(
            ds, PipelineConfig(k_nn=4), num_trials=3, split=0.5, seed=1
        )
        for curve in (res.curve, res.baseline_curve, *res.trials):
            assert np.all(np.diff(curve.accuracy) >= -1e-12)


# --- criterion 8 ------------------------------------------------------------

def test_criterion_08_reruns_and_jobs_are_byte_identical(tmp_path):
    with _verdict(8, "same seed twice and --jobs 1 vs 8 give identical bytes"):
        b1 = tmp_path / "bundle1"
        b2 = tmp_path / "bundle2"
        for out in (b1, b2):
            assert cli_main(
                ["synth", "--n", "40", "--dim", "8", "--seed", "5",
                 "--out", str(out)]
            ) == 0
        for name in sorted(p.name for p in b1.iterdir()):
            assert (b1 / name).read_bytes() == (b2 / name).read_bytes()

        cfg = tmp_path / "run.cfg"
        cfg.write_text("k_nn = 4\nnum_keys = 2\n")
        outs = []
        for jobs, name in (("1", "e1"), ("1", "e1b"), ("8", "e8")):
            out = tmp_path / name
            assert cli_main(
                ["eval", "--config", str(cfg), "--trials", "4",
                 "--jobs", jobs, "--out", str(out), str(b1)]
            ) == 0
            outs.append(out)
        for name in ("cmc.csv", "summary.csv", "cmc.svg"):
            ref = (outs[0] / name).read_bytes()
            assert (outs[1] / name).read_bytes() == ref  # rerun, same seed
            assert (outs[2] / name).read_bytes() == ref  # more workers

        r1 = tmp_path / "r1"
        r8 = tmp_path / "r8"
        for jobs, out in (("1", r1), ("8", r8)):
            assert cli_main(
                ["rerank", "--config", str(cfg), "--jobs", jobs,
                 "--out", str(out), str(b1)]
            ) == 0
        assert (r1 / "rankings.csv").read_bytes() == (r8 / "rankings.csv").read_bytes()


# --- criterion 9 ------------------------------------------------------------

def test_criterion_09_large_run_fits_the_time_budget():
    with _verdict(9, "1000 identities, 3 features, dim 128, 10 trials < 60 s"):
        t0 = time.perf_counter()
        probe, gallery, bank, _ = generate_flow(
            SynthParams(num_identities=1000, num_features=3, dims=128, seed=0)
        )
        ds = ReidDataset(probe=probe, gallery=gallery, bank=bank)
        res = run_trials(ds, PipelineConfig(), num_trials=10, split=0.5, seed=0)
        elapsed = time.perf_counter() - t0
        assert res.curve.at(1) > 0.0
        assert elapsed < 60.0, f"took {elapsed:.1f}s"


# --- criterion 10 -----------------------------------------------------------

def test_criterion_10_shipped_configs_and_bundle_validation(tmp_path, capsys):
    with _verdict(10, "shipped operating points load; generated bundles validate"):
        from pathlib import Path

        root = Path(__file__).resolve().parent.parent / "configs"
        a = load_config(root / "prid2011.cfg")
        assert a.tau == 0.3
        assert a.num_keys == 4
        assert a.rho_per_feature == {"GOG": 0.7, "DNS": 0.9, "SDALF": 0.99}
        b = load_config(root / "cybjg.cfg")
        assert b.tau == 0.1
        assert b.num_keys == 2
        assert b.rho_per_feature == {"GOG": 0.9, "DNS": 0.6, "SDALF": 0.99}

        bundle = tmp_path / "bundle"
        assert cli_main(
            ["synth", "--n", "30", "--seed", "0", "--out", str(bundle)]
        ) == 0
        assert cli_main(["validate", str(bundle)]) == 0
        out = capsys.readouterr()
        assert "validation passed" in out.out
