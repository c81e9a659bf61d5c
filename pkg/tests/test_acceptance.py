"""Exit criteria for the package, one test per criterion."""

import csv
import io
import itertools
import json
import math
import random
import time

import numpy as np
import pytest

from navhist.cli import main
from navhist.core import Episode, SamplerConfig, load_sampled, load_trajectory, save_sampled, save_trajectory
from navhist.eqa import MockClient, ResponseParseError, build_prompt, generate, parse_response, select_context
from navhist.metrics import ObjectiveInputs, action_loss, composite_objective, sel, sel_term, success_rate
from navhist.posenc import PosEncConfig, encode_2d, encode_axis, frequencies
from navhist.sampler import cosine_similarity, oracle_sample, sample_history
from navhist.simulator import House, bundled_trajectories, default_tour, generate_house, run_policy
from navhist.sweep import COLUMNS, PAPER_GRID

from _gen import EPS_VALUES, TAU_VALUES, W_VALUES, make_traj, random_trajectory

N_CASES = 1000
GRID = list(itertools.product(W_VALUES, EPS_VALUES, TAU_VALUES))


@pytest.fixture(scope="module")
def equivalence_run():
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    runs = []
    for k in range(N_CASES):
        traj = random_trajectory(rng, n=int(rng.integers(1, 501)))
        w, eps, tau = GRID[k % len(GRID)]
        cfg = SamplerConfig(w, eps, tau)
        runs.append((traj, cfg, sample_history(traj, cfg), oracle_sample(traj, cfg)))
    return runs, time.perf_counter() - start


def test_ac01_oracle_equivalence(equivalence_run):
    """AC1 sample_history == oracle_sample on 1,000 seeded trajectories (len 1-500, full W/eps/tau grid), < 30 s"""
    runs, elapsed = equivalence_run
    mismatches = [k for k, (_, _, fast, ref) in enumerate(runs) if not (
        fast.source_t == ref.source_t
        and fast.n_valid == ref.n_valid
        and np.array_equal(fast.rel_positions, ref.rel_positions)
        and np.array_equal(fast.features, ref.features)
    )]
    assert mismatches == []
    assert len(runs) == N_CASES
    assert {(c.window_w, c.epsilon_m, c.tau) for _, c, _, _ in runs} == set(GRID)
    lengths = [len(t) for t, _, _, _ in runs]
    assert min(lengths) >= 1 and max(lengths) <= 500
    # the corpus must actually exercise skipping
    skipped = sum(
        1 for t, _, h, _ in runs
        if list(h.source_t[: h.n_valid]) != list(range(len(t) - 1, len(t) - 1 - h.n_valid, -1))
    )
    assert skipped >= 200
    assert elapsed < 30.0


def test_ac02_invariants(equivalence_run):
    """AC2 length W, newest anchor at (0,0,0), pairwise non-redundancy, padding replicates last valid: zero violations"""
    runs, _ = equivalence_run
    violations = []
    for k, (traj, cfg, h, _) in enumerate(runs):
        if len(h) != cfg.window_w or h.features.shape[0] != cfg.window_w:
            violations.append((k, "length"))
        if h.source_t[0] != len(traj) - 1 or h.rel_positions[0].tolist() != [0.0, 0.0, 0.0]:
            violations.append((k, "anchor"))
        for b in range(h.n_valid):
            for a in range(b):
                d = h.rel_positions[b] - h.rel_positions[a]
                dist = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
                va, vb = h.features[a], h.features[b]
                cos = cosine_similarity(vb, va) if va.any() and vb.any() else 0.0
                if dist < cfg.epsilon_m and cos > cfg.tau:
                    violations.append((k, "redundant", a, b))
        last = h.n_valid - 1
        for j in range(h.n_valid, cfg.window_w):
            if (h.source_t[j] != h.source_t[last]
                    or not np.array_equal(h.features[j], h.features[last])
                    or not np.array_equal(h.rel_positions[j], h.rel_positions[last])):
                violations.append((k, "padding", j))
    assert violations == []


def test_ac03_hand_trace():
    """AC3 5-frame hand-trace fixture gives source_t [4, 2, 1, 1] at eps=0.1, tau=0.95, W=4"""
    traj = make_traj([0.0, 0.05, 0.5, 0.52, 0.55], [[1, 0], [1, 0], [0, 1], [1, 0], [1, 0]])
    cfg = SamplerConfig(window_w=4, epsilon_m=0.1, tau=0.95)
    assert list(sample_history(traj, cfg).source_t) == [4, 2, 1, 1]
    assert list(oracle_sample(traj, cfg).source_t) == [4, 2, 1, 1]


def test_ac04_revisit_compression():
    """AC4 revisit_loop with K=8 poses x R=5 keeps exactly 8 at defaults and min(40, W) with eps=0"""
    house = generate_house(1, 4, 8.0)
    start = next(c for c in house.free_cells() if _has_tour(house, c))
    traj, _ = run_policy(house, "revisit_loop", start, steps=8 * 5)
    assert len(traj) == 40
    assert len({(o.position, o.heading_deg) for o in traj}) == 8
    assert sample_history(traj, SamplerConfig()).n_valid == 8
    for w in (20, 40, 60):
        assert sample_history(traj, SamplerConfig(w, 0.0, 0.95)).n_valid == min(40, w)


def _has_tour(house, cell):
    try:
        default_tour(house, cell)
        return True
    except ValueError:
        return False


def test_ac05_positional_encoding():
    """AC5 shift-rotation identity to 1e-9 on 100 triples; PE(0,0) = [0,1,...]; omega_0 = 1, omega_1 = 0.01 (c=8)"""
    rng = random.Random(5)
    for _ in range(100):
        c = rng.choice([4, 8, 16, 64, 256, 1024])
        cfg = PosEncConfig(c)
        k = rng.randrange(c // 4)
        v, delta = rng.uniform(-100, 100), rng.uniform(-100, 100)
        om = frequencies(cfg)[k]
        a = encode_axis(v, cfg)[2 * k : 2 * k + 2]
        b = encode_axis(v + delta, cfg)[2 * k : 2 * k + 2]
        rot = np.array([[math.cos(delta * om), math.sin(delta * om)], [-math.sin(delta * om), math.cos(delta * om)]])
        assert np.max(np.abs(b - rot @ a)) <= 1e-9
    for c in (4, 8, 1024):
        assert encode_2d(0.0, 0.0, PosEncConfig(c)).tolist() == [0.0, 1.0] * (c // 2)
    om = frequencies(PosEncConfig(8, 10000.0))
    assert abs(om[0] - 1.0) <= 1e-12 and abs(om[1] - 0.01) <= 1e-12


def test_ac06_metrics():
    """AC6 SEL fixture 0.75 (1e-12), SR [S,F,S,S] = 0.75, SEL <= SR on 1,000 sets, shortest-path SEL term 1.0"""
    two = [Episode(True, 10, 10), Episode(True, 5, 10)]
    assert abs(sel(two) - 0.75) <= 1e-12
    assert success_rate([Episode(s, 1, 1) for s in (True, False, True, True)]) == 0.75
    rng = np.random.default_rng(6)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        eps = [Episode(bool(rng.random() < 0.6), int(rng.integers(1, 300)), int(rng.integers(1, 300)))
               for _ in range(n)]
        assert sel(eps) <= success_rate(eps)
    house = generate_house(4, 5, 8.0)
    free = house.free_cells()
    succeeded = 0
    for _ in range(50):
        s, g = free[rng.integers(len(free))], free[rng.integers(len(free))]
        if s == g:
            continue
        _, ep = run_policy(house, "shortest_path", s, g, steps=10_000)
        if ep.success:
            succeeded += 1
            assert sel_term(ep) == 1.0
    assert succeeded > 0
    _, ep = run_policy(House.open(3, 3), "shortest_path", (0, 0), (2, 2))
    assert ep.episode_len == 4 and ep.success and sel_term(ep) == 1.0


def test_ac07_objective():
    """AC7 composite(1, 2, occ=3, lambda=0.5) = 4.5; lambda=0 drops occupancy; uniform 20-way CE = ln 20 (1e-12)"""
    assert composite_objective(ObjectiveInputs([1.0], [-2.0], 3.0, 0.5)) == 4.5
    assert composite_objective(ObjectiveInputs([1.0], [-2.0], 3.0, 0.0)) == 3.0
    ce = -math.log(1.0 / 20.0)
    assert abs(ce - math.log(20)) <= 1e-12
    assert abs(action_loss([ce]) - math.log(20)) <= 1e-12


def test_ac08_determinism(tmp_path, capsys):
    """AC8 simulate and sweep reruns are byte-identical; trajectory and sampled-history files round-trip exactly"""
    blobs = []
    for k in range(2):
        d = tmp_path / f"sim{k}"
        assert main(["simulate", "--seed", "7", "--rooms", "4", "--policy", "random_walk",
                     "--steps", "200", "--out", str(d)]) == 0
        blobs.append([(d / f).read_bytes() for f in ("trajectory.jsonl", "episode.jsonl", "house.json")])
    assert blobs[0] == blobs[1]

    traj_path = tmp_path / "sim0" / "trajectory.jsonl"
    csvs = []
    for k in range(2):
        out = tmp_path / f"sweep{k}.csv"
        assert main(["sweep", "--in", str(traj_path), "--paper-grid", "--out", str(out)]) == 0
        csvs.append(out.read_bytes())
    assert csvs[0] == csvs[1]

    traj = load_trajectory(traj_path)
    again = tmp_path / "again.jsonl"
    save_trajectory(traj, again)
    assert again.read_bytes() == traj_path.read_bytes()
    assert load_trajectory(again) == traj
    hist = sample_history(traj, SamplerConfig())
    hp = tmp_path / "h.json"
    save_sampled(hist, hp)
    back = load_sampled(hp)
    assert back == hist
    assert back.features.tobytes() == hist.features.tobytes()
    assert back.rel_positions.tobytes() == hist.rel_positions.tobytes()
    capsys.readouterr()


def test_ac09_eqa_pipeline(tmp_path, capsys, monkeypatch):
    """AC9 select_context suffix on {1,30,60,100} x W=60; 2-section responses rejected; eqa-pack rerun byte-identical"""
    for n in (1, 30, 60, 100):
        traj = make_traj([0.0] * n, [[1.0]] * n)
        refs = select_context(traj, 60)
        assert refs == list(range(max(0, n - 60), n))
        assert all(b == a + 1 for a, b in zip(refs, refs[1:]))
    full = "Scene: s\nPlan: p\nReasoning: r"
    lines = full.splitlines()
    for drop in range(3):
        with pytest.raises(ResponseParseError):
            parse_response("\n".join(ln for k, ln in enumerate(lines) if k != drop))
    with pytest.raises(ResponseParseError):
        generate(build_prompt("find a vase", [0]), MockClient(n_sections=2))

    monkeypatch.delenv("EQA_ENDPOINT", raising=False)
    traj = make_traj([0.01 * t for t in range(100)], [[1.0, 0.0]] * 100,
                     meta={"instruction": "go to a laptop in the bedroom"})
    tp = tmp_path / "t.jsonl"
    save_trajectory(traj, tp)
    outs = []
    for k in range(2):
        op = tmp_path / f"pair{k}.jsonl"
        assert main(["eqa-pack", "--in", str(tp), "--w", "60", "--out", str(op)]) == 0
        outs.append(op.read_bytes())
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["frame_refs"] == list(range(40, 100))
    capsys.readouterr()


def test_ac10_sweep_harness(tmp_path, capsys):
    """AC10 paper-grid sweep on the bundled set: one schema-valid CSV row per (grid point, trajectory), < 60 s"""
    start = time.perf_counter()
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--paper-grid", "--out", str(out)]) == 0
    elapsed = time.perf_counter() - start
    names = [n for n, _ in bundled_trajectories()]
    reader = csv.DictReader(io.StringIO(out.read_text()))
    assert tuple(reader.fieldnames) == COLUMNS
    rows = list(reader)
    assert len(rows) == len(PAPER_GRID) * len(names)
    expected = [(w, e, t, n) for (w, e, t) in PAPER_GRID for n in names]
    got = [(int(r["w"]), float(r["epsilon"]), float(r["tau"]), r["trajectory"]) for r in rows]
    assert got == expected
    assert {w for w, _, _ in PAPER_GRID} == {20, 40, 60, 80, 100}
    assert {e for _, e, _ in PAPER_GRID} == {0.05, 0.1, 0.15, 0.2}
    assert {0.9, 0.95, 0.99} <= {t for _, _, t in PAPER_GRID}
    for r in rows:
        assert 0 <= int(r["n_selected"]) <= int(r["w"])
        assert int(r["n_selected"]) + int(r["n_padded"]) == int(r["w"])
        assert 0.0 < float(r["retained_fraction"]) <= 1.0
        assert math.isfinite(float(r["min_pairwise_dist_m"])) and -1 <= float(r["mean_pairwise_cos"]) <= 1
    assert elapsed < 60.0
    capsys.readouterr()
