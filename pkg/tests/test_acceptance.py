"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (add ``-m "not slow"`` to skip the
sparse bound sweep, about three minutes).
"""

import math

import numpy as np
import pytest
import scipy.linalg

from conftest import random_pd
from mwlab.characteristics import (
    IntervalFamily,
    apq_characteristic,
    blowup_sweep,
    comparability_sweep,
    conjugate,
    monotonicity_check,
    reducing_operator,
    scalar_ar,
    solve_q2,
)
from mwlab.convex_geometry import DirectionGrid, circled_hull, john_ellipsoid, verify_sandwich
from mwlab.dyadic_grid import DyadicInterval
from mwlab.extrapolation_calc import (
    BodyField,
    ExtrapolationProfile,
    convex_maximal,
    convex_maximal_bruteforce,
    identity_check,
    rdf_iterate,
)
from mwlab.hermitian_core import converse_pair, cordes_check, cordes_gap, power_stack
from mwlab.sparse_engine import (
    conjugate_power_check,
    exponent_profile,
    one_scale_check,
    random_field,
    sparse_bound_sweep,
)
from mwlab.weight_store import random_weight

COMPARABILITY_BAND = 2.0  # frozen after the calibration pass, see test_characteristics


@pytest.fixture
def report(request, capsys):
    """``report(n, ok, detail)`` prints the criterion line past the capture, then asserts."""

    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")
        assert ok, detail

    return emit


def dyadic_ranges(level):
    n = 2**level
    return [(m * (n >> k), (m + 1) * (n >> k)) for k in range(level + 1) for m in range(2**k)]


def test_01_converse_pair_traces(report):
    worst = 0.0
    for n in np.logspace(0, 6, 61):
        C, D = converse_pair(n)
        c, d = C.entries, D.entries
        worst = max(
            worst,
            abs(np.trace(c @ d).real - 2.0),
            abs(np.trace(np.linalg.inv(c) @ np.linalg.inv(d)).real - 8.0 / 3.0),
        )
    report(1, worst <= 1e-9, f"61 log-spaced n in [1, 1e6], worst trace deviation {worst:.2e}")


def test_02_cordes_suite(report):
    rng = np.random.default_rng(2)
    bad, worst = 0, -math.inf
    for k in range(1000):
        d = 2 + k % 2
        A, B = random_pd(rng, d, 1.5), random_pd(rng, d, 1.5)
        for a in (0.0, 0.25, 0.5, 0.75, 1.0):
            rec = cordes_check(A, B, a)
            excess = rec.lhs / rec.rhs - 1.0
            worst = max(worst, excess)
            bad += excess > 1e-9
    report(2, bad == 0, f"1000 pairs x 5 exponents, {bad} violations, worst relative excess {worst:.2e}")


def test_03_converse_growth_band(report):
    ns = [10.0**k for k in range(1, 6)]
    spans = {}
    for a in (1.5, 2.0, 3.0):
        r = [cordes_gap(n, a) / n ** (a - 1) for n in ns]
        spans[a] = max(r) / min(r)
    ok = all(s <= 50 for s in spans.values())
    report(3, ok, "max/min of gap/n^(a-1): " + ", ".join(f"a={a}: {s:.3f}" for a, s in spans.items()))


def random_q0(rng, p0):
    return math.inf if rng.random() < 0.2 else p0 * (1.05 + 10.0 * rng.random())


def test_04_exponent_identities(report):
    rng = np.random.default_rng(4)
    failures = 0
    for _ in range(10_000):
        p0 = 1.0 + 3.0 * rng.random()
        q0 = random_q0(rng, p0)
        hi = q0 if q0 != math.inf else p0 + 20.0
        p, q = (p0 + (hi - p0) * (0.01 + 0.98 * rng.random()) for _ in range(2))
        prof = exponent_profile(p0, q0, p)
        ok = all(prof.check(1e-12).values())
        ok &= identity_check(ExtrapolationProfile(p0, q0), p, q).holds(1e-12)
        failures += not ok
    report(4, failures == 0, f"10^4 triples, {failures} with a failing identity")


def test_05_john_sandwich(report):
    grid = DirectionGrid(2, 256, seed=5)
    rng = np.random.default_rng(5)
    inward, outward = -math.inf, 0.0
    for _ in range(200):
        X = rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2))
        K = circled_hull(grid, X)
        rep = verify_sandwich(K, john_ellipsoid(K), math.sqrt(2) * 1.05)
        inward, outward = max(inward, rep.inward_excess), max(outward, rep.outward_ratio)
    ok = inward <= 1e-6 and outward <= math.sqrt(2) * 1.05
    report(5, ok, f"200 bodies, worst inward excess {inward:.2e}, worst outward ratio {outward:.4f}")


def test_06_reducing_operator_closed_forms(report):
    rng = np.random.default_rng(6)
    worst = 0.0
    for k in range(100):
        W2 = random_weight(2, 3, 1.0, k)
        a, b = sorted(rng.choice(9, 2, replace=False) / 8)
        R = reducing_operator(W2, (a, b), 2.0).matrix.entries
        ref = scipy.linalg.sqrtm(W2.average(a, b))
        worst = max(worst, np.max(np.abs(R - ref)) / np.max(np.abs(ref)))
        W1 = random_weight(1, 3, 1.0, k + 500)
        p = 1.0 + 4.0 * rng.random()
        R1 = reducing_operator(W1, (a, b), p).matrix.entries[0, 0].real
        ref1 = W1.average(a, b)[0, 0].real ** (1 / p)
        worst = max(worst, abs(R1 - ref1) / ref1)
    report(6, worst <= 1e-8, f"100 weights on both paths, worst relative deviation {worst:.2e}")


def test_07_scalar_lane(report):
    rng = np.random.default_rng(7)
    pairs = []
    while len(pairs) < 20:
        p = 1.1 + 3.0 * rng.random()
        pairs.append((p, p * (1.0 + 2.0 * rng.random())))
    ranges = dyadic_ranges(4)
    fam = IntervalFamily.dyadic(4)
    worst = 0.0
    for seed in range(100):
        W = random_weight(1, 4, 1.0, seed)
        w = W.values[:, 0, 0].real
        for p, q in pairs:
            got = apq_characteristic(W, p, q, fam).value
            ref = scalar_ar(w, 1 + q / conjugate(p), ranges)
            worst = max(worst, abs(got - ref) / ref)
    report(7, worst <= 1e-9, f"100 weights x 20 pairs, worst relative deviation {worst:.2e}")


MONOTONE_TRIPLES = [(2, 2, 3), (2, 2, 4), (2, 4, 3), (1.5, 3, 2), (1.5, 3, 4), (3, 3, 4), (2, 3, 2.5), (1.2, 6, 2), (2.5, 5, 6), (4, 2, 6)]


def test_08_monotonicity(report):
    quads = [(p1, q1, p2, solve_q2(p1, q1, p2)) for p1, q1, p2 in MONOTONE_TRIPLES]
    fam = IntervalFamily.dyadic(3)
    failures = 0
    for seed in range(200):
        W = random_weight(2, 3, 1.0, seed)
        failures += sum(not monotonicity_check(W, *quad, fam).holds for quad in quads)
    report(8, failures == 0, f"200 weights x {len(quads)} constrained quadruples, {failures} failures")


@pytest.mark.xfail(strict=True, reason="the block lower bound grows by about x1.1-1.3 from depth 4 to 16, not x10")
def test_09_counterexample_blowup(report):
    parts = []
    ok = True
    for p2 in (3.0, 4.0, 6.0):
        q2 = solve_q2(2.0, 2.0, p2)
        rows = {r.depth: r for r in blowup_sweep(2.0, 2.0, p2, q2, [4, 8, 12, 16])}
        growth = rows[16].lower_bound / rows[4].lower_bound
        flat = rows[12].windows_char / rows[8].windows_char
        ok &= growth >= 10 and flat <= 1.1
        parts.append(f"(p2,q2)=({p2:g},{q2:.4g}): growth x{growth:.3f}, windows ratio {flat:.4f}")
    report(9, ok, "; ".join(parts))


def test_10_comparability(report):
    fam = IntervalFamily.dyadic(4)
    grid = DirectionGrid(2)
    worst = 0.0
    for seed in range(20):
        for spread in (1.0, 2.0):
            W = random_weight(2, 4, spread, seed)
            for t, s in ((2, 2), (3, 2), (2, math.inf), (1.5, 3)):
                r = comparability_sweep(W, t, s, fam, grid)
                worst = max(worst, r.lower_ratio, r.upper_ratio)
    ok = math.isfinite(worst) and worst <= COMPARABILITY_BAND
    report(10, ok, f"160 weight/exponent cases, worst ratio {worst:.4f} (band {COMPARABILITY_BAND})")


def test_11_one_scale(report):
    rng = np.random.default_rng(11)
    fails, worst_slack = 0, math.inf
    for seed in range(200):
        Q = DyadicInterval(int(rng.integers(0, 3)), 0)
        r1, r2 = 1.0 + 3.0 * rng.random(), 1.0 + 3.0 * rng.random()
        rec = one_scale_check(random_field(2, 4, seed), random_field(2, 4, seed + 1000), Q, 1.0, r1, r2, 0.1)
        fails += not rec.holds
        worst_slack = min(worst_slack, rec.slack)
    dev = 0.0
    for seed in range(50):
        rec = one_scale_check(random_field(1, 4, seed), random_field(1, 4, seed + 1000), DyadicInterval(1, seed % 2), 2.0, 1.5, 3.0)
        dev = max(dev, abs(rec.lhs - rec.rhs) / rec.rhs)
    ok = fails == 0 and dev <= 1e-9
    report(11, ok, f"d=2: {fails}/200 failures, worst slack {worst_slack:.3f}; d=1: worst deviation {dev:.1e}")


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="a few families still gain cubes at level 9; every family is saturated by depth 10")
def test_12_sparse_bound_ratios(report):
    prof = exponent_profile(1.0, math.inf, 2.0)
    rows = sparse_bound_sweep(range(100), [1, 2], list(range(4, 11)), prof, eps=0.25)
    by_depth, per_run = {}, {}
    for r in rows:
        by_depth[r["depth"]] = max(by_depth.get(r["depth"], 0.0), r["ratio"])
        per_run.setdefault((r["d"], r["seed"]), {})[r["depth"]] = r["ratio"]
    finite = all(math.isfinite(r["ratio"]) for r in rows)
    drift = by_depth[10] / by_depth[8] - 1.0
    last = max(abs(v[10] - v[9]) / v[9] for v in per_run.values() if v[9] > 0)
    ok = finite and abs(drift) <= 0.05
    maxima = ", ".join(f"{k}: {v:.4f}" for k, v in sorted(by_depth.items()))
    report(12, ok, f"{len(rows)} rows, max ratio per depth {{{maxima}}}, depth 10 vs 8 {drift:+.2%}, "
                   f"largest per-run change depth 9 to 10 {last:.1e}")


def test_13_maximal_oracle(report):
    worst, exact = 0.0, True
    for level in range(7):
        for seed in range(3):
            grid = DirectionGrid(2, 32, seed)
            W = random_weight(2, level, 1.0, seed)
            F = BodyField.ellipsoids(grid, W.values)
            fast, slow = convex_maximal(F).h, convex_maximal_bruteforce(F).h
            worst = max(worst, float(np.max(np.abs(fast - slow) / slow)))
            # dyadic-rational supports: every average is exact, so equality is bitwise
            H = np.random.default_rng(seed).integers(1, 64, (2**level, grid.n_base)) / 64.0
            G = BodyField.from_base(grid, level, H)
            exact &= np.array_equal(convex_maximal(G).h, convex_maximal_bruteforce(G).h)
    ok = exact and worst <= 1e-13
    report(13, ok, f"grids of 1..64 cells, worst relative deviation {worst:.1e}, bitwise on dyadic rationals: {exact}")


def test_14_rdf_demo(report):
    prof = ExtrapolationProfile(1.0, 4.0)
    q = 2.0
    r = prof.r(q)
    grid = DirectionGrid(2, 64)
    flags, worst_norm = True, 0.0
    for seed in range(4):
        W = random_weight(2, 5, 0.8, seed)
        c = np.exp(np.random.default_rng(seed).standard_normal(32))
        G = BodyField.ellipsoids(grid, c[:, None, None] * power_stack(W.values, -1.0 / r))
        ch = rdf_iterate(G, W, q, prof, k_max=40, seed=seed).checks
        flags &= ch["contains_G"] and ch["a1_type"] and ch["ellipsoid_valued"] and ch["norm_bound"]
        worst_norm = max(worst_norm, ch["norm_ratio"])
    ok = flags and worst_norm <= 2.01
    report(14, ok, f"4 seeded 32-cell runs at k_max=40, properties hold: {flags}, worst |SG|/|G| {worst_norm:.4f}")


def test_15_conjugate_power_grid(report):
    bad, tightest = 0, math.inf
    for t in np.linspace(1.05, 20.0, 20):
        for delta in np.linspace(0.02, 0.98, 20):
            rec = conjugate_power_check(float(t), float(delta))
            bad += not rec.holds
            tightest = min(tightest, rec.bound / rec.value)
    report(15, bad == 0, f"400 (t, delta) points, {bad} violations, smallest bound/value {tightest:.3f}")
