"""Acceptance criteria, one test each, at the stated tolerances and time budgets.

Every test records a single ``[criterion N] PASS|FAIL`` line with its measured
quantities; the lines are printed in an "acceptance criteria" section at the
end of the pytest run. Criteria 3 to 10 take a few
minutes in total and carry the ``slow`` marker.
"""
import itertools
import math
import statistics
import sys
import time

import mpmath
import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, brute_force_extreme_points, sorted_rows
from reachset import bounds as bd
from reachset.domains import BallSet, RectangleSet, UniformVolume, boundary_coverage_constant
from reachset.estimators import randup
from reachset.experiments import (ExperimentConfig, ellipse_truth, run_nn_verify, run_sensitivity)
from reachset.geometry import HullEstimate, convex_hull, hausdorff_hulls, min_enclosing_ball
from reachset.maps import Affine, ReluNetwork, estimate_lipschitz, region_failure_probability
from reachset.specfun import CapIntersectionQuery, ball_volume, cap_intersection_volume, incomplete_beta

DISC = {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0}
X0 = RectangleSet((2.5, -0.25), (3.0, 0.25))

# full runs are reused by the determinism criterion
_RUNS: dict = {}


def report(number, ok, detail):
    line = f"[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def _timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


def _min_time(fn, repeats=20):
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return out, best


# --------------------------------------------------------------------------- 1, 2


def test_criterion_01_minimal_samples():
    eps, L, perimeter = 0.02, 1.0, 2.0
    spec = bd.BoundSpec(eps, L, bd.RectBoundary2D(perimeter), bd.DirectLambda(eps / 2))
    M, t = _min_time(lambda: bd.min_samples(spec, 1e-4))
    d = bd.delta_m(spec, M)
    # cross-check Lambda against the rectangle's own boundary constant
    lam_rect = boundary_coverage_constant(X0, eps / (2 * L))
    ok = M == 1376 and d <= 1e-4 and math.isclose(lam_rect, eps / 2, rel_tol=1e-14) and t < 1e-3
    report(1, ok, f"min_samples={M}, delta_m={d:.6g}, time={t * 1e3:.3f} ms")


def test_criterion_02_covering_constant():
    D, t = _min_time(lambda: bd.covering_bound(bd.RectBoundary2D(2.0), 0.01))
    report(2, D == 101 and t < 1e-3, f"covering_bound={D!r}, time={t * 1e3:.4f} ms")


# --------------------------------------------------------------------------- 3, 4, 5


def criterion3_config():
    return ExperimentConfig.from_dict({
        "experiment": "sensitivity", "seed": 0, "trials": 200, "M": [1000], "eps": "auto(1e-3)",
        "truth_points": 10_000, "input_set": DISC, "sensitivity": {"L": [1.0, 2.0, 4.0], "alpha": [1.0]}})


def criterion4_configs():
    base = {"experiment": "sensitivity", "seed": 0, "trials": 100, "M": [1000], "eps": "auto(1e-3)",
            "truth_points": 10_000, "input_set": DISC}
    return (ExperimentConfig.from_dict({**base, "sensitivity": {"L": [1.0, 2.0, 4.0], "alpha": [1.0]}}),
            ExperimentConfig.from_dict({**base, "sensitivity": {"L": [2.0], "alpha": [1.0, 4.0, 16.0]}}))


def criterion5_config():
    return ExperimentConfig.load("configs/nn_verify.toml")


@pytest.mark.slow
def test_criterion_03_coverage_validity():
    out, t = _timed(run_sensitivity, criterion3_config())
    _RUNS[3] = out.csv_text
    hits = {}
    for rec in out.records:
        hits.setdefault(rec.L, []).append(bool(rec.within_eps) and rec.covered)
    counts = {L: sum(v) for L, v in hits.items()}
    eps = {rec.L: rec.eps for rec in out.records}
    ok = all(len(hits[L]) == 200 and counts[L] >= 195 for L in (1.0, 2.0, 4.0)) and t < 120
    detail = ", ".join(f"L={L:g}: {counts[L]}/200 (eps={eps[L]:.4f})" for L in sorted(counts))
    report(3, ok, f"{detail}, time={t:.1f} s")


@pytest.mark.slow
def test_criterion_04_sensitivity_orderings():
    start = time.perf_counter()
    cfg_L, cfg_alpha = criterion4_configs()
    by_L, by_alpha = run_sensitivity(cfg_L), run_sensitivity(cfg_alpha)
    t = time.perf_counter() - start
    _RUNS[4] = by_L.csv_text + by_alpha.csv_text
    med_L = [row["median_dH"] for row in by_L.summary]
    med_a = [row["median_dH"] for row in by_alpha.summary]
    below = all(row["median_dH"] < row["eps_theoretical"] for row in by_L.summary + by_alpha.summary)
    ok = (med_L[0] < med_L[1] < med_L[2] and med_a[0] > med_a[1] > med_a[2] and below and t < 180)
    report(4, ok, "medians over L=1,2,4: " + ", ".join(f"{m:.4f}" for m in med_L)
           + "; over alpha=1,4,16 at L=2: " + ", ".join(f"{m:.4f}" for m in med_a)
           + f"; all below theoretical eps: {below}; time={t:.1f} s")


@pytest.mark.slow
def test_criterion_05_estimator_ordering():
    out, t = _timed(run_nn_verify, criterion5_config())
    _RUNS[5] = out.csv_text
    mean = {(row["estimator"], row["M"]): row["mean_dH"] for row in out.summary if row["horizon"] == 4}
    Ms = [100, 1000, 10_000]
    randup_m = [mean["randup", M] for M in Ms]
    ball_m = [mean["gotube", M] for M in Ms]
    ordered = all(r < b for r, b in zip(randup_m, ball_m))
    randup_dec = all(b < a for a, b in zip(randup_m, randup_m[1:]))
    ball_dec = all(b < a for a, b in zip(ball_m, ball_m[1:]))
    ok = ordered and randup_dec and ball_dec and t < 300
    report(5, ok, "mean d_H randup " + ", ".join(f"{m:.4f}" for m in randup_m)
           + "; ball " + ", ".join(f"{m:.4f}" for m in ball_m)
           + f"; randup < ball: {ordered}; randup decreasing: {randup_dec}; ball decreasing: {ball_dec}"
           + f"; time={t:.1f} s")


# --------------------------------------------------------------------------- 6


def _lens_monte_carlo(p, rho, r, n, rng, chunk=1_000_000):
    """Hit rate of B((r, 0, ..), r) among uniform points of B(0, rho), scaled by vol B(0, rho)."""
    hits = 0
    centre = np.zeros(p)
    centre[0] = r
    done = 0
    while done < n:
        m = min(chunk, n - done)
        z = rng.standard_normal((m, p))
        z *= (rho * rng.random(m) ** (1.0 / p) / np.linalg.norm(z, axis=1))[:, None]
        hits += int(np.count_nonzero(np.sum((z - centre) ** 2, axis=1) <= r * r))
        done += m
    frac = hits / n
    vol = ball_volume(p, rho)
    return vol * frac, vol * math.sqrt(frac * (1 - frac) / n)


def _beta_quadrature(x, a, b):
    """I_x(a, b) by tanh-sinh quadrature after u = s^a, which removes the s^(a-1) endpoint singularity."""
    a, b = mpmath.mpf(a), mpmath.mpf(b)
    top = mpmath.mpf(x) ** a
    integral = mpmath.quad(lambda u: (1 - u ** (1 / a)) ** (b - 1), mpmath.linspace(0, top, 9), maxdegree=10)
    return integral / (a * mpmath.beta(a, b))


@pytest.mark.slow
def test_criterion_06_special_functions():
    start = time.perf_counter()
    rng = np.random.default_rng(6)
    mpmath.mp.dps = 30
    worst_beta = 0.0
    for _ in range(200):
        x = float(rng.uniform(0.001, 0.999))
        a, b = (float(v) for v in np.exp(rng.uniform(math.log(0.2), math.log(30.0), 2)))
        ref = _beta_quadrature(x, a, b)
        worst_beta = max(worst_beta, abs(incomplete_beta(x, a, b) - float(ref)) / float(ref))

    worst_z = 0.0
    for _ in range(20):
        p = int(rng.integers(1, 6))
        r = float(rng.uniform(0.2, 2.0))
        rho = float(rng.uniform(0.05, 1.95)) * r
        est, se = _lens_monte_carlo(p, rho, r, 10_000_000, rng)
        exact = cap_intersection_volume(CapIntersectionQuery(p, rho, r))
        worst_z = max(worst_z, abs(exact - est) / se)
    clamp_far = cap_intersection_volume(CapIntersectionQuery(3, 5.0, 1.5)) == ball_volume(3, 1.5)
    clamp_edge = cap_intersection_volume(CapIntersectionQuery(2, 2.0, 1.0)) == ball_volume(2, 1.0)
    clamp_zero = cap_intersection_volume(CapIntersectionQuery(4, 0.0, 1.0)) == 0.0
    t = time.perf_counter() - start
    ok = worst_beta <= 1e-8 and worst_z <= 3.0 and clamp_far and clamp_edge and clamp_zero and t < 120
    report(6, ok, f"incomplete_beta worst rel err={worst_beta:.2e}; lens worst |z|={worst_z:.2f}; "
                  f"clamps exact: {clamp_far and clamp_edge and clamp_zero}; time={t:.1f} s")


# --------------------------------------------------------------------------- 7


def _brute_force_meb_radius(pts):
    """Smallest ball through 2 or 3 of the points that contains them all (planar clouds)."""
    best = math.inf
    for i, j in itertools.combinations(range(len(pts)), 2):
        c = 0.5 * (pts[i] + pts[j])
        rad = 0.5 * np.linalg.norm(pts[i] - pts[j])
        if np.all(np.linalg.norm(pts - c, axis=1) <= rad * (1 + 1e-12) + 1e-15):
            best = min(best, rad)
    for i, j, k in itertools.combinations(range(len(pts)), 3):
        a, b, c = pts[i], pts[j], pts[k]
        d = 2 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
        if abs(d) < 1e-14:
            continue
        ux = ((a @ a) * (b[1] - c[1]) + (b @ b) * (c[1] - a[1]) + (c @ c) * (a[1] - b[1])) / d
        uy = ((a @ a) * (c[0] - b[0]) + (b @ b) * (a[0] - c[0]) + (c @ c) * (b[0] - a[0])) / d
        centre = np.array([ux, uy])
        rad = np.linalg.norm(a - centre)
        if np.all(np.linalg.norm(pts - centre, axis=1) <= rad * (1 + 1e-12) + 1e-15):
            best = min(best, rad)
    return best


@pytest.mark.slow
def test_criterion_07_geometry():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    worst_axiom = 0.0
    for k in range(1000):
        dim = 2 + k % 3
        hulls = [convex_hull(rng.normal(size=(int(rng.integers(1, 12)), dim)) + rng.normal(size=dim))
                 for _ in range(3)]
        a, b, c = hulls
        d_ab, d_ba = hausdorff_hulls(a, b), hausdorff_hulls(b, a)
        d_bc, d_ac = hausdorff_hulls(b, c), hausdorff_hulls(a, c)
        worst_axiom = max(worst_axiom, hausdorff_hulls(a, a), abs(d_ab - d_ba), d_ac - (d_ab + d_bc), -d_ab)
    axioms_ok = worst_axiom <= 1e-7

    hull_mismatch = 0
    for _ in range(500):
        n = int(rng.integers(1, 51))
        pts = rng.normal(size=(n, 2)) if rng.random() < 0.5 else rng.integers(-4, 5, size=(n, 2)).astype(float)
        if not np.array_equal(sorted_rows(convex_hull(pts).vertices), sorted_rows(brute_force_extreme_points(pts))):
            hull_mismatch += 1

    worst_meb = 0.0
    for _ in range(200):
        pts = rng.normal(size=(int(rng.integers(2, 13)), 2))
        worst_meb = max(worst_meb, abs(min_enclosing_ball(pts).radius - _brute_force_meb_radius(pts)))
    t = time.perf_counter() - start
    ok = axioms_ok and hull_mismatch == 0 and worst_meb <= 1e-9 and t < 60
    report(7, ok, f"metric axioms worst violation={worst_axiom:.2e}; hull mismatches={hull_mismatch}/500; "
                  f"MEB worst radius gap={worst_meb:.2e}; time={t:.1f} s")


# --------------------------------------------------------------------------- 8


@pytest.mark.slow
def test_criterion_08_lipschitz():
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    worst_affine = 0.0
    for _ in range(20):
        A = rng.normal(size=(3, 4))
        est = estimate_lipschitz(Affine(A), BallSet((0, 0, 0, 0), 1.0), UniformVolume(1), 1)
        exact = np.linalg.svd(A, compute_uv=False)[0]
        worst_affine = max(worst_affine, abs(est.L_hat - exact) / exact)

    relu = ReluNetwork(((np.array([[1.0]]), np.array([0.0])), (np.array([[1.0]]), np.array([0.0]))))
    interval = RectangleSet((-1.0,), (1.0,))
    relu_hits = sum(estimate_lipschitz(relu, interval, UniformVolume(s), 100).L_hat == 1.0 for s in range(50))

    net = ReluNetwork(tuple((rng.normal(size=(o, i)), rng.normal(size=o)) for i, o in ((3, 8), (8, 8), (8, 2))))
    h = 1e-6
    checked, worst_fd = 0, 0.0
    while checked < 100:
        x = rng.normal(size=3)
        z, pre = x, []
        for W, b in net.layers[:-1]:
            z = W @ z + b
            pre.append(z)
            z = np.maximum(z, 0)
        if np.min(np.abs(np.concatenate(pre))) < 1e-3:
            continue
        fd = np.stack([(net(x + h * e) - net(x - h * e)) / (2 * h) for e in np.eye(3)], axis=1)
        worst_fd = max(worst_fd, float(np.max(np.abs(net.jacobian(x) - fd))))
        checked += 1

    formula_ok = all(region_failure_probability(N, lam, M) == N * (1 - lam) ** M
                     for N, lam, M in ((2, 0.5, 10), (7, 0.1, 40), (100, 0.01, 1000), (1, 0.9, 1)))
    t = time.perf_counter() - start
    ok = worst_affine <= 1e-6 and relu_hits == 50 and worst_fd <= 1e-4 and formula_ok and t < 30
    report(8, ok, f"affine worst rel err={worst_affine:.2e}; relu L_hat=1 in {relu_hits}/50 seeds; "
                  f"Jacobian vs finite differences worst={worst_fd:.2e}; confidence formula: {formula_ok}; "
                  f"time={t:.1f} s")


# --------------------------------------------------------------------------- 9


@pytest.mark.slow
def test_criterion_09_consistency_trend():
    from reachset.maps import Scaling

    start = time.perf_counter()
    L = 2.0
    disc = BallSet((0.0, 0.0), 1.0)
    truth = convex_hull(ellipse_truth(L, disc, 10_000))
    medians = []
    for M in (100, 1000, 10_000, 100_000):
        errs = [hausdorff_hulls(randup(Scaling(L), disc, UniformVolume(trial), M, 1.0 / M).hull, truth)
                for trial in range(20)]
        medians.append(statistics.median(errs))
    t = time.perf_counter() - start
    ok = all(b < a for a, b in zip(medians, medians[1:])) and t < 120
    report(9, ok, "median d_H at M=1e2..1e5: " + ", ".join(f"{m:.2e}" for m in medians) + f"; time={t:.1f} s")


# --------------------------------------------------------------------------- 10


@pytest.mark.slow
def test_criterion_10_determinism():
    first = dict(_RUNS)
    if 3 not in first:
        first[3] = run_sensitivity(criterion3_config()).csv_text
    if 4 not in first:
        cfg_L, cfg_alpha = criterion4_configs()
        first[4] = run_sensitivity(cfg_L).csv_text + run_sensitivity(cfg_alpha).csv_text
    if 5 not in first:
        first[5] = run_nn_verify(criterion5_config()).csv_text
    cfg_L, cfg_alpha = criterion4_configs()
    repeats = {}
    for threads in (1, 4):
        repeats[threads] = {
            3: run_sensitivity(criterion3_config(), threads=threads).csv_text,
            4: run_sensitivity(cfg_L, threads=threads).csv_text + run_sensitivity(cfg_alpha, threads=threads).csv_text,
            5: run_nn_verify(criterion5_config(), threads=threads).csv_text,
        }
    same = {k: all(repeats[th][k] == first[k] for th in (1, 4)) for k in (3, 4, 5)}
    report(10, all(same.values()), ", ".join(f"criterion {k} CSV identical at 1 and 4 threads: {v}"
                                             for k, v in same.items()))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
