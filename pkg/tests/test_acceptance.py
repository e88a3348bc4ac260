"""End-to-end acceptance criteria; each test prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they are
produced; they are also collected in the terminal summary.
"""
import math
import time

import numpy as np
import pytest
from scipy import special

from conftest import ACCEPTANCE_LINES
from heatw2.core import Domain, PointConfiguration, ReferenceMeasure, RngStream, domain_quadrature, restrict
from heatw2.harness import ExperimentConfig, fit_rate, run_experiment, write_records
from heatw2.processes import (GafSpec, Potential, RadialExpansion, bulk_edge_deviation, kernel_bessel,
                              kernel_rnm_radial, nystrom, sample_dpp_nystrom, sample_gaf_zeros,
                              sample_poisson, sample_projection_dpp)
from heatw2.smoothing import certified_bound
from heatw2.spectral import HeatKernel, NeumannBasis
from heatw2.transport import w2_assignment, w2_bruteforce, w2_semidiscrete

pytestmark = pytest.mark.acceptance

PI2 = math.pi ** 2
SQUARE = Domain.box([0.0, 0.0], [1.0, 1.0])
DISK = Domain.disk()


def _report(n, ok, detail, t0):
    line = f"CRITERION {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}  [{time.perf_counter() - t0:.0f}s]"
    ACCEPTANCE_LINES.append(line)
    print("\n" + line)
    return ok


def _config(process, params, domain, trials, seed, resolution=128, lambda_max=None, t_lo=1e-5):
    return ExperimentConfig.from_dict({
        "process": process, "params": list(params), "domain": domain, "trials": trials, "seed": seed,
        "transport": {"resolution": resolution},
        "smoothing": {"lambda_max": lambda_max, "t_lo": t_lo, "t_hi": 1.0, "c": 1.0},
        "output": "records.csv"})


def test_criterion_01_smoothing_certificate():
    t0 = time.perf_counter()
    cases = []
    uniform = ReferenceMeasure.uniform(SQUARE)
    for L in (64, 256):
        for i in range(50):
            pts = sample_poisson(L, SQUARE, RngStream(101, L * 1000 + i))
            cases.append(("poisson", L, pts, uniform, SQUARE, 1.0))
    # Ginibre: the cosine basis needs a box, so the sample is viewed on the square inscribed in the droplet,
    # where the equilibrium measure restricts to the uniform law
    half = 1 / math.sqrt(2)
    inner = Domain.box([-half, -half], [half, half])
    inner_ref = ReferenceMeasure.uniform(inner)
    for N in (64, 256):
        exp = RadialExpansion(Potential.ginibre(), N)
        for i in range(50):
            pts = restrict(sample_projection_dpp(exp, rng=RngStream(102, N * 1000 + i)), inner)
            cases.append(("ginibre", N, pts, inner_ref, inner, 1 / inner.area()))
    violations, worst = 0, np.inf
    for _, _, pts, ref, dom, c in cases:
        res = w2_semidiscrete(pts, ref, 64)
        _, rep = certified_bound(pts, ref, dom, c, (1e-5, 1.0))
        slack = rep.bound + res.quantization_bound - res.cost
        worst = min(worst, slack)
        violations += slack < 0
    ok = violations == 0 and len(cases) == 200
    _report(1, ok, f"{len(cases) - violations}/{len(cases)} bound + qbound >= W2, min slack {worst:.4f}", t0)
    assert ok


def test_criterion_02_heat_moment():
    t0 = time.perf_counter()
    basis = NeumannBasis(SQUARE, lambda_max=1600 * PI2)
    nodes, w = domain_quadrature(SQUARE, 160)
    worst = -np.inf
    bad = 0
    for y in ((0.5, 0.5), (0.1, 0.9)):
        for t in (0.01, 0.05, 0.1):
            P = HeatKernel(basis, t)
            y_arr = np.array([y])
            direct = float(np.dot(w, ((nodes - y_arr) ** 2).sum(axis=1) * P(nodes, y_arr)[:, 0]))
            separable = float(P.moment2(y_arr)[0])
            assert abs(direct - separable) <= 1e-8
            excess = direct - (2 * 2 * t + 1e-3)
            worst = max(worst, excess)
            bad += excess > 0
    ok = bad == 0
    _report(2, ok, f"6/6 cases checked, {bad} violations, max (moment - 4t) = {worst + 1e-3:.2e}", t0)
    assert ok


@pytest.fixture(scope="module")
def ginibre_rate_records(tmp_path_factory):
    cfg = _config("ginibre_finite", [64, 128, 256, 512, 1024], "unit-disk", 64, 303)
    recs = run_experiment(cfg)
    path = tmp_path_factory.mktemp("c3") / "records.csv"
    write_records(recs, path, cfg.to_dict())
    return recs


def test_criterion_03_ginibre_rate(ginibre_rate_records):
    t0 = time.perf_counter()
    recs = ginibre_rate_records
    errors = [r for r in recs if r.audit.get("error")]
    pure = fit_rate(recs, "pure-power")
    log = fit_rate(recs, "sqrt-log")
    ok = not errors and -0.58 <= pure.exponent <= -0.42 and log.residual_norm < pure.residual_norm
    _report(3, ok, f"gamma {pure.exponent:.4f} +- {pure.stderr:.4f}, residual pure {pure.residual_norm:.4f} "
                   f"vs sqrt-log {log.residual_norm:.4f}, {len(errors)} failed trials", t0)
    assert ok


def test_criterion_04_homogeneous_rates():
    t0 = time.perf_counter()
    details, ok = [], True
    for process, seed in (("gaf", 404), ("ginibre_infinite", 405)):
        # the bound is not needed here; a fixed truncation keeps it cheap while still certified
        cfg = _config(process, [50, 100, 200, 400, 800], "unit-square", 64, seed, lambda_max=1e5, t_lo=1e-3)
        recs = run_experiment(cfg)
        errors = [r for r in recs if r.audit.get("error")]
        fit = fit_rate(recs, "pure-power")
        good = not errors and -0.58 <= fit.exponent <= -0.42
        ok &= good
        details.append(f"{process} gamma {fit.exponent:.4f} +- {fit.stderr:.4f} ({len(errors)} failed)")
    _report(4, ok, "; ".join(details), t0)
    assert ok


def test_criterion_05_transport_oracle():
    t0 = time.perf_counter()
    g = np.random.default_rng(505)
    worst = 0.0
    for _ in range(100):
        n, d = int(g.integers(2, 9)), int(g.integers(1, 4))
        a, b = g.random((n, d)), g.random((n, d))
        ref = w2_bruteforce(a, b)
        worst = max(worst, abs(w2_assignment(a, b).cost - ref) / ref)
    ok = worst <= 1e-10
    _report(5, ok, f"max relative error {worst:.2e} over 100 instances", t0)
    assert ok


def test_criterion_06_semidiscrete_closed_form():
    t0 = time.perf_counter()
    res = w2_semidiscrete(PointConfiguration(np.zeros((1, 2))), ReferenceMeasure.uniform(DISK), 128)
    err = abs(res.cost - math.sqrt(0.5))
    ok = err <= res.quantization_bound
    _report(6, ok, f"|W2 - sqrt(1/2)| = {err:.2e} <= bound {res.quantization_bound:.2e}", t0)
    assert ok


def test_criterion_07_reproducing_and_variance():
    t0 = time.perf_counter()
    K = kernel_rnm_radial(Potential.ginibre(), 8)
    nodes, w = domain_quadrature(Domain.disk(radius=3.0), 160)
    dA = w / np.pi
    rep_err = 0.0
    for z in (0.0, 0.5):
        base = np.array([[z, 0.0]])
        lhs = float(np.dot(dA, np.abs(K.matrix(base, nodes)[0]) ** 2))
        rep_err = max(rep_err, abs(lhs - K.diag(base)[0]) / K.diag(base)[0])

    N = 16
    exp = RadialExpansion(Potential.ginibre(), N)
    # 1/2 double integral of |f(x) - f(y)|^2 |K(x, y)|^2 = int f^2 K(x, x) - sum_jk |int f phi_j conj(phi_k)|^2
    F = exp.features(nodes)
    f = nodes[:, 0]
    first = float(np.dot(dA, f * f * (np.abs(F) ** 2).sum(axis=1)))
    A = (F.conj().T * (dA * f)) @ F
    formula = first - float((np.abs(A) ** 2).sum())
    stats = np.array([sample_projection_dpp(exp, rng=RngStream(707, i)).points[:, 0].sum() for i in range(2000)])
    centred = stats - stats.mean()
    var = float(np.mean(centred ** 2)) * stats.size / (stats.size - 1)
    se = math.sqrt((np.mean(centred ** 4) - np.mean(centred ** 2) ** 2) / stats.size)
    ok = rep_err <= 1e-6 and abs(var - formula) <= 3 * se
    _report(7, ok, f"reproducing rel err {rep_err:.1e}; Var(sum Re z) {var:.4f} vs formula {formula:.6f} "
                   f"(3 sigma = {3 * se:.4f})", t0)
    assert ok


def _within(counts, expected):
    counts = np.asarray(counts, dtype=float)
    return abs(counts.mean() - expected) <= 3 * counts.std(ddof=1) / math.sqrt(counts.size)


def test_criterion_08_intensities():
    t0 = time.perf_counter()
    spec = GafSpec(150, SQUARE)
    gaf = [sample_gaf_zeros(spec, RngStream(808, i)).n for i in range(500)]
    gaf_ok = _within(gaf, 150 / math.pi)

    window = Domain.box([-0.5, -0.5], [0.5, 0.5])
    bessel_kernel = kernel_bessel(100, 2)
    bessel = [sample_dpp_nystrom(bessel_kernel, window, 64, RngStream(809, i)).n for i in range(500)]
    dec = nystrom(bessel_kernel, window, 64)
    bessel_ok = _within(bessel, 100.0) and abs(dec.expected_count - 100) <= 2.0

    N = 16
    exp = RadialExpansion(Potential.ginibre(), N)
    radii = (0.25, 0.5, 0.75)
    counts = np.zeros((2000, len(radii)))
    for i in range(2000):
        r = np.hypot(*sample_projection_dpp(exp, rng=RngStream(810, i)).points.T)
        counts[i] = [(r < s).sum() for s in radii]
    exact = [float(special.gammainc(np.arange(1, N + 1), N * s * s).sum()) for s in radii]
    gin_ok = all(_within(counts[:, j], exact[j]) for j in range(len(radii)))
    ok = gaf_ok and bessel_ok and gin_ok
    _report(8, ok, f"GAF {np.mean(gaf):.2f} vs {150 / math.pi:.2f}; Bessel {np.mean(bessel):.2f} vs 100 "
                   f"(retained {dec.expected_count:.2f}); Ginibre subdisks "
                   + ", ".join(f"{counts[:, j].mean():.3f}/{exact[j]:.3f}" for j in range(len(radii))), t0)
    assert ok


def test_criterion_09_bulk_and_exterior():
    t0 = time.perf_counter()
    pot = Potential.ginibre()
    devs = {N: bulk_edge_deviation(pot, N, [0.5])[0][1] for N in (64, 256, 1024)}
    (_, outside), = bulk_edge_deviation(pot, 256, [2.0])
    lo, hi = min(devs.values()), max(devs.values())
    stable = lo > 0 and hi <= 2 * lo
    ok = stable and outside < 1e-6
    _report(9, ok, "deviation at r=0.5: " + ", ".join(f"N={N} {d:.2e}" for N, d in devs.items())
            + f" (max/min {hi / lo if lo > 0 else math.inf:.1f}); K(2, 2) at N=256 {outside:.1e}", t0)
    assert ok


def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg = _config("ginibre_finite", [64, 256], "unit-disk", 8, 303)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_records(run_experiment(cfg), a, cfg.to_dict())
    write_records(run_experiment(cfg), b, cfg.to_dict())
    ok = a.read_bytes() == b.read_bytes() and a.with_suffix(".json").read_bytes() == b.with_suffix(".json").read_bytes()
    _report(10, ok, f"records and sidecar byte-identical across reruns ({len(a.read_bytes())} bytes)", t0)
    assert ok
