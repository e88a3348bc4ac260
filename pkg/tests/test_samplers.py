import numpy as np
import pytest
from scipy import special

from heatw2.core import Domain, RngStream
from heatw2.processes import (DiscretizationError, EnvelopeError, FiniteExpansion, Potential, RadialExpansion,
                              kernel_bessel, kernel_infinite_ginibre, nystrom, sample_dpp_nystrom,
                              sample_poisson, sample_projection_dpp)


def test_poisson_square_moments(unit_square):
    counts = np.array([sample_poisson(100, unit_square, RngStream(1, i)).n for i in range(2000)])
    se = np.sqrt(100 / counts.size)
    assert abs(counts.mean() - 100) <= 3 * se
    assert abs(counts.var(ddof=1) / 100 - 1) <= 3 * np.sqrt(2 / counts.size)


def test_poisson_disk_mean(unit_disk):
    counts = np.array([sample_poisson(100, unit_disk, RngStream(2, i)).n for i in range(1000)])
    assert abs(counts.mean() - 100 * np.pi) <= 3 * np.sqrt(100 * np.pi / counts.size)
    pts = sample_poisson(100, unit_disk, RngStream(2, 0)).points
    assert np.all(unit_disk.contains(pts))


def test_poisson_replay(unit_square):
    a = sample_poisson(50, unit_square, RngStream(3, 7))
    b = sample_poisson(50, unit_square, RngStream(3, 7))
    np.testing.assert_array_equal(a.points, b.points)
    with pytest.raises(ValueError):
        sample_poisson(0, unit_square, RngStream(3, 7))


def _uniform_rank_one(window):
    return FiniteExpansion(lambda x: np.ones((len(x), 1), dtype=complex), 1, 2, window=window, diag_sup=1.0)


def test_rank_one_uniform(unit_square):
    exp = _uniform_rank_one(unit_square)
    g = np.random.default_rng(4)
    pts = np.vstack([sample_projection_dpp(exp, rng=g).points for _ in range(3000)])
    assert pts.shape == (3000, 2)
    se = np.sqrt(1 / 12 / 3000)
    assert np.all(np.abs(pts.mean(axis=0) - 0.5) <= 3 * se)


def test_envelope_violation_detected(unit_square):
    exp = FiniteExpansion(lambda x: np.ones((len(x), 1), dtype=complex), 1, 2, window=unit_square, diag_sup=0.5)
    with pytest.raises(EnvelopeError):
        sample_projection_dpp(exp, rng=0)


def test_domain_override_leaves_expansion_untouched(unit_square):
    exp = _uniform_rank_one(unit_square)
    half = Domain.box([0, 0], [1, 0.5])
    sample_projection_dpp(exp, half, rng=1)
    assert exp.window is unit_square


def _orthonormal_polys():
    # 1, sqrt(3)(2x-1), sqrt(3)(2y-1), sqrt(5)(6x^2-6x+1): orthonormal on the unit square
    def f(x):
        u, v = x[:, 0], x[:, 1]
        return np.column_stack([np.ones_like(u), np.sqrt(3) * (2 * u - 1), np.sqrt(3) * (2 * v - 1),
                                np.sqrt(5) * (6 * u * u - 6 * u + 1)]).astype(complex)
    return f


def test_envelope_sampler_exact_rank_and_intensity(unit_square):
    exp = FiniteExpansion(_orthonormal_polys(), 4, 2, window=unit_square, diag_sup=12.0)
    g = np.random.default_rng(5)
    samples = [sample_projection_dpp(exp, rng=g).points for _ in range(1500)]
    assert all(s.shape == (4, 2) for s in samples)
    # expected count in [0, 0.25] x [0, 1] is the integral of K(x, x)
    from heatw2.core import domain_quadrature
    nodes, w = domain_quadrature(Domain.box([0, 0], [0.25, 1]), 32)
    F = exp.features(nodes)
    expected = float(np.dot(w, (np.abs(F) ** 2).sum(axis=1)))
    counts = np.array([(s[:, 0] <= 0.25).sum() for s in samples])
    assert abs(counts.mean() - expected) <= 3 * counts.std(ddof=1) / np.sqrt(counts.size)
    assert counts.var() <= counts.mean()


def _ginibre_disk_count(N, r):
    # int_{|z|<r} K_N(z, z) dA = sum_j P(Gamma(j + 1) <= N r^2)
    return float(special.gammainc(np.arange(1, N + 1), N * r * r).sum())


def test_finite_ginibre_counts():
    N = 16
    exp = RadialExpansion(Potential.ginibre(), N)
    counts, lin = [], []
    for i in range(2000):
        pts = sample_projection_dpp(exp, rng=RngStream(6, i)).points
        assert pts.shape == (N, 2)
        counts.append(int((np.hypot(*pts.T) < 0.5).sum()))
        lin.append(pts[:, 0].sum())
    counts = np.array(counts)
    assert abs(counts.mean() - _ginibre_disk_count(N, 0.5)) <= 3 * counts.std(ddof=1) / np.sqrt(counts.size)
    assert counts.var() <= counts.mean()
    # Var(sum Re z) = 1/2 for every N: the linear statistic only sees the j = 0, 1 modes
    lin = np.array(lin)
    assert abs(lin.var(ddof=1) - 0.5) <= 3 * 0.5 * np.sqrt(2 / lin.size)


def test_projection_replay():
    exp = RadialExpansion(Potential.ginibre(), 32)
    a = sample_projection_dpp(exp, rng=RngStream(7, 1)).points
    b = sample_projection_dpp(exp, rng=RngStream(7, 1)).points
    np.testing.assert_array_equal(a, b)


def test_radial_non_ginibre_uses_envelope():
    pot = Potential.radial(lambda r: r ** 2, lambda r: 2 * r, droplet_radius=1.0)
    exp = RadialExpansion(pot, 12)
    assert not exp.has_diag_sampler
    pts = sample_projection_dpp(exp, rng=8).points
    assert pts.shape == (12, 2)
    assert np.all(np.hypot(*pts.T) <= 1 + 5 / np.sqrt(12))


def test_nystrom_validation(unit_square):
    K = kernel_infinite_ginibre(100)
    with pytest.raises(ValueError):
        nystrom(K, unit_square, grid=16)
    with pytest.raises(ValueError):
        nystrom(K, Domain.disk(), grid=64)


def test_nystrom_too_coarse_reported():
    with pytest.raises(DiscretizationError):
        nystrom(kernel_infinite_ginibre(2000), Domain.box([0, 0], [1, 1]), grid=32, max_grid=32)


@pytest.mark.slow
def test_nystrom_infinite_ginibre_counts():
    window = Domain.box([-0.5, -0.5], [0.5, 0.5])
    K = kernel_infinite_ginibre(100)
    dec = nystrom(K, window, 64)
    assert dec.eigenvalues.max() <= 1 + 1e-6
    assert abs(dec.expected_count - 100 / np.pi) <= 0.02 * 100 / np.pi
    counts = np.array([sample_dpp_nystrom(K, window, 64, RngStream(9, i)).n for i in range(200)])
    assert abs(counts.mean() - 100 / np.pi) <= 3 * counts.std(ddof=1) / np.sqrt(counts.size)
    assert counts.var(ddof=1) < counts.mean()


@pytest.mark.slow
def test_nystrom_bessel_counts():
    window = Domain.box([-0.5, -0.5], [0.5, 0.5])
    K = kernel_bessel(100, 2)
    dec = nystrom(K, window, 64)
    assert abs(dec.trace - 100) <= 1e-6 * 100
    assert abs(dec.expected_count - 100) <= 2.0
    counts = np.array([sample_dpp_nystrom(K, window, 64, RngStream(10, i)).n for i in range(150)])
    assert abs(counts.mean() - dec.expected_count) <= 3 * counts.std(ddof=1) / np.sqrt(counts.size)
    assert counts.var(ddof=1) < counts.mean()


def test_nystrom_bessel_one_dimension():
    window = Domain.box([0.0], [1.0])
    K = kernel_bessel(20, 1)
    dec = nystrom(K, window, 64)
    assert abs(dec.expected_count - 20) <= 0.4
    pts = sample_dpp_nystrom(K, window, 64, RngStream(11, 0))
    assert pts.points.shape[1] == 1 and np.all(window.contains(pts.points))
