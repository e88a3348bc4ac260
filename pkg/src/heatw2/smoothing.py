"""Certified heat-smoothing upper bound on W2 and its optimisation over t.

For probability measures mu, nu on a box with nu >= c dx,

    W2(mu, nu) <= C1 sqrt(d t) + (2 / sqrt(c)) sqrt(S(t) + tail(t)),

where C1 = mu(box)^{1/2} + (nu(box) - c |box|)^{1/2},
S(t) = sum_{0 < lambda_k <= Lambda} e^{-lambda_k t} |mu_k - nu_k|^2 / lambda_k
over the retained modes, and tail(t) bounds the same sum over the
discarded modes using |mu_k - nu_k| <= sup|phi_k| (mu(box) + nu(box)).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .spectral import NeumannBasis, SpectralCoefficients, coefficients, tail_certificate

_GOLDEN = (math.sqrt(5) - 1) / 2


class MassMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class SmoothingBoundReport:
    t: float
    series: float
    tail: float
    C1: float
    c: float
    bound: float
    lambda_max: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _coefficient_weight(basis: NeumannBasis, mu: SpectralCoefficients, nu: SpectralCoefficients):
    """Bound on |mu_k - nu_k|^2 on each support pattern of k (nonzero axes)."""
    vol = basis.domain.area()
    # nu_k = 0 for k != 0 when nu is uniform on the box; only mu contributes
    zero_mu = mu.source is not None and mu.source[0] == "uniform"
    zero_nu = nu.source is not None and nu.source[0] == "uniform"
    if zero_mu and zero_nu:
        spread = 0.0
    elif zero_nu:
        spread = mu.mass
    elif zero_mu:
        spread = nu.mass
    else:
        spread = mu.mass + nu.mass

    def weight(axes):
        # sup |phi_k| = sqrt(2^{#axes} / |box|)
        return spread * spread * 2.0 ** len(axes) / vol

    return weight


def _check_pair(mu: SpectralCoefficients, nu: SpectralCoefficients, c: float) -> None:
    if mu.basis is not nu.basis and not (
            mu.basis.domain == nu.basis.domain and mu.basis.truncation == nu.basis.truncation
            and mu.basis.size == nu.basis.size):
        raise ValueError("coefficients live on different bases")
    if abs(mu.mass - nu.mass) > 1e-9:
        raise MassMismatchError(f"masses differ: {mu.mass!r} vs {nu.mass!r}")
    if not c > 0:
        raise ValueError("c must be positive")


class _Evaluator:
    """Bound as a function of t for a fixed pair; shares the squared differences across t."""

    def __init__(self, mu: SpectralCoefficients, nu: SpectralCoefficients, c: float):
        _check_pair(mu, nu, c)
        basis = mu.basis
        self.basis = basis
        self.c = float(c)
        self.identical = mu.source is not None and mu.source == nu.source
        diff = mu.values - nu.values
        lam = basis.eigenvalues
        pos = lam > 0
        self.lam = lam[pos]
        self.w = (diff[pos] ** 2) / self.lam
        if self.identical:
            self.w = np.zeros_like(self.w)
        vol = basis.domain.area()
        excess = nu.mass - self.c * vol
        if excess < -1e-12:
            raise ValueError(f"c = {c} exceeds the mass of nu per unit volume")
        self.C1 = math.sqrt(mu.mass) + math.sqrt(max(excess, 0.0))
        self.weight = _coefficient_weight(basis, mu, nu)
        self.dim = basis.dim

    def series(self, t: float) -> float:
        return float(np.sum(self.w * np.exp(-self.lam * t)))

    def tail(self, t: float) -> float:
        if self.identical:
            return 0.0
        return tail_certificate(self.basis, t, raise_if_large=False, support_weight=self.weight)

    def report(self, t: float) -> SmoothingBoundReport:
        if not t > 0:
            raise ValueError("t must be positive")
        s = self.series(t)
        tl = self.tail(t)
        bound = self.C1 * math.sqrt(self.dim * t) + 2.0 / math.sqrt(self.c) * math.sqrt(s + tl)
        return SmoothingBoundReport(float(t), s, tl, self.C1, self.c, float(bound), self.basis.truncation)


def smoothing_bound(mu: SpectralCoefficients, nu: SpectralCoefficients, t: float, c: float) -> SmoothingBoundReport:
    """Certified upper bound on W2(mu, nu) at smoothing time t, with density floor c for nu."""
    return _Evaluator(mu, nu, c).report(t)


def optimize_t(mu: SpectralCoefficients, nu: SpectralCoefficients, c: float, t_range,
               grid: int = 64, rtol: float = 1e-3):
    """Minimise the bound over t: logarithmic grid, then golden section in log t around the best node."""
    t_lo, t_hi = map(float, t_range)
    if not 0 < t_lo < t_hi:
        raise ValueError("need 0 < t_lo < t_hi")
    ev = _Evaluator(mu, nu, c)
    ts = np.geomspace(t_lo, t_hi, grid)
    reports = [ev.report(t) for t in ts]
    vals = np.array([r.bound for r in reports])
    if not np.any(np.isfinite(vals)):
        raise ArithmeticError("bound is not finite anywhere on the t range")
    vals = np.where(np.isfinite(vals), vals, np.inf)
    i = int(np.argmin(vals))
    best = reports[i]
    a = math.log(ts[max(i - 1, 0)])
    b = math.log(ts[min(i + 1, grid - 1)])
    cache = {}

    def f(u):
        if u not in cache:
            cache[u] = ev.report(math.exp(u))
        return cache[u]

    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    while math.exp(b - a) - 1 > rtol:
        if f(x1).bound <= f(x2).bound:
            b, x2 = x2, x1
            x1 = b - _GOLDEN * (b - a)
        else:
            a, x1 = x1, x2
            x2 = a + _GOLDEN * (b - a)
    for r in cache.values():
        if r.bound < best.bound:
            best = r
    return best.t, best


def rate_prediction(a: float, b: float, d: int) -> tuple[float, bool]:
    """Exponent gamma = a / (2b + d) of the W2 decay, and whether a sqrt(log) factor appears."""
    if d < 1:
        raise ValueError("dimension must be positive")
    s = b + d / 2
    if s < 1:
        raise ValueError("rate prediction needs b + d/2 >= 1")
    return a / (2 * b + d), bool(math.isclose(s, 1.0))


def certified_bound(mu_measure, nu_measure, domain, c: float, t_range, lambda_max: float | None = None,
                    rel_tail: float = 1e-3, max_doublings: int = 12):
    """optimize_t with the truncation chosen so the tail stays small at the lower end of the range.

    Starting from ``lambda_max`` (or 100 / t_lo), the truncation is doubled
    until the tail certificate at t_lo is at most ``rel_tail`` times the
    retained series there.  The tail is always included in the bound, so a
    coarse truncation only loosens it.
    """
    t_lo = float(t_range[0])
    lam = float(lambda_max) if lambda_max else 100.0 / t_lo
    for attempt in range(max_doublings + 1):
        basis = NeumannBasis(domain, lambda_max=lam)
        mu = coefficients(mu_measure, basis)
        nu = coefficients(nu_measure, basis)
        ev = _Evaluator(mu, nu, c)
        if lambda_max is not None or ev.tail(t_lo) <= rel_tail * ev.series(t_lo) or attempt == max_doublings:
            return optimize_t(mu, nu, c, t_range)
        lam *= 2.0
    raise AssertionError("unreachable")
