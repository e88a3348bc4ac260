"""Hermitian kernels of the determinantal processes and their finite expansions.

Every evaluator carries a background-measure convention: ``"lebesgue"``
(dx) or ``"dA"`` (dxdy / pi, used for the random normal matrix kernels).
``lebesgue_factor`` converts a diagonal value into a density w.r.t. dx.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import special

from ..core import Domain

CONVENTIONS = ("lebesgue", "dA")


def lebesgue_factor(convention: str) -> float:
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    return 1.0 if convention == "lebesgue" else 1.0 / np.pi


def _as_complex(x) -> np.ndarray:
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return x.ravel()
    x = np.atleast_2d(x.astype(float))
    if x.shape[1] != 2:
        raise ValueError("planar kernel expects (n, 2) points")
    return x[:, 0] + 1j * x[:, 1]


class FiniteExpansion:
    """Rank-n orthonormal family {f_j}; K(x, y) = sum_j f_j(x) conj(f_j(y)).

    Subclasses (or instances built with callables) provide ``features``.
    A projection sampler needs a way to propose points: either
    ``sample_diag`` (exact draws from K(x, x)/n) or a ``window`` containing
    the support together with ``diag_sup >= sup K(x, x)``.
    """

    def __init__(self, features: Callable[[np.ndarray], np.ndarray], rank: int, dim: int,
                 convention: str = "lebesgue", sample_diag=None, window: Optional[Domain] = None,
                 diag_sup: Optional[float] = None):
        self._features = features
        self.rank = int(rank)
        self.dim = int(dim)
        self.convention = convention
        self._sample_diag = sample_diag
        self.window = window
        self.diag_sup = diag_sup
        lebesgue_factor(convention)

    def features(self, x: np.ndarray) -> np.ndarray:
        return self._features(np.atleast_2d(np.asarray(x, dtype=float)))

    @property
    def has_diag_sampler(self) -> bool:
        return self._sample_diag is not None

    def sample_diag(self, rng, size: int) -> np.ndarray:
        return self._sample_diag(rng, size)

    def kernel(self) -> "KernelEvaluator":
        return ExpansionKernel(self)


class KernelEvaluator:
    """Base class: subclasses implement ``matrix`` and ``diag``."""

    convention = "lebesgue"
    dim = 2
    expansion: Optional[FiniteExpansion] = None
    is_complex = False

    def matrix(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def diag(self, x) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x, y):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        out = np.array([self.matrix(a[None], b[None])[0, 0] for a, b in zip(x, y)])
        return out

    def intensity(self, x) -> np.ndarray:
        """First intensity as a density w.r.t. dx."""
        return self.diag(x) * lebesgue_factor(self.convention)

    def cache_key(self):
        return (type(self).__name__, id(self))


class ExpansionKernel(KernelEvaluator):
    def __init__(self, expansion: FiniteExpansion):
        self.expansion = expansion
        self.convention = expansion.convention
        self.dim = expansion.dim
        self.is_complex = True

    def matrix(self, x, y):
        fx = self.expansion.features(x)
        fy = self.expansion.features(y)
        return fx @ fy.conj().T

    def diag(self, x):
        f = self.expansion.features(x)
        return np.einsum("ij,ij->i", f, f.conj()).real

    def __call__(self, x, y):
        fx = self.expansion.features(x)
        fy = self.expansion.features(y)
        return np.einsum("ij,ij->i", fx, fy.conj())


@dataclass(frozen=True)
class InfiniteGinibreKernel(KernelEvaluator):
    """K_L(z, w) = (L/pi) exp(-L (|z|^2 + |w|^2 - 2 z conj(w)) / 2) on C with dx background."""

    L: float

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("L must be positive")

    convention = "lebesgue"
    dim = 2
    is_complex = True

    def matrix(self, x, y):
        return self._eval(_as_complex(x)[:, None], _as_complex(y)[None, :])

    def _eval(self, z, w):
        # |z|^2 + |w|^2 - 2 z conj(w) = |z - w|^2 - 2i Im(z conj(w)): no cancellation far from the origin
        L = self.L
        return (L / np.pi) * np.exp(-0.5 * L * np.abs(z - w) ** 2 + 1j * L * (z * w.conj()).imag)

    def __call__(self, x, y):
        return self._eval(_as_complex(x), _as_complex(y))

    def diag(self, x):
        return np.full(len(_as_complex(x)), self.L / np.pi)

    def cache_key(self):
        return ("ginibre_infinite", float(self.L))

    def series_degree(self, radius: float, tol: float = 1e-16) -> int:
        """Number of series terms J with relative diagonal tail below ``tol`` on |z| <= radius."""
        x = self.L * radius * radius
        J = int(x + 1)
        while special.pdtrc(J - 1, x) > tol:
            J += max(1, int(np.sqrt(x + 1)))
        return J

    def series_features(self, x, J: int) -> np.ndarray:
        """f_j(z) = sqrt(L/pi) (sqrt(L) z)^j / sqrt(j!) e^{-L|z|^2/2}, j < J, so K = sum_j f_j(z) conj(f_j(w))."""
        z = _as_complex(x)
        j = np.arange(J)
        r = np.abs(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            logr = np.where(r > 0, np.log(np.where(r > 0, r, 1.0)), -np.inf)
            powers = np.where(j[None, :] == 0, 0.0, j[None, :] * (0.5 * np.log(self.L) + logr[:, None]))
        log_mod = powers - 0.5 * special.gammaln(j + 1)[None, :] - 0.5 * self.L * (r * r)[:, None]
        phase = np.exp(1j * np.outer(np.angle(z), j))
        return np.sqrt(self.L / np.pi) * np.exp(log_mod) * phase


def kernel_infinite_ginibre(L: float) -> InfiniteGinibreKernel:
    return InfiniteGinibreKernel(float(L))


def _bessel_profile(u: np.ndarray, d: int) -> np.ndarray:
    """2^{d/2} Gamma(d/2 + 1) J_{d/2}(u) / u^{d/2}, equal to 1 at u = 0."""
    nu = d / 2
    u = np.asarray(u, dtype=float)
    out = np.ones_like(u)
    small = u < 1e-4
    big = ~small
    ub = u[big]
    if d == 2:
        out[big] = 2 * special.j1(ub) / ub
    elif d % 2 == 1:
        # J_{n+1/2}(u) = sqrt(2u/pi) j_n(u); the dedicated routines are much faster than jv
        n = (d - 1) // 2
        out[big] = 2 ** nu * special.gamma(nu + 1) * np.sqrt(2 / np.pi) * special.spherical_jn(n, ub) / ub ** n
    else:
        out[big] = 2 ** nu * special.gamma(nu + 1) * special.jv(nu, ub) / ub ** nu
    # J_nu(u) (u/2)^{-nu} Gamma(nu+1) = 1 - u^2 / (4 (nu + 1)) + O(u^4)
    us = u[small]
    out[small] = 1 - us ** 2 / (4 * (nu + 1)) + us ** 4 / (32 * (nu + 1) * (nu + 2))
    return out


@dataclass(frozen=True)
class BesselKernel(KernelEvaluator):
    """Sine-type kernel on R^d with first intensity L.

    K(x, y) = L * 2^{d/2} Gamma(d/2+1) J_{d/2}(a r) / (a r)^{d/2}, r = |x - y|,
    with a = 2 pi (L / omega_d)^{1/d} so that the Fourier transform is the
    indicator of a ball of volume L (a projection kernel).  In d = 1 this is
    sin(pi L r) / (pi r).
    """

    L: float
    d: int = 2

    def __post_init__(self):
        if self.L <= 0 or self.d < 1:
            raise ValueError("need L > 0 and d >= 1")

    convention = "lebesgue"
    is_complex = False

    @property
    def dim(self):
        return self.d

    @property
    def frequency(self) -> float:
        ball = np.pi ** (self.d / 2) / special.gamma(self.d / 2 + 1)
        return 2 * np.pi * (self.L / ball) ** (1.0 / self.d)

    def _r(self, x, y, pairwise):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if pairwise:
            d2 = np.zeros((len(x), len(y)))
            for i in range(self.d):
                d2 += (x[:, i:i + 1] - y[None, :, i]) ** 2
            return np.sqrt(d2)
        return np.sqrt(((x - y) ** 2).sum(axis=1))

    def matrix(self, x, y):
        return self.L * _bessel_profile(self.frequency * self._r(x, y, True), self.d)

    def __call__(self, x, y):
        return self.L * _bessel_profile(self.frequency * self._r(x, y, False), self.d)

    def diag(self, x):
        return np.full(len(np.atleast_2d(x)), float(self.L))

    def cache_key(self):
        return ("bessel", float(self.L), int(self.d))


def kernel_bessel(L: float, d: int = 2) -> BesselKernel:
    return BesselKernel(float(L), int(d))
