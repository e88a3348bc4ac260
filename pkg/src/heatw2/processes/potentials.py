"""Random normal matrix potentials, their kernels and equilibrium measures.

All kernels here use the normalised area dA = dxdy / pi as background, so
K_N(z, z) is close to N * (1/4) Laplacian(Q) in the bulk of the droplet.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize, special

from ..core import Domain, ReferenceMeasure, domain_quadrature
from .kernels import FiniteExpansion, _as_complex


@dataclass(frozen=True, eq=False)
class Potential:
    """Potential Q on the plane.

    kind is one of ``ginibre``, ``elliptic`` (parameter ``tau``), ``radial``
    (``profile(r)``) or ``custom`` (``q(z)`` and ``grad(z)`` given as complex
    functions, grad returning dQ/dx + i dQ/dy).
    """

    kind: str
    tau: float = 0.0
    profile: Optional[Callable] = None
    dprofile: Optional[Callable] = None
    q: Optional[Callable] = None
    grad_fn: Optional[Callable] = None
    laplacian_fn: Optional[Callable] = None
    droplet: Optional[Domain] = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("ginibre", "elliptic", "radial", "custom"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "elliptic" and not 0 <= self.tau < 1:
            raise ValueError("tau must lie in [0, 1)")
        if self.kind == "radial" and self.profile is None:
            raise ValueError("radial potential needs a profile")
        if self.kind == "custom" and self.q is None:
            raise ValueError("custom potential needs q")
        if self.droplet is None:
            if self.kind == "ginibre" or (self.kind == "elliptic" and self.tau == 0):
                object.__setattr__(self, "droplet", Domain.disk())
            elif self.kind == "elliptic":
                object.__setattr__(self, "droplet", Domain.ellipse(semi_axes=(1 + self.tau, 1 - self.tau)))
        self.check_growth()

    @classmethod
    def ginibre(cls) -> "Potential":
        return cls("ginibre", name="ginibre")

    @classmethod
    def elliptic(cls, tau: float) -> "Potential":
        return cls("elliptic", tau=float(tau), name=f"elliptic(tau={tau})")

    @classmethod
    def radial(cls, profile, dprofile=None, droplet_radius: Optional[float] = None, name="radial") -> "Potential":
        drop = Domain.disk(radius=droplet_radius) if droplet_radius else None
        return cls("radial", profile=profile, dprofile=dprofile, droplet=drop, name=name)

    @property
    def is_radial(self) -> bool:
        return self.kind in ("ginibre", "radial") or (self.kind == "elliptic" and self.tau == 0)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.kind == "ginibre":
            return np.abs(z) ** 2
        if self.kind == "elliptic":
            t = self.tau
            return (np.abs(z) ** 2 - t * (z * z).real) / (1 - t * t)
        if self.kind == "radial":
            return self.profile(np.abs(z))
        return np.asarray(self.q(z), dtype=float)

    def radial_profile(self, r) -> np.ndarray:
        if not self.is_radial:
            raise ValueError("potential is not radial")
        return self(np.asarray(r, dtype=float) + 0j)

    def grad(self, z) -> np.ndarray:
        """dQ/dx + i dQ/dy."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "ginibre":
            return 2 * z
        if self.kind == "elliptic":
            t = self.tau
            return 2 * z.real / (1 + t) + 2j * z.imag / (1 - t)
        if self.kind == "radial":
            r = np.abs(z)
            dq = self.dprofile(r) if self.dprofile else _central_diff(self.profile, r)
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(r > 0, dq * z / np.where(r > 0, r, 1), 0)
        if self.grad_fn is None:
            raise ValueError("custom potential has no gradient")
        return np.asarray(self.grad_fn(z), dtype=complex)

    def laplacian(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.kind == "ginibre":
            return np.full(z.shape, 4.0)
        if self.kind == "elliptic":
            return np.full(z.shape, 4.0 / (1 - self.tau ** 2))
        if self.laplacian_fn is not None:
            return np.asarray(self.laplacian_fn(z), dtype=float)
        if self.kind == "radial":
            r = np.maximum(np.abs(z), 1e-6)
            dq = self.dprofile if self.dprofile else (lambda s: _central_diff(self.profile, s))
            return _central_diff(dq, r) + dq(r) / r
        h = 1e-4
        return (self(z + h) + self(z - h) + self(z + 1j * h) + self(z - 1j * h) - 4 * self(z)) / h ** 2

    def check_growth(self) -> None:
        """Q(z) / log|z|^2 > 1 at |z| in {1e2, 1e3, 1e4} along several directions."""
        th = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        for R in (1e2, 1e3, 1e4):
            z = R * np.exp(1j * th)
            ratio = self(z) / np.log(R * R)
            if np.any(~(ratio > 1)):
                raise ValueError(f"potential fails the growth condition at |z| = {R:g}")

    def cache_key(self):
        if self.kind in ("ginibre", "elliptic"):
            return (self.kind, self.tau)
        return (self.kind, id(self))


def _central_diff(f, r, h=1e-5):
    return (f(r + h) - f(r - h)) / (2 * h)


# -- radial kernel ----------------------------------------------------------

def _log_moment(potential: Potential, N: int, j: int) -> float:
    """log h_j, h_j = int_0^inf r^{2j} e^{-N Q(r)} 2 r dr (the dA norm of z^j)."""
    def g(r):
        return np.log(2.0) + (2 * j + 1) * np.log(r) - N * potential.radial_profile(r)

    res = optimize.minimize_scalar(lambda s: -g(np.exp(s)), bracket=(-3.0, 0.0), tol=1e-12)
    rstar = float(np.exp(res.x))
    gstar = float(g(rstar))

    def f(r):
        return np.exp(g(r) - gstar) if r > 0 else 0.0

    width = 1.0 / np.sqrt(N)
    pieces = [0.0, max(rstar - 8 * width, 0.0), rstar, rstar + 8 * width]
    total = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        if b > a:
            total += integrate.quad(f, a, b, epsabs=0, epsrel=1e-13, limit=200)[0]
    total += integrate.quad(f, pieces[-1], np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]
    return gstar + float(np.log(total))


@lru_cache(maxsize=64)
def _log_moments(key, potential: Potential, N: int) -> np.ndarray:
    return np.array([_log_moment(potential, N, j) for j in range(N)])


def radial_log_norms(potential: Potential, N: int) -> np.ndarray:
    if not potential.is_radial:
        raise ValueError("monomial orthogonal polynomials need a radial potential")
    return _log_moments(potential.cache_key(), potential, int(N))


def ginibre_log_norms(N: int) -> np.ndarray:
    """Closed form log h_j = log j! - (j + 1) log N for Q = |z|^2."""
    j = np.arange(N)
    return special.gammaln(j + 1) - (j + 1) * np.log(N)


class RadialExpansion(FiniteExpansion):
    """f_j(z) = z^j e^{-N Q(z)/2} / sqrt(h_j), j < N, orthonormal in L^2(dA)."""

    def __init__(self, potential: Potential, N: int):
        self.potential = potential
        self.N = int(N)
        self.log_h = radial_log_norms(potential, self.N)
        window, sup = None, None
        sampler = self._ginibre_diag if potential.kind == "ginibre" else None
        if sampler is None:
            R = self._droplet_radius() + 5.0 / np.sqrt(N)
            window = Domain.disk(radius=R)
            r = np.linspace(0, R, 2001)
            sup = 1.05 * float(self.diag_values(r + 0j).max())
        super().__init__(self._features, self.N, 2, "dA", sampler, window, sup)

    def _droplet_radius(self) -> float:
        d = self.potential.droplet
        if d is None:
            raise ValueError("radial potential without droplet radius cannot be sampled")
        return float(np.max(d.axes) + np.linalg.norm(d.center))

    def _droplet_radius_or_inf(self) -> float:
        return np.inf if self.potential.droplet is None else self._droplet_radius()

    def log_abs(self, r: np.ndarray) -> np.ndarray:
        """log |f_j| on radii r, shape (len(r), N)."""
        r = np.asarray(r, dtype=float)
        j = np.arange(self.N)
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.log(r)[:, None]
            powers = np.where(j[None, :] == 0, 0.0, j[None, :] * lr)
        base = -0.5 * self.N * self.potential.radial_profile(r)[:, None] - 0.5 * self.log_h[None, :]
        out = powers + base
        return out

    def _features(self, x: np.ndarray) -> np.ndarray:
        z = _as_complex(x)
        la = self.log_abs(np.abs(z))
        phase = np.exp(1j * np.outer(np.angle(z), np.arange(self.N)))
        return np.exp(la) * phase

    def diag_values(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return np.exp(2 * self.log_abs(np.abs(z))).sum(axis=1)

    def _ginibre_diag(self, rng, size: int) -> np.ndarray:
        # K(z,z)/N dA is the uniform mixture of |f_j|^2 dA, and N |z|^2 ~ Gamma(j + 1) under |f_j|^2
        j = rng.integers(0, self.N, size)
        r = np.sqrt(rng.gamma(j + 1.0) / self.N)
        th = rng.random(size) * 2 * np.pi
        return np.column_stack([r * np.cos(th), r * np.sin(th)])


def kernel_rnm_radial(potential: Potential, N: int):
    """Kernel K_N(z, w) = sum_{j<N} f_j(z) conj(f_j(w)) for a radial potential (dA background)."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return RadialExpansion(potential, N).kernel()


def equilibrium_measure(potential: Potential) -> ReferenceMeasure:
    """(1/4) Laplacian(Q) on the droplet, returned as a density w.r.t. dx.

    Relative to dA = dxdy/pi the density is (1/4) Laplacian(Q); relative to dx it is that over pi.
    """
    S = potential.droplet
    if S is None:
        raise ValueError("droplet unknown for this potential")
    if potential.kind in ("ginibre", "elliptic"):
        ref = ReferenceMeasure.uniform(S, label=f"equilibrium-{potential.name or potential.kind}")
        return ref
    nodes, w = domain_quadrature(S, 96)
    vals = potential.laplacian(nodes[:, 0] + 1j * nodes[:, 1]) / (4 * np.pi)
    mass = float(np.dot(w, vals))
    if abs(mass - 1.0) > 1e-6:
        raise ValueError(f"droplet mass of Laplacian(Q)/4 is {mass:.9f}, not 1")
    lower = float(vals.min()) / mass

    def density(x, _p=potential, _m=mass):
        x = np.atleast_2d(x)
        return _p.laplacian(x[:, 0] + 1j * x[:, 1]) / (4 * np.pi * _m)

    return ReferenceMeasure(S, density, lower * (1 - 1e-9), kind="density",
                            label=f"equilibrium-{potential.name or potential.kind}")


def bulk_edge_deviation(potential: Potential, N: int, radii) -> list[tuple[float, float]]:
    """Profile of |K_N(z, z) - (N/4) Laplacian(Q)(z)| along the positive real axis."""
    exp = RadialExpansion(potential, N)
    r = np.asarray(radii, dtype=float)
    K = exp.diag_values(r + 0j)
    target = 0.25 * N * potential.laplacian(r + 0j) * (r <= exp._droplet_radius_or_inf())
    return [(float(a), float(abs(k - t))) for a, k, t in zip(r, K, target)]

