"""Zeros of the planar Gaussian analytic function sum_n a_n sqrt(L^n / n!) z^n."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from ..core import Domain, PointConfiguration, as_generator


class RootFindingError(RuntimeError):
    pass


def _log_weights(L: float, M: int) -> np.ndarray:
    """log sqrt(L^n / n!) for n = 0..M."""
    n = np.arange(M + 1)
    return 0.5 * (n * np.log(L) - special.gammaln(n + 1))


def truncation_degree(L: float, radius: float, tol: float = 1e-24) -> int:
    """Smallest M whose discarded variance mass at |z| = radius is below ``tol`` times the retained mass."""
    x = L * radius * radius
    # terms x^n/n! in log space, summed until the tail is negligible
    n_max = int(x + 40 * np.sqrt(x + 1) + 200)
    n = np.arange(n_max + 1)
    logt = n * np.log(x) - special.gammaln(n + 1) if x > 0 else np.where(n == 0, 0.0, -np.inf)
    total = special.logsumexp(logt)
    tail = np.empty_like(logt)
    # tail[m] = log sum_{n > m} t_n
    rev = np.logaddexp.accumulate(logt[::-1])[::-1]
    tail[:-1] = rev[1:]
    tail[-1] = -np.inf
    ok = np.flatnonzero(tail - total <= np.log(tol))
    return int(max(ok[0], 1))


@dataclass(frozen=True)
class GafSpec:
    """Intensity L, truncation degree M and the observation window.

    When ``M`` is omitted it is chosen from the tail-variance criterion on
    the window, which is sampled after centring at the origin (the zero
    set is translation invariant in law).
    """

    L: float
    window: Domain
    M: Optional[int] = None
    tol: float = 1e-24

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("L must be positive")
        if self.window.dim != 2:
            raise ValueError("GAF zeros live in the plane")
        if self.M is None:
            object.__setattr__(self, "M", truncation_degree(self.L, self.radius, self.tol))
        ratio = self.tail_ratio()
        if ratio > 1e-12:
            raise ValueError(f"truncation degree {self.M} leaves relative tail {ratio:.2e} > 1e-12")

    @property
    def center(self) -> np.ndarray:
        box = self.window.bounding_box()
        return 0.5 * (box.lo + box.hi)

    @property
    def radius(self) -> float:
        return 0.5 * self.window.diameter()

    def tail_ratio(self) -> float:
        x = self.L * self.radius ** 2
        n = np.arange(self.M + 1 + 4 * int(x + 50))
        logt = n * np.log(x) - special.gammaln(n + 1)
        head = special.logsumexp(logt[: self.M + 1])
        tail = special.logsumexp(logt[self.M + 1:])
        return float(np.exp(tail - head))


def evaluate_series(coeffs: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """f(z) and f'(z) for f = sum_n coeffs[n] z^n, by Horner."""
    z = np.asarray(z, dtype=complex)
    f = np.zeros_like(z)
    df = np.zeros_like(z)
    for c in coeffs[::-1]:
        df = df * z + f
        f = f * z + c
    return f, df


def zeros_from_coefficients(coeffs: np.ndarray, scale: float = 1.0, newton_steps: int = 2) -> np.ndarray:
    """All roots of sum_n coeffs[n] z^n, polished by Newton steps on the series.

    Roots come from companion-matrix eigenvalues of the polynomial in the
    rescaled variable w = z / scale, which keeps the coefficients of roots
    near |z| <= scale from overflowing.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    nz = np.flatnonzero(coeffs != 0)
    if nz.size == 0:
        raise RootFindingError("zero polynomial")
    coeffs = coeffs[: nz[-1] + 1]
    if coeffs.size == 1:
        return np.zeros(0, dtype=complex)
    w_coeffs = coeffs * scale ** np.arange(coeffs.size)
    w_coeffs = w_coeffs / np.max(np.abs(w_coeffs))
    roots = np.roots(w_coeffs[::-1]) * scale
    if not np.all(np.isfinite(roots)):
        raise RootFindingError("companion eigenvalues did not converge")
    for _ in range(newton_steps):
        f, df = evaluate_series(coeffs, roots)
        step = np.where(df != 0, f / np.where(df != 0, df, 1), 0)
        roots = roots - step
    return roots


def sample_gaf_zeros(spec: GafSpec, rng, return_coefficients: bool = False):
    """Zeros of the truncated GAF inside ``spec.window``."""
    g = as_generator(rng)
    M = spec.M
    a = (g.standard_normal(M + 1) + 1j * g.standard_normal(M + 1)) / np.sqrt(2)
    roots = _zeros_in_window(spec, a)
    out = PointConfiguration(roots, d=2)
    return (out, a) if return_coefficients else out


def _patch_grid(spec: GafSpec):
    """Square patches covering the centred window; each is solved on a circle around it."""
    box = spec.window.bounding_box()
    half = 0.5 * (box.hi - box.lo)
    # local dynamic range L rho^2 / 2 stays below 12 on a circle of radius rho
    rho_max = np.sqrt(24.0 / spec.L)
    side = rho_max / (1.3 * np.sqrt(2))
    counts = np.maximum(np.ceil(2 * half / side).astype(int), 1)
    edges = [np.linspace(-h, h, c + 1) for h, c in zip(half, counts)]
    return edges


def _zeros_in_window(spec: GafSpec, a: np.ndarray, fft_points: int = 128) -> np.ndarray:
    M = a.size - 1
    L = spec.L
    coeffs = a * np.exp(_log_weights(L, M))
    ex, ey = _patch_grid(spec)
    cx, cy = np.meshgrid(0.5 * (ex[1:] + ex[:-1]), 0.5 * (ey[1:] + ey[:-1]), indexing="ij")
    centers = (cx + 1j * cy).ravel()
    hs = 0.5 * max(np.diff(ex).max(), np.diff(ey).max())
    rho = 1.3 * np.sqrt(2) * hs
    u = rho * np.exp(2j * np.pi * np.arange(fft_points) / fft_points)
    f, _ = evaluate_series(coeffs, centers[:, None] + u[None, :])
    # h(u) = f(c + u) exp(-L conj(c) u - L |c|^2 / 2) has the same zeros and a flat scale
    h = f * np.exp(-L * np.conj(centers)[:, None] * u[None, :] - 0.5 * L * np.abs(centers)[:, None] ** 2)
    taylor = np.fft.fft(h, axis=1) / fft_points  # coefficients in v = u / rho
    cand, owner = [], []
    for p, c in enumerate(centers):
        t = taylor[p]
        t = t[: np.flatnonzero(np.abs(t) > 1e-14 * np.abs(t).max())[-1] + 1]
        v = zeros_from_coefficients(t, newton_steps=0)
        v = v[np.abs(v) < 1.0]
        z = c + rho * v
        z = z[np.abs(z - c) <= 1.2 * np.sqrt(2) * hs]
        cand.append(z)
        owner.append(np.full(z.size, p))
    z = np.concatenate(cand)
    owner = np.concatenate(owner)
    for _ in range(2):
        f, df = evaluate_series(coeffs, z)
        z = z - np.where(df != 0, f / np.where(df != 0, df, 1), 0)
    # each root is kept only by the patch that contains its polished position
    ix = np.clip(np.searchsorted(ex, z.real, side="right") - 1, 0, len(ex) - 2)
    iy = np.clip(np.searchsorted(ey, z.imag, side="right") - 1, 0, len(ey) - 2)
    z = z[ix * (len(ey) - 1) + iy == owner]
    f, _ = evaluate_series(coeffs, z)
    # residual relative to the local scale sqrt(sum L^n |z|^{2n} / n!) = exp(L |z|^2 / 2)
    bad = np.abs(f) > 1e-8 * np.exp(0.5 * L * np.abs(z) ** 2)
    if np.any(bad):
        raise RootFindingError(f"{int(bad.sum())} roots failed the residual check")
    pts = np.column_stack([z.real, z.imag]) + spec.center
    return pts[spec.window.contains(pts)]
