"""Poisson, projection-DPP and Nystrom-discretised DPP samplers."""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..core import Domain, PointConfiguration, as_generator, gauss_legendre
from .kernels import FiniteExpansion, KernelEvaluator, lebesgue_factor


class EnvelopeError(RuntimeError):
    """The rejection envelope was exceeded: the proposal does not dominate the target."""


class DiscretizationError(RuntimeError):
    pass


def sample_poisson(intensity: float, domain: Domain, rng) -> PointConfiguration:
    if intensity <= 0:
        raise ValueError("intensity must be positive")
    g = as_generator(rng)
    n = int(g.poisson(intensity * domain.area()))
    return PointConfiguration(domain.sample_uniform(g, n), d=domain.dim)


class _Proposer:
    def __init__(self, expansion: FiniteExpansion, rng):
        self.exp = expansion
        self.rng = rng
        if expansion.has_diag_sampler:
            self.mode = "diag"
            self.rate = float(expansion.rank)
        else:
            if expansion.window is None or expansion.diag_sup is None:
                raise ValueError("expansion needs sample_diag or (window, diag_sup)")
            self.mode = "envelope"
            self.sup = float(expansion.diag_sup)
            self.rate = self.sup * expansion.window.area() * lebesgue_factor(expansion.convention)

    def draw(self, m: int):
        if self.mode == "diag":
            X = self.exp.sample_diag(self.rng, m)
        else:
            X = self.exp.window.sample_uniform(self.rng, m)
        F = self.exp.features(X)
        k = np.einsum("ij,ij->i", F, F.conj()).real
        if self.mode == "envelope" and np.any(k > self.sup * (1 + 1e-9)):
            raise EnvelopeError(f"K(x,x) = {k.max():.6g} exceeds the envelope {self.sup:.6g}")
        denom = k if self.mode == "diag" else np.full(m, self.sup)
        return X, F, k, denom


def sample_projection_dpp(kernel, domain: Domain | None = None, rng=None,
                          max_batch: int = 4096) -> PointConfiguration:
    """Exact sequential sampler for the projection DPP with a finite-rank kernel.

    ``kernel`` is a FiniteExpansion or an evaluator carrying one; ``domain``
    overrides the proposal window when the expansion has no exact diagonal
    sampler.


    Step i draws from the conditional intensity K_i(x, x) / (n - i), where
    K_i is the projection onto the part of the span orthogonal to the
    feature vectors of the points already drawn.  Draws are by rejection:
    candidates come from K(x, x)/n when the expansion can sample it exactly,
    otherwise uniformly from its window under the envelope ``diag_sup``.

    The first half of the run tracks an orthonormal basis of the spent
    directions; the second half switches to a basis of the remaining
    subspace, whichever is smaller.
    """
    expansion = kernel if isinstance(kernel, FiniteExpansion) else kernel.expansion
    if expansion is None:
        raise ValueError("projection sampling needs an explicit finite expansion")
    if domain is not None and not expansion.has_diag_sampler:
        expansion = copy.copy(expansion)
        expansion.window = domain
    g = as_generator(rng)
    n = expansion.rank
    prop = _Proposer(expansion, g)
    E = np.zeros((n, n), dtype=complex)
    pts = np.empty((n, expansion.dim))
    U = None
    switch = n // 2
    for i in range(n):
        r = n - i
        if i == switch and r > 0:
            # complement of the first i directions
            Q, _ = np.linalg.qr(E[:, :i], mode="complete") if i > 0 else (np.eye(n, dtype=complex), None)
            U = np.ascontiguousarray(Q[:, i:])
        while True:
            m = int(min(max_batch, np.ceil(1.5 * prop.rate / r) + 4))
            X, F, k, denom = prop.draw(m)
            if U is None:
                c = F @ E[:, :i].conj()
                res = k - np.einsum("ij,ij->i", c, c.conj()).real
            else:
                c = F @ U.conj()
                res = np.einsum("ij,ij->i", c, c.conj()).real
            acc = g.random(m) * denom < np.clip(res, 0.0, None)
            if acc.any():
                a = int(np.argmax(acc))
                break
        pts[i] = X[a]
        if U is None:
            v = F[a].astype(complex)
            for _ in range(2):
                v -= E[:, :i] @ (E[:, :i].conj().T @ v)
            E[:, i] = v / np.linalg.norm(v)
        elif r > 1:
            # reflect c[a] onto e_1, then drop the first complement column
            cv = c[a] / np.linalg.norm(c[a])
            alpha = -np.exp(1j * np.angle(cv[0])) if cv[0] != 0 else -1.0
            v = cv.copy()
            v[0] -= alpha
            v /= np.linalg.norm(v)
            U = U - 2.0 * np.outer(U @ v, v.conj())
            U = np.ascontiguousarray(U[:, 1:])
    return PointConfiguration(pts, d=expansion.dim)


# -- Nystrom ----------------------------------------------------------------

@dataclass
class NystromDecomposition:
    kernel: KernelEvaluator
    window: Domain
    nodes: np.ndarray
    sqrt_w: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, in the sqrt-weighted grid basis
    trace: float

    @property
    def expected_count(self) -> float:
        return float(np.clip(self.eigenvalues, 0, 1).sum())

    def expansion(self, select: np.ndarray) -> FiniteExpansion:
        """Projection expansion on the eigenfunctions ``select`` (Nystrom extended)."""
        lam = self.eigenvalues[select]
        B = (self.sqrt_w[:, None] * self.eigenvectors[:, select]) / lam[None, :]
        kern, nodes = self.kernel, self.nodes
        if not kern.is_complex:
            B = B.real
        if hasattr(kern, "series_features"):
            # K(x, x_p) = sum_j f_j(x) conj(f_j(x_p)): fold the node sum into J coefficients
            radius = float(np.linalg.norm(np.maximum(np.abs(self.window.lo), np.abs(self.window.hi))))
            J = kern.series_degree(radius)
            C = kern.series_features(nodes, J).conj().T @ B

            def features(X, _C=C, _J=J):
                return kern.series_features(X, _J) @ _C
        else:
            def features(X, _B=B):
                return kern.matrix(X, nodes) @ _B

        grid_vals = np.abs(self.eigenvectors[:, select]) ** 2 / self.sqrt_w[:, None] ** 2
        sup = 1.5 * float(grid_vals.sum(axis=1).max()) if len(lam) else 1.0
        return FiniteExpansion(features, len(lam), self.window.dim, kern.convention,
                               window=self.window, diag_sup=sup)


_NYSTROM_CACHE: dict = {}


def nystrom(kernel: KernelEvaluator, window: Domain, grid: int = 64, tol: float = 1e-6,
            max_grid: int = 96, step: int = 8) -> NystromDecomposition:
    """Nystrom eigendecomposition, refining the grid by ``step`` up to ``max_grid`` until it is valid.

    Valid means every eigenvalue lies in [-tol, 1 + tol] and the retained
    eigenvalues sum to within 2% of the kernel trace over the window.
    """
    g = int(grid)
    while True:
        try:
            return _nystrom_fixed(kernel, window, g, tol)
        except DiscretizationError:
            if g + step > max_grid:
                raise
            g += step


def _nystrom_fixed(kernel: KernelEvaluator, window: Domain, grid: int, tol: float) -> NystromDecomposition:
    """Eigendecomposition of the kernel restricted to a box, by Gauss-Legendre Nystrom.

    The operator is discretised as W^{1/2} K W^{1/2} on a tensor grid; its
    eigenvalues must lie in [-tol, 1 + tol] (restricted projections have
    spectrum in [0, 1]), otherwise the grid is too coarse.
    """
    if window.kind != "box":
        raise ValueError("Nystrom sampling is implemented on boxes")
    if grid < 32:
        raise ValueError("grid must have at least 32 nodes per axis")
    if kernel.convention != "lebesgue":
        raise ValueError("Nystrom sampling expects a Lebesgue-background kernel")
    key = (kernel.cache_key(), window, int(grid))
    if key in _NYSTROM_CACHE:
        if isinstance(_NYSTROM_CACHE[key], DiscretizationError):
            raise _NYSTROM_CACHE[key]
        return _NYSTROM_CACHE[key]
    rules = [gauss_legendre(grid, a, b) for a, b in zip(window.lo, window.hi)]
    mesh = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wmesh = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    nodes = np.column_stack([m.ravel() for m in mesh])
    w = np.prod(np.column_stack([m.ravel() for m in wmesh]), axis=1)
    sw = np.sqrt(w)
    A = kernel.matrix(nodes, nodes) * lebesgue_factor(kernel.convention)
    A *= sw[:, None]
    A *= sw[None, :]
    trace = float(np.real(np.trace(A)))
    lam, vec = linalg.eigh(A, subset_by_value=(1e-10, np.inf), overwrite_a=True, check_finite=False)
    del A
    if lam.size and (lam.max() > 1 + tol):
        err = DiscretizationError(f"Nystrom eigenvalue {lam.max():.9f} outside [0, 1] at grid {grid}")
        _NYSTROM_CACHE[key] = err
        raise err
    if abs(lam.sum() - trace) > 0.02 * trace:
        err = DiscretizationError(f"retained eigenvalues sum to {lam.sum():.6g}, trace {trace:.6g}")
        _NYSTROM_CACHE[key] = err
        raise err
    dec = NystromDecomposition(kernel, window, nodes, sw, lam[::-1].copy(), vec[:, ::-1].copy(), trace)
    _NYSTROM_CACHE[key] = dec
    return dec


def sample_dpp_nystrom(kernel: KernelEvaluator, window: Domain, grid: int = 64, rng=None) -> PointConfiguration:
    """DPP with ``kernel`` restricted to ``window``.

    The restricted kernel is a mixture of projection DPPs: each Nystrom
    eigenfunction is kept independently with probability equal to its
    eigenvalue, and the kept ones are sampled as a projection DPP.
    """
    g = as_generator(rng)
    dec = nystrom(kernel, window, grid)
    keep = g.random(dec.eigenvalues.size) < np.clip(dec.eigenvalues, 0, 1)
    sel = np.flatnonzero(keep)
    if sel.size == 0:
        return PointConfiguration(np.zeros((0, window.dim)), d=window.dim)
    return sample_projection_dpp(dec.expansion(sel), rng=g)
