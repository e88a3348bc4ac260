"""Neumann Laplacian eigenbasis on boxes, Fourier coefficients and heat flow.

Eigenfunctions are tensor products of cosines,

    phi_k(x) = prod_i c_{k_i} cos(k_i pi (x_i - a_i) / l_i),

normalised in L^2 of the box, with eigenvalues pi^2 sum_i (k_i / l_i)^2.
"""
from __future__ import annotations

import csv
import hashlib
import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .core import Domain, PointConfiguration, QuadratureError, ReferenceMeasure, gauss_legendre


class TruncationError(RuntimeError):
    """Raised when a truncated series cannot be certified."""


def _axis_norm(k, length):
    k = np.asarray(k)
    return np.where(k == 0, length ** -0.5, (2.0 / length) ** 0.5)


@dataclass(frozen=True, eq=False)
class NeumannBasis:
    """Truncated eigenbasis on a box.

    Pass ``lambda_max`` (keep every mode with eigenvalue <= lambda_max) or
    ``kmax`` (per-axis maximum index, a rectangular index set).
    """

    domain: Domain
    lambda_max: Optional[float] = None
    kmax: Optional[tuple] = None

    def __post_init__(self):
        if self.domain.kind != "box":
            raise ValueError("Neumann eigenbasis is only available on boxes")
        if (self.lambda_max is None) == (self.kmax is None):
            raise ValueError("give exactly one of lambda_max and kmax")
        d = self.domain.dim
        omega = np.pi / self.domain.lengths
        if self.lambda_max is not None:
            if self.lambda_max < 0:
                raise ValueError("lambda_max must be non-negative")
            kaxis = np.floor(np.sqrt(self.lambda_max) / omega + 1e-12).astype(int)
        else:
            kaxis = np.broadcast_to(np.asarray(self.kmax, dtype=int), (d,)).copy()
            if np.any(kaxis < 0):
                raise ValueError("kmax must be non-negative")
        grids = np.meshgrid(*[np.arange(k + 1) for k in kaxis], indexing="ij")
        idx = np.column_stack([g.ravel() for g in grids])
        lam = np.sum((idx * omega) ** 2, axis=1)
        if self.lambda_max is not None:
            keep = lam <= self.lambda_max * (1 + 1e-14)
            idx, lam = idx[keep], lam[keep]
        order = np.lexsort(tuple(idx[:, ::-1].T) + (lam,))
        idx, lam = idx[order], lam[order]
        idx.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "kaxis", tuple(int(k) for k in kaxis))
        object.__setattr__(self, "omega", omega)

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def truncation(self) -> float:
        """Every mode with eigenvalue <= this value is retained."""
        if self.lambda_max is not None:
            return float(self.lambda_max)
        return float(np.min((np.asarray(self.kaxis) + 1) * self.omega) ** 2)

    def position(self, k) -> int:
        k = tuple(int(v) for v in k)
        hit = np.flatnonzero(np.all(self.indices == np.asarray(k), axis=1))
        if hit.size == 0:
            raise IndexError(f"multi-index {k} is outside the truncation")
        return int(hit[0])

    def axis_tables(self, x: np.ndarray) -> list[np.ndarray]:
        """Per-axis tables T_i[n, j] = c_j cos(j pi (x_ni - a_i) / l_i)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = []
        for i in range(self.dim):
            j = np.arange(self.kaxis[i] + 1)
            u = (x[:, i:i + 1] - self.domain.lo[i]) * self.omega[i]
            out.append(_axis_norm(j, self.domain.lengths[i]) * np.cos(u * j))
        return out

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Matrix of phi_k(x_n), shape (N, size)."""
        tables = self.axis_tables(x)
        out = tables[0][:, self.indices[:, 0]]
        for i in range(1, self.dim):
            out = out * tables[i][:, self.indices[:, i]]
        return out

    def sup_norms(self) -> np.ndarray:
        """sup over the box of |phi_k|."""
        return np.prod(_axis_norm(self.indices, self.domain.lengths), axis=1)


def eigenpair(basis: NeumannBasis, k):
    """Return ``(lambda_k, phi_k)`` with ``phi_k`` a vectorised callable."""
    pos = basis.position(k)
    k = np.asarray(basis.indices[pos])
    lo, lengths = basis.domain.lo, basis.domain.lengths
    c = float(np.prod(_axis_norm(k, lengths)))

    def phi(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return c * np.prod(np.cos(k * np.pi * (x - lo) / lengths), axis=1)

    return float(basis.eigenvalues[pos]), phi


@dataclass(frozen=True, eq=False)
class SpectralCoefficients:
    basis: NeumannBasis
    values: np.ndarray
    mass: float
    # identifies the measure the coefficients came from: ("points", digest) or ("uniform", domain) ...
    source: Optional[tuple] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.basis.size,):
            raise ValueError("coefficient vector does not match the basis")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite coefficients")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, k) -> float:
        return float(self.values[self.basis.position(k)])

    def to_csv(self, path) -> None:
        d = self.basis.dim
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"k_{i + 1}" for i in range(d)] + ["lambda", "coeff"])
            for k, lam, c in zip(self.basis.indices, self.basis.eigenvalues, self.values):
                w.writerow([int(v) for v in k] + [repr(float(lam)), repr(float(c))])


_BLOCK = 2048


def _point_coefficients(points: np.ndarray, basis: NeumannBasis) -> np.ndarray:
    # fixed-size blocks; the block partial sums are then reduced pairwise by
    # np.sum, so the result does not depend on how blocks are scheduled
    n = len(points)
    partial = []
    for s in range(0, n, _BLOCK):
        tables = basis.axis_tables(points[s:s + _BLOCK])
        if basis.dim == 2:
            # separable: sum_n A[n, k1] B[n, k2] is a single matrix product
            full = tables[0].T @ tables[1]
            partial.append(full[basis.indices[:, 0], basis.indices[:, 1]])
        else:
            partial.append(basis.evaluate(points[s:s + _BLOCK]).sum(axis=0))
    return np.sum(np.array(partial), axis=0) / n


def _density_coefficients(ref: ReferenceMeasure, basis: NeumannBasis, nodes_per_axis=None,
                          rtol: float = 1e-9) -> np.ndarray:
    box = basis.domain
    if ref.kind == "uniform" and ref.domain == box:
        out = np.zeros(basis.size)
        out[0] = box.area() ** -0.5
        return out

    def quad(n_axis):
        rules = [gauss_legendre(int(n), a, b) for n, a, b in zip(n_axis, box.lo, box.hi)]
        grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        wg = np.meshgrid(*[r[1] for r in rules], indexing="ij")
        nodes = np.column_stack([g.ravel() for g in grids])
        w = np.prod(np.column_stack([g.ravel() for g in wg]), axis=1)
        rho = np.where(ref.domain.contains(nodes), ref.density(nodes), 0.0)
        acc = np.zeros(basis.size)
        for s in range(0, len(nodes), 8192):
            acc += (w[s:s + 8192] * rho[s:s + 8192]) @ basis.evaluate(nodes[s:s + 8192])
        return acc

    if nodes_per_axis is None:
        nodes_per_axis = [4 * k + 8 for k in basis.kaxis]
    a = quad(nodes_per_axis)
    b = quad([int(1.5 * n) + 1 for n in nodes_per_axis])
    err = np.max(np.abs(a - b))
    if err > rtol * max(1.0, np.max(np.abs(b))):
        raise QuadratureError(f"density coefficients did not converge (change {err:.3e})")
    return b


def coefficients(measure, basis: NeumannBasis) -> SpectralCoefficients:
    """Fourier coefficients mu(phi_k) of a point configuration or a density."""
    if isinstance(measure, PointConfiguration):
        if measure.n == 0:
            raise ValueError("empty configuration")
        if measure.d != basis.dim:
            raise ValueError("dimension mismatch")
        digest = hashlib.sha256(np.ascontiguousarray(measure.points).tobytes()).hexdigest()
        return SpectralCoefficients(basis, _point_coefficients(measure.points, basis), 1.0,
                                    source=("points", digest))
    if isinstance(measure, ReferenceMeasure):
        if measure.kind == "uniform" and measure.domain == basis.domain:
            src = ("uniform", measure.domain)
        else:
            src = ("density", id(measure))
        return SpectralCoefficients(basis, _density_coefficients(measure, basis), 1.0, source=src)
    raise TypeError(f"cannot take coefficients of {type(measure).__name__}")


def heat_evolve(coeffs: SpectralCoefficients, t: float) -> SpectralCoefficients:
    if t < 0:
        raise ValueError("heat flow needs t >= 0")
    damp = np.exp(-coeffs.basis.eigenvalues * t)
    src = None if coeffs.source is None else ("heat", t) + coeffs.source
    return SpectralCoefficients(coeffs.basis, coeffs.values * damp, coeffs.mass, source=src)


@dataclass(frozen=True, eq=False)
class HeatKernel:
    """Truncated Neumann heat kernel P(t, x, y)."""

    basis: NeumannBasis
    t: float

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("heat kernel needs t > 0")

    def __call__(self, x, y) -> np.ndarray:
        """Matrix P(t, x_i, y_j)."""
        damp = np.exp(-self.basis.eigenvalues * self.t)
        return (self.basis.evaluate(x) * damp) @ self.basis.evaluate(y).T

    def moment2(self, y, nodes: int = 200) -> np.ndarray:
        """Quadrature of int |x - y|^2 P(t, x, y) dx for each row of ``y``.

        Separable: |x - y|^2 splits over axes and every cosine factor with
        nonzero index integrates to zero, so only modes that are nonzero on
        at most one axis contribute.
        """
        b = self.basis
        y = np.atleast_2d(np.asarray(y, dtype=float))
        ty = b.axis_tables(y)
        damp = np.exp(-b.eigenvalues * self.t)
        out = np.zeros(len(y))
        for i in range(b.dim):
            xs, ws = gauss_legendre(nodes, b.domain.lo[i], b.domain.hi[i])
            j = np.arange(b.kaxis[i] + 1)
            cx = _axis_norm(j, b.domain.lengths[i]) * np.cos((xs[:, None] - b.domain.lo[i]) * b.omega[i] * j)
            m2 = ((xs[:, None] - y[:, i][None, :]) ** 2 * ws[:, None]).T @ cx  # (ny, K_i)
            # factors on the other axes: int phi_0 = sqrt(l), phi_0(y) = 1/sqrt(l)
            others = np.ones(b.size, dtype=bool)
            for a in range(b.dim):
                if a != i:
                    others &= b.indices[:, a] == 0
            sel = np.flatnonzero(others)
            kk = b.indices[sel, i]
            out += (m2[:, kk] * ty[i][:, kk] * damp[sel]).sum(axis=1)
        return out


def lattice_eigenvalues(domain: Domain, x: float) -> np.ndarray:
    """All eigenvalues <= x by direct lattice enumeration (zero mode included)."""
    return NeumannBasis(domain, lambda_max=x).eigenvalues


def weyl_count(domain, x: float) -> int:
    """Number of nonzero multi-indices with eigenvalue <= x."""
    if isinstance(domain, NeumannBasis):
        domain = domain.domain
    if x < 0:
        raise ValueError("x must be non-negative")
    return int(lattice_eigenvalues(domain, x).size - 1)


def weyl_asymptotic(domain: Domain, x: float) -> float:
    """Leading Weyl term |Omega| omega_d x^{d/2} / (2 pi)^d."""
    d = domain.dim
    ball = np.pi ** (d / 2) / special.gamma(d / 2 + 1)
    return domain.area() * ball * x ** (d / 2) / (2 * np.pi) ** d


def _upper_gamma(a: float, x: float) -> float:
    """Upper incomplete gamma Gamma(a, x) for a in {-1/2} U [0, inf)."""
    if a > 0:
        return float(special.gammaincc(a, x) * special.gamma(a))
    if a == 0:
        return float(special.exp1(x))
    if a == -0.5:
        # Gamma(a, x) = (Gamma(a + 1, x) - x^a e^-x) / a
        g_half = np.sqrt(np.pi) * special.erfc(np.sqrt(x))
        return float((g_half - x ** -0.5 * np.exp(-x)) / a)
    raise ValueError(f"unsupported order {a}")


def _orthant_tail(omega: np.ndarray, lam: float, t: float) -> float:
    """Bound on sum over k in Z_{>=1}^m with lambda_k > lam of e^{-lambda t}/lambda.

    Each lattice point k is charged to the unit cell [k-1, k]; on that cell
    lambda is smaller than lambda_k, so the (decreasing) summand at k is at
    most its integral over the cell.  The cells lie in the region where
    sqrt(lambda) > sqrt(lam) - |omega|, and the integral over that region is
    explicit in polar coordinates.
    """
    m = len(omega)
    r0 = max(0.0, np.sqrt(lam) - float(np.linalg.norm(omega)))
    sphere = 2 * np.pi ** (m / 2) / special.gamma(m / 2)
    pref = sphere / 2 ** m / float(np.prod(omega))
    x0 = t * r0 * r0
    if x0 == 0.0 and m <= 2:
        return np.inf
    # int_{r0}^inf e^{-t r^2} r^{m-3} dr = t^{1 - m/2} Gamma(m/2 - 1, t r0^2) / 2
    return pref * 0.5 * t ** (1 - m / 2) * _upper_gamma(m / 2 - 1, x0)


def tail_certificate(basis: NeumannBasis, t: float, raise_if_large: bool = True,
                     support_weight=None) -> float:
    """Rigorous upper bound on the discarded tail sum_{lambda_k > Lambda} e^{-lambda_k t} / lambda_k.

    Multi-indices are split by their support (which axes are nonzero); each
    support is a full-rank orthant lattice in fewer dimensions.  With
    ``support_weight(axes)`` each support's contribution is multiplied by
    that weight, e.g. a bound on |coefficient|^2 valid on the support.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    lam = basis.truncation
    total = 0.0
    d = basis.dim
    for r in range(1, d + 1):
        for axes in itertools.combinations(range(d), r):
            w = 1.0 if support_weight is None else float(support_weight(axes))
            if w > 0:
                total += w * _orthant_tail(basis.omega[list(axes)], lam, t)
    if raise_if_large and total > 1.0:
        raise TruncationError(f"truncation insufficient: tail certificate {total:.3e} > 1")
    return float(total)


def direct_tail(basis: NeumannBasis, t: float, upto: float) -> float:
    """Direct summation of e^{-lambda t}/lambda over truncation < lambda <= upto."""
    lam = lattice_eigenvalues(basis.domain, upto)
    sel = lam > basis.truncation
    return float(np.sum(np.exp(-lam[sel] * t) / lam[sel]))
