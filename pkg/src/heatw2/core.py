"""Domains, point configurations, reference measures and RNG streams."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np


class DimensionError(ValueError):
    pass


class QuadratureError(RuntimeError):
    """Raised when a quadrature check does not converge."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Domain:
    """Axis-aligned box, disk or ellipse.

    Boxes may have any dimension; disks and ellipses are planar.  Use the
    ``box``/``disk``/``ellipse`` constructors rather than the raw init.
    """

    kind: str
    lo: np.ndarray = None
    hi: np.ndarray = None
    center: np.ndarray = None
    axes: np.ndarray = None

    def __post_init__(self):
        if self.kind == "box":
            lo, hi = _frozen(self.lo), _frozen(self.hi)
            if lo.ndim != 1 or lo.shape != hi.shape or lo.size == 0:
                raise DimensionError("box bounds must be matching 1-d arrays")
            if not np.all(hi > lo):
                raise ValueError("box extents must be strictly positive")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        elif self.kind in ("disk", "ellipse"):
            c, ax = _frozen(self.center), _frozen(self.axes)
            if c.shape != (2,) or ax.shape != (2,):
                raise DimensionError("disk/ellipse are planar")
            if not np.all(ax > 0):
                raise ValueError("radius / semi-axes must be strictly positive")
            object.__setattr__(self, "center", c)
            object.__setattr__(self, "axes", ax)
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def box(cls, lo, hi) -> "Domain":
        return cls("box", lo=lo, hi=hi)

    @classmethod
    def disk(cls, center=(0.0, 0.0), radius: float = 1.0) -> "Domain":
        return cls("disk", center=center, axes=(radius, radius))

    @classmethod
    def ellipse(cls, center=(0.0, 0.0), semi_axes=(1.0, 1.0)) -> "Domain":
        return cls("ellipse", center=center, axes=semi_axes)

    @property
    def dim(self) -> int:
        return self.lo.size if self.kind == "box" else 2

    @property
    def radius(self) -> float:
        if self.kind != "disk":
            raise AttributeError("radius is only defined for disks")
        return float(self.axes[0])

    @property
    def lengths(self) -> np.ndarray:
        return self.hi - self.lo

    def area(self) -> float:
        if self.kind == "box":
            return float(np.prod(self.hi - self.lo))
        return float(np.pi * self.axes[0] * self.axes[1])

    def bounding_box(self) -> "Domain":
        if self.kind == "box":
            return self
        return Domain.box(self.center - self.axes, self.center + self.axes)

    def diameter(self) -> float:
        if self.kind == "box":
            return float(np.linalg.norm(self.hi - self.lo))
        return float(2 * self.axes.max())

    def contains(self, x) -> np.ndarray | bool:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.dim:
            raise DimensionError(f"point dimension {x.shape[1]} != domain dimension {self.dim}")
        if self.kind == "box":
            inside = np.all((x >= self.lo) & (x <= self.hi), axis=1)
        else:
            u = (x - self.center) / self.axes
            inside = np.einsum("ij,ij->i", u, u) <= 1.0
        return bool(inside[0]) if single else inside

    def translated(self, v) -> "Domain":
        v = np.asarray(v, dtype=float)
        if self.kind == "box":
            return Domain.box(self.lo + v, self.hi + v)
        return Domain(self.kind, center=self.center + v, axes=self.axes)

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` i.i.d. uniform points; disks and ellipses by rejection from the bounding box."""
        bb = self.bounding_box()
        if self.kind == "box":
            return self.lo + rng.random((n, self.dim)) * self.lengths
        out = np.empty((0, 2))
        while len(out) < n:
            m = int(1.3 * (n - len(out))) + 8
            cand = bb.lo + rng.random((m, 2)) * bb.lengths
            out = np.vstack([out, cand[self.contains(cand)]])
        return out[:n]

    def to_dict(self) -> dict:
        if self.kind == "box":
            return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}
        return {"kind": self.kind, "center": self.center.tolist(), "axes": self.axes.tolist()}

    @classmethod
    def from_spec(cls, spec) -> "Domain":
        """Parse a named domain (``unit-square``, ``unit-disk``, ...) or a dict."""
        if isinstance(spec, Domain):
            return spec
        if isinstance(spec, str):
            named = {
                "unit-square": lambda: cls.box([0.0, 0.0], [1.0, 1.0]),
                "unit-disk": lambda: cls.disk(),
                "centered-square": lambda: cls.box([-0.5, -0.5], [0.5, 0.5]),
                "unit-interval": lambda: cls.box([0.0], [1.0]),
                "unit-cube": lambda: cls.box([0.0] * 3, [1.0] * 3),
            }
            if spec not in named:
                raise ValueError(f"unknown domain name {spec!r}")
            return named[spec]()
        kind = spec["kind"]
        if kind == "box":
            return cls.box(spec["lo"], spec["hi"])
        if kind == "disk":
            return cls.disk(spec.get("center", (0.0, 0.0)), spec.get("radius", spec.get("axes", [1.0])[0]))
        return cls.ellipse(spec.get("center", (0.0, 0.0)), spec["axes"])

    def __eq__(self, other):
        if not isinstance(other, Domain):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))

    def __repr__(self):
        return f"Domain({self.to_dict()})"


def area(domain: Domain) -> float:
    return domain.area()


def contains(domain: Domain, x) -> np.ndarray | bool:
    return domain.contains(x)


@dataclass(frozen=True, eq=False)
class PointConfiguration:
    """Finite list of points in R^d; the empirical measure puts mass 1/N on each."""

    points: np.ndarray
    d: Optional[int] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        d = self.d
        if pts.size == 0:
            d = d if d is not None else 2
            pts = pts.reshape(0, d)
        if pts.ndim != 2:
            raise DimensionError("points must be an (N, d) array")
        if d is not None and pts.shape[1] != d:
            raise DimensionError("declared dimension does not match points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "d", pts.shape[1])

    @classmethod
    def from_complex(cls, z) -> "PointConfiguration":
        z = np.asarray(z, dtype=complex).ravel()
        return cls(np.column_stack([z.real, z.imag]), d=2)

    def as_complex(self) -> np.ndarray:
        if self.d != 2:
            raise DimensionError("complex view needs d = 2")
        return self.points[:, 0] + 1j * self.points[:, 1]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.n

    def weights(self) -> np.ndarray:
        if self.n == 0:
            raise ValueError("empty configuration has no empirical measure")
        return np.full(self.n, 1.0 / self.n)

    def translated(self, v) -> "PointConfiguration":
        return PointConfiguration(self.points + np.asarray(v, dtype=float), d=self.d)

    def scaled(self, s: float) -> "PointConfiguration":
        return PointConfiguration(self.points * s, d=self.d)

    def __eq__(self, other):
        return isinstance(other, PointConfiguration) and np.array_equal(self.points, other.points)

    def to_csv(self, path, meta: Optional[dict] = None) -> None:
        """Write ``x_1..x_d`` columns; ``meta`` goes to a ``.json`` sidecar."""
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"x_{i + 1}" for i in range(self.d)])
            for row in self.points:
                w.writerow([repr(float(v)) for v in row])
        if meta is not None:
            with open(path.with_suffix(".json"), "w", encoding="utf-8") as fh:
                json.dump(meta, fh, indent=2, sort_keys=True)

    @classmethod
    def from_csv(cls, path) -> "PointConfiguration":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        return cls(np.array(body, dtype=float).reshape(len(body), len(header)), d=len(header))


def restrict(config: PointConfiguration, domain: Domain) -> PointConfiguration:
    if config.d != domain.dim:
        raise DimensionError("configuration and domain dimensions differ")
    if config.n == 0:
        return config
    return PointConfiguration(config.points[domain.contains(config.points)], d=config.d)


# -- quadrature -------------------------------------------------------------

def gauss_legendre(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def domain_quadrature(domain: Domain, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss rule on a box, or a polar Gauss rule on a disk/ellipse.

    Returns nodes of shape (M, d) and weights summing to the Lebesgue area.
    """
    if domain.kind == "box":
        rules = [gauss_legendre(n, a, b) for a, b in zip(domain.lo, domain.hi)]
        grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
        nodes = np.column_stack([g.ravel() for g in grids])
        weights = np.prod(np.column_stack([g.ravel() for g in wgrids]), axis=1)
        return nodes, weights
    r, wr = gauss_legendre(n, 0.0, 1.0)
    th = 2 * np.pi * (np.arange(2 * n) + 0.5) / (2 * n)
    wt = np.full(2 * n, 2 * np.pi / (2 * n))
    R, T = np.meshgrid(r, th, indexing="ij")
    W = np.outer(wr * r, wt) * domain.axes[0] * domain.axes[1]
    nodes = np.column_stack([
        domain.center[0] + domain.axes[0] * (R * np.cos(T)).ravel(),
        domain.center[1] + domain.axes[1] * (R * np.sin(T)).ravel(),
    ])
    return nodes, W.ravel()


@dataclass(frozen=True, eq=False)
class ReferenceMeasure:
    """Probability measure with a density (w.r.t. Lebesgue) on ``domain``.

    ``lower_bound`` is a claimed pointwise lower bound of the density on the
    domain; it is checked at quadrature nodes on construction.  ``value`` is
    set for constant densities so callers can take exact shortcuts.
    """

    domain: Domain
    density: Callable[[np.ndarray], np.ndarray]
    lower_bound: float
    kind: str = "density"
    value: Optional[float] = None
    label: str = ""
    check_nodes: int = 48

    def __post_init__(self):
        nodes, w = domain_quadrature(self.domain, self.check_nodes)
        rho = np.asarray(self.density(nodes), dtype=float)
        if np.any(rho < -1e-14):
            raise ValueError("density must be non-negative")
        mass = float(np.dot(w, rho))
        if abs(mass - 1.0) > 1e-8:
            raise QuadratureError(f"reference mass {mass!r} differs from 1 by more than 1e-8")
        if np.any(rho < self.lower_bound * (1 - 1e-12)):
            raise ValueError("declared lower bound exceeds the density at a quadrature node")

    @classmethod
    def uniform(cls, domain: Domain, label: str = "") -> "ReferenceMeasure":
        v = 1.0 / domain.area()

        def density(x, _v=v):
            return np.full(np.atleast_2d(x).shape[0], _v)

        return cls(domain, density, v, kind="uniform", value=v, label=label or f"uniform-{domain.kind}")

    def mass_on(self, domain: Domain, n: int = 64) -> float:
        nodes, w = domain_quadrature(domain, n)
        inside = self.domain.contains(nodes)
        return float(np.dot(w, np.where(inside, self.density(nodes), 0.0)))


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream: a Philox generator keyed on (seed, index)."""

    seed: int
    index: int = 0

    def __post_init__(self):
        for v in (self.seed, self.index):
            if not 0 <= int(v) < 2**64:
                raise ValueError("seed and index must fit in 64 bits")

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, i: int) -> "RngStream":
        return RngStream(self.seed, (self.index * 1_000_003 + i + 1) % 2**64)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
