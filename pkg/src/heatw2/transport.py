"""Quadratic Wasserstein distances: exact discrete solvers, quantised
semi-discrete transport, entropic cross-checks and the L^2 upper bound."""
from __future__ import annotations

import itertools
import json
import math
import os
import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from .core import Domain, PointConfiguration, ReferenceMeasure, domain_quadrature, gauss_legendre

# POT probes every array backend on import; only numpy is needed here
for _key in ("PYTORCH", "JAX", "CUPY", "TENSORFLOW"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_key}", "1")

DEFAULT_MAX_ENTRIES = 50_000_000


class QuantizationError(RuntimeError):
    pass


class SolverError(RuntimeError):
    pass


class ConvergenceWarning(UserWarning):
    pass


@dataclass
class TransportPlanResult:
    cost: float
    solver: str
    quantization_bound: float = 0.0
    plan: Optional[np.ndarray] = None  # rows (src, dst, mass)
    n: int = 0
    m: int = 0

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("plan")
        return json.dumps(d, sort_keys=True)

    def plan_to_csv(self, path) -> None:
        if self.plan is None:
            raise ValueError("no plan stored")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("src_idx,dst_idx,mass\n")
            for s, t, m in self.plan:
                fh.write(f"{int(s)},{int(t)},{m!r}\n")


def _pts(a) -> np.ndarray:
    return a.points if isinstance(a, PointConfiguration) else np.atleast_2d(np.asarray(a, dtype=float))


def sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distance matrix, computed coordinate-wise (no cancellation)."""
    out = np.zeros((len(a), len(b)))
    for i in range(a.shape[1]):
        out += (a[:, i:i + 1] - b[None, :, i]) ** 2
    return out


def _mean(values: np.ndarray) -> float:
    if values.size > 10_000:
        return math.fsum(values.tolist()) / values.size
    return float(np.mean(values))


def w2_bruteforce(a, b) -> float:
    """Minimum over all permutations; only for tiny instances."""
    A, B = _pts(a), _pts(b)
    if len(A) != len(B):
        raise ValueError("configurations must have the same size")
    n = len(A)
    if n > 8:
        raise ValueError("brute force limited to N <= 8")
    if n == 0:
        return 0.0
    C = sqdist(A, B)
    best = min(sum(C[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))
    return math.sqrt(best / n)


def w2_assignment(a, b) -> TransportPlanResult:
    """Exact W2 between equal-size uniform configurations.

    Uses scipy's shortest augmenting path (Jonker-Volgenant type) solver on
    the squared-distance matrix.
    """
    A, B = _pts(a), _pts(b)
    if len(A) != len(B):
        raise ValueError("configurations must have the same size")
    n = len(A)
    if n == 0:
        return TransportPlanResult(0.0, "assignment", plan=np.zeros((0, 3)), n=0, m=0)
    C = sqdist(A, B)
    rows, cols = linear_sum_assignment(C)
    cost = math.sqrt(max(_mean(C[rows, cols]), 0.0))
    plan = np.column_stack([rows, cols, np.full(n, 1.0 / n)])
    return TransportPlanResult(cost, "assignment", plan=plan, n=n, m=n)


# -- quantisation -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuantizedMeasure:
    points: np.ndarray
    weights: np.ndarray
    bound: float
    raw_mass: float


def _disk_rect_area(R: float, x0: float, x1: float, y0: float, y1: float) -> float:
    """Exact area of {x^2 + y^2 <= R^2} intersected with [x0,x1] x [y0,y1]."""
    x0, x1 = max(x0, -R), min(x1, R)
    if x1 <= x0:
        return 0.0

    def H(x):  # antiderivative of sqrt(R^2 - x^2)
        x = min(max(x, -R), R)
        return 0.5 * (x * math.sqrt(max(R * R - x * x, 0.0)) + R * R * math.asin(x / R))

    cuts = {x0, x1}
    for y in (y0, y1):
        if abs(y) < R:
            s = math.sqrt(R * R - y * y)
            cuts.update((-s, s))
    cuts = sorted(c for c in cuts if x0 <= c <= x1)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        xm = 0.5 * (a + b)
        h = math.sqrt(max(R * R - xm * xm, 0.0))
        upper_is_h = h < y1
        lower_is_h = -h > y0
        hi = h if upper_is_h else y1
        lo = -h if lower_is_h else y0
        if hi <= lo:
            continue
        # integral of (upper - lower) over [a, b]
        val = 0.0
        val += (H(b) - H(a)) if upper_is_h else y1 * (b - a)
        val -= -(H(b) - H(a)) if lower_is_h else y0 * (b - a)
        total += val
    return total


def _cell_grid(box: Domain, m: int):
    edges = [np.linspace(a, b, m + 1) for a, b in zip(box.lo, box.hi)]
    centers = [0.5 * (e[:-1] + e[1:]) for e in edges]
    grids = np.meshgrid(*centers, indexing="ij")
    return edges, np.column_stack([g.ravel() for g in grids])


@lru_cache(maxsize=32)
def _quantize_cached(ref: ReferenceMeasure, m: int) -> QuantizedMeasure:
    dom = ref.domain
    box = dom.bounding_box()
    edges, centers = _cell_grid(box, m)
    h = box.lengths / m
    bound = 0.5 * float(np.linalg.norm(h))
    if dom.kind == "box" and ref.kind == "uniform":
        w = np.full(len(centers), 1.0 / len(centers))
        raw = 1.0
    elif dom.kind in ("disk", "ellipse") and ref.kind == "uniform":
        # affine map to the unit disk keeps axis-aligned cells rectangular
        ax, c = dom.axes, dom.center
        ex = (edges[0] - c[0]) / ax[0]
        ey = (edges[1] - c[1]) / ax[1]
        far_x = np.maximum(np.abs(ex[:-1]), np.abs(ex[1:]))
        far_y = np.maximum(np.abs(ey[:-1]), np.abs(ey[1:]))
        near_x = np.maximum.reduce([ex[:-1], -ex[1:], np.zeros(m)])
        near_y = np.maximum.reduce([ey[:-1], -ey[1:], np.zeros(m)])
        inner = far_x[:, None] ** 2 + far_y[None, :] ** 2 <= 1.0
        outer = near_x[:, None] ** 2 + near_y[None, :] ** 2 >= 1.0
        areas = np.where(inner, np.outer(np.diff(ex), np.diff(ey)), 0.0)
        for i, j in zip(*np.nonzero(~inner & ~outer)):
            areas[i, j] = _disk_rect_area(1.0, ex[i], ex[i + 1], ey[j], ey[j + 1])
        w = (areas / np.pi).ravel()
        raw = float(w.sum())
    else:
        # tensor Gauss rule inside every cell, density set to zero outside the domain
        q = 6
        w = np.zeros(len(centers))
        xs, ws = gauss_legendre(q, -0.5, 0.5)
        offs = np.stack(np.meshgrid(*([xs] * box.dim), indexing="ij"), -1).reshape(-1, box.dim) * h
        wq = np.prod(np.stack(np.meshgrid(*([ws] * box.dim), indexing="ij"), -1).reshape(-1, box.dim), axis=1)
        wq = wq * float(np.prod(h))
        for o, wo in zip(offs, wq):
            nodes = centers + o
            w += wo * np.where(dom.contains(nodes), ref.density(nodes), 0.0)
        raw = float(w.sum())
    if raw < 1 - 1e-6:
        raise QuantizationError(f"grid mass {raw:.9f} below 1 - 1e-6: resolution too coarse")
    keep = w > 0
    pts, w = centers[keep], w[keep] / w[keep].sum()
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuantizedMeasure(pts, w, bound, raw)


def quantize(ref: ReferenceMeasure, resolution: int) -> QuantizedMeasure:
    """Atoms at the centres of an m^d cell grid over the bounding box.

    Weights are the reference mass of each cell clipped to the domain;
    moving every unit of mass to its cell centre costs at most half the
    cell diagonal, which is returned as ``bound``.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    return _quantize_cached(ref, int(resolution))


def w2_discrete(xa: np.ndarray, wa: np.ndarray, xb: np.ndarray, wb: np.ndarray,
                max_entries: int = DEFAULT_MAX_ENTRIES, return_plan: bool = False) -> TransportPlanResult:
    """Exact W2 between two weighted clouds by network simplex."""
    import ot

    if len(xa) * len(xb) > max_entries:
        raise SolverError(f"problem size {len(xa)}x{len(xb)} exceeds limit {max_entries}")
    C = sqdist(xa, xb)
    wa = np.asarray(wa, dtype=float) / np.sum(wa)
    wb = np.asarray(wb, dtype=float) / np.sum(wb)
    G, log = ot.emd(wa, wb, C, numItermax=max(10**7, 50 * C.size), log=True)
    if log.get("warning"):
        raise SolverError(f"network simplex did not finish: {log['warning']}")
    nz = np.nonzero(G)
    vals = G[nz] * C[nz]
    sq = math.fsum(vals.tolist()) if vals.size > 10_000 else float(vals.sum())
    plan = np.column_stack([nz[0], nz[1], G[nz]]) if return_plan else None
    return TransportPlanResult(math.sqrt(max(sq, 0.0)), "network_simplex", plan=plan, n=len(xa), m=len(xb))


def w2_semidiscrete(emp: PointConfiguration, ref: ReferenceMeasure, resolution: int = 128,
                    max_entries: int = DEFAULT_MAX_ENTRIES, return_plan: bool = False) -> TransportPlanResult:
    """W2 between an empirical measure and a quantised reference.

    The returned cost is exact for the quantised problem; the true distance
    to ``ref`` differs from it by at most ``quantization_bound``.
    """
    if emp.n == 0:
        raise ValueError("empty configuration")
    q = quantize(ref, resolution)
    res = w2_discrete(emp.points, emp.weights(), q.points, q.weights, max_entries, return_plan)
    res.quantization_bound = q.bound
    return res


# -- entropic cross-check ---------------------------------------------------

def _sinkhorn_log(wa, wb, C, eps, max_iter, tol):
    """Log-domain Sinkhorn with epsilon scaling: potentials are warm-started down a geometric schedule."""
    la, lb = np.log(wa), np.log(wb)
    f = np.zeros(len(wa))
    g = np.zeros(len(wb))
    schedule = [eps]
    while schedule[-1] < C.max():
        schedule.append(schedule[-1] * 4)
    viol = np.inf
    used = 0
    for e in schedule[::-1]:
        final = e == eps
        while used < max_iter:
            f = -e * logsumexp((g[None, :] - C) / e + lb[None, :], axis=1)
            g = -e * logsumexp((f[:, None] - C) / e + la[:, None], axis=0)
            used += 1
            if used % 10 == 0:
                rows = logsumexp((f[:, None] + g[None, :] - C) / e + lb[None, :], axis=1)
                viol = float(np.abs(np.exp(rows) * wa - wa).sum())
                if viol < (tol if final else 1e-3):
                    break
    logP = (f[:, None] + g[None, :] - C) / eps + la[:, None] + lb[None, :]
    P = np.exp(logP)
    viol = float(np.abs(P.sum(axis=1) - wa).sum())
    return P, viol


def w2_sinkhorn(a, b, epsilon: float, max_iter: int = 10_000, wa=None, wb=None,
                debias: bool = False, tol: float = 1e-6) -> float:
    """Approximate W2 from log-domain Sinkhorn iterations.

    Returns the square root of the transport cost of the entropic plan.  With
    ``debias`` the self-transport costs of both clouds are subtracted
    (Sinkhorn-divergence style) before taking the root.  This is a cross-check
    only; it can land on either side of the exact value.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    A, B = _pts(a), _pts(b)
    wa = np.full(len(A), 1.0 / len(A)) if wa is None else np.asarray(wa, float) / np.sum(wa)
    wb = np.full(len(B), 1.0 / len(B)) if wb is None else np.asarray(wb, float) / np.sum(wb)

    def cost(X, Y, u, v):
        C = sqdist(X, Y)
        P, viol = _sinkhorn_log(u, v, C, epsilon, max_iter, tol)
        if viol >= tol:
            warnings.warn(f"Sinkhorn stopped at max_iter with marginal violation {viol:.3e}",
                          ConvergenceWarning, stacklevel=3)
        return float((P * C).sum())

    c = cost(A, B, wa, wb)
    if debias:
        c = c - 0.5 * cost(A, A, wa, wa) - 0.5 * cost(B, B, wb, wb)
    return math.sqrt(max(c, 0.0))


# -- L^2 bound --------------------------------------------------------------

def h_neg1_bound(first: ReferenceMeasure, second: ReferenceMeasure, basis, a: float,
                 nodes: int = 96) -> float:
    """W2 upper bound 2 ||rho_1 - rho_2||_{L^2} / sqrt(a lambda_1) for densities on a box.

    ``a`` is a lower bound for the first density; lambda_1 is the first
    nonzero Neumann eigenvalue of the box.
    """
    if a <= 0:
        raise ValueError("lower bound a must be positive")
    box = basis.domain
    x, w = domain_quadrature(box, nodes)
    r1 = np.where(first.domain.contains(x), first.density(x), 0.0)
    r2 = np.where(second.domain.contains(x), second.density(x), 0.0)
    l2 = math.sqrt(float(np.dot(w, (r1 - r2) ** 2)))
    lam1 = float(np.min(np.pi / box.lengths) ** 2)
    return 2.0 * l2 / math.sqrt(a * lam1)
