"""Run (parameter x trial) grids: sample, transport, smoothing bound."""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..core import Domain, PointConfiguration, ReferenceMeasure, RngStream
from ..processes import (GafSpec, Potential, RadialExpansion, equilibrium_measure, kernel_bessel,
                         kernel_infinite_ginibre, run_rnm_chains, sample_dpp_nystrom, sample_gaf_zeros,
                         sample_poisson, sample_projection_dpp)
from ..smoothing import certified_bound
from ..transport import w2_semidiscrete
from .config import ExperimentConfig
from .records import ExperimentRecord

MCMC_STEPS = 4000
NYSTROM_GRID = 64
# trial streams of different parameters never collide
_STREAM_STRIDE = 1_000_000


def _centered(domain: Domain) -> tuple[Domain, np.ndarray]:
    box = domain.bounding_box()
    shift = 0.5 * (box.lo + box.hi)
    return domain.translated(-shift), shift


def _droplet_potential(domain: Domain) -> Potential:
    if domain.kind not in ("disk", "ellipse") or np.any(domain.center != 0):
        raise ValueError("random normal matrix runs need a droplet centred at the origin")
    if domain.kind == "disk" and np.isclose(domain.radius, 1.0):
        return Potential.ginibre()
    if domain.kind == "ellipse":
        a, b = domain.axes
        tau = (a - b) / 2
        if np.isclose(a + b, 2.0) and 0 <= tau < 1:
            return Potential.elliptic(tau)
    raise ValueError("droplet must be the unit disk or an ellipse with semi-axes (1+tau, 1-tau)")


def sample_process(process: str, param, domain: Domain, rng: RngStream):
    """Configuration and its reference measure for one trial."""
    if process == "poisson":
        return sample_poisson(float(param), domain, rng), ReferenceMeasure.uniform(domain)
    if process in ("ginibre_finite", "rnm_mcmc"):
        pot = _droplet_potential(domain)
        N = int(param)
        if process == "ginibre_finite":
            if pot.kind != "ginibre":
                raise ValueError("ginibre_finite runs on the unit disk")
            pts = sample_projection_dpp(RadialExpansion(pot, N), rng=rng)
        else:
            pts = run_rnm_chains(pot, N, MCMC_STEPS, rng).configurations()[0]
        return pts, equilibrium_measure(pot)
    if process == "gaf":
        # GafSpec centres the window itself
        return sample_gaf_zeros(GafSpec(float(param), domain), rng), ReferenceMeasure.uniform(domain)
    window, shift = _centered(domain)
    if window.kind != "box":
        raise ValueError(f"{process} is sampled on boxes")
    kern = kernel_infinite_ginibre(float(param)) if process == "ginibre_infinite" \
        else kernel_bessel(float(param), window.dim)
    # both kernels are translation invariant in law, so one decomposition serves every window position
    pts = sample_dpp_nystrom(kern, window, NYSTROM_GRID, rng)
    return pts.translated(shift), ReferenceMeasure.uniform(domain)


def _trial(cfg: ExperimentConfig, p_index: int, trial: int, timing: bool) -> ExperimentRecord:
    param = cfg.params[p_index]
    rec = ExperimentRecord(cfg.process, param, trial, 0)
    audit = {"stream": [cfg.seed, p_index * _STREAM_STRIDE + trial], "error": None}
    rec.audit = audit
    t0 = time.perf_counter()
    domain = cfg.domain_object()
    try:
        pts, ref = sample_process(cfg.process, param, domain, RngStream(cfg.seed, p_index * _STREAM_STRIDE + trial))
        rec.n_points = pts.n
        if pts.n == 0:
            audit["w2"] = "undefined: empty configuration"
        else:
            res = w2_semidiscrete(pts, ref, cfg.transport.resolution)
            rec.w2, rec.w2_qbound = res.cost, res.quantization_bound
            _bound(cfg, pts, ref, rec, audit)
    except Exception as exc:  # noqa: BLE001 - failures are recorded, the run continues
        audit["error"] = f"{type(exc).__name__}: {exc}"
    if timing:
        rec.ms = 1e3 * (time.perf_counter() - t0)
    return rec


def _bound(cfg: ExperimentConfig, pts: PointConfiguration, ref: ReferenceMeasure, rec, audit) -> None:
    sm = cfg.smoothing
    dom = ref.domain
    checks = {
        "domain_is_box": dom.kind == "box",
        "c_positive": sm.c > 0,
        "c_below_density_floor": sm.c <= ref.lower_bound * (1 + 1e-12),
        "points_in_domain": bool(np.all(dom.contains(pts.points))),
        "mass_equal": True,  # both sides are probability measures by construction
    }
    audit["hypotheses"] = checks
    if not all(checks.values()):
        audit["smooth_bound"] = "skipped: hypotheses not met"
        return
    t_star, rep = certified_bound(pts, ref, dom, sm.c, (sm.t_lo, sm.t_hi), sm.lambda_max)
    rec.smooth_bound, rec.t_star = rep.bound, t_star
    audit["bound_report"] = rep.to_dict()


def _trial_args(args):
    return _trial(*args)


def run_experiment(config: ExperimentConfig, workers: int = 1, timing: bool = False) -> list[ExperimentRecord]:
    """One record per (parameter, trial), sorted by key.

    Each trial draws from its own RNG stream, so the records do not depend
    on ``workers``.  Wall times are filled in only when ``timing`` is set,
    which keeps repeated runs byte-identical by default.
    """
    jobs = [(config, i, t, timing) for i in range(len(config.params)) for t in range(config.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            recs = list(pool.map(_trial_args, jobs, chunksize=1))
    else:
        recs = [_trial(*j) for j in jobs]
    return sorted(recs, key=lambda r: r.key)


def summarize(records) -> dict:
    out = {}
    for r in records:
        s = out.setdefault(r.param, {"trials": 0, "errors": 0, "excluded": 0, "w2": []})
        s["trials"] += 1
        s["errors"] += r.audit.get("error") is not None
        if r.w2 is None:
            s["excluded"] += 1
        else:
            s["w2"].append(r.w2)
    for s in out.values():
        w = s.pop("w2")
        s["mean_w2"] = math.fsum(w) / len(w) if w else None
    return out
