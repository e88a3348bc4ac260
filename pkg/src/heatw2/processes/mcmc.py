"""Metropolis-adjusted Langevin sampling of random normal matrix eigenvalues."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import PointConfiguration, as_generator
from .potentials import Potential


class TuningError(RuntimeError):
    """Acceptance rate outside [0.1, 0.9]."""


@dataclass
class ChainResult:
    states: np.ndarray  # (chains, N) complex
    acceptance: float

    def configurations(self) -> list[PointConfiguration]:
        return [PointConfiguration.from_complex(s) for s in self.states]


def log_density(potential: Potential, z: np.ndarray) -> np.ndarray:
    """sum_{i<j} log|z_i - z_j|^2 - N sum_j Q(z_j) for a batch z of shape (chains, N)."""
    N = z.shape[-1]
    d2 = np.abs(z[..., :, None] - z[..., None, :]) ** 2
    iu = np.triu_indices(N, 1)
    pair = d2[..., iu[0], iu[1]]
    with np.errstate(divide="ignore"):
        out = np.log(pair).sum(axis=-1) - N * potential(z).sum(axis=-1)
    # near-collisions are treated as zero density
    return np.where(pair.min(axis=-1) < 1e-24, -np.inf, out)


def grad_log_density(potential: Potential, z: np.ndarray) -> np.ndarray:
    """Gradient as d/dx + i d/dy per coordinate."""
    N = z.shape[-1]
    diff = z[..., :, None] - z[..., None, :]
    eye = np.eye(N, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(eye, 0, 2.0 / np.conj(np.where(eye, 1, diff)))
    return inv.sum(axis=-1) - N * potential.grad(z)


def _initial_state(potential: Potential, N: int, chains: int, g: np.random.Generator) -> np.ndarray:
    if potential.droplet is not None:
        pts = potential.droplet.sample_uniform(g, chains * N)
        return (pts[:, 0] + 1j * pts[:, 1]).reshape(chains, N)
    return (g.standard_normal((chains, N)) + 1j * g.standard_normal((chains, N))) / np.sqrt(2)


def run_rnm_chains(potential: Potential, N: int, steps: int, rng, chains: int = 1,
                   step: float | None = None, check_tuning: bool = True) -> ChainResult:
    """Run ``chains`` independent MALA chains of ``steps`` joint updates each.

    Step size h = 0.1 / N per real coordinate.  Potentials without a
    gradient fall back to random-walk Metropolis.  The acceptance rate is
    measured over the second half of the run (the first half is burn-in).
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    if steps < 2:
        raise ValueError("need at least two steps")
    g = as_generator(rng)
    h = 0.1 / N if step is None else float(step)
    langevin = potential.kind != "custom" or potential.grad_fn is not None
    z = _initial_state(potential, N, chains, g)
    lp = log_density(potential, z)
    gr = grad_log_density(potential, z) if langevin else np.zeros_like(z)
    accepted = 0
    counted = 0
    burn = steps // 2
    sd = np.sqrt(h)
    for s in range(steps):
        noise = sd * (g.standard_normal(z.shape) + 1j * g.standard_normal(z.shape))
        zp = z + 0.5 * h * gr + noise
        lpp = log_density(potential, zp)
        if langevin:
            grp = grad_log_density(potential, zp)
            fwd = np.abs(zp - z - 0.5 * h * gr) ** 2
            bwd = np.abs(z - zp - 0.5 * h * grp) ** 2
            corr = (fwd - bwd).sum(axis=-1) / (2 * h)
        else:
            grp = gr
            corr = 0.0
        with np.errstate(invalid="ignore"):
            log_alpha = lpp - lp + corr
        acc = np.log(g.random(chains)) < log_alpha
        z = np.where(acc[:, None], zp, z)
        lp = np.where(acc, lpp, lp)
        gr = np.where(acc[:, None], grp, gr)
        if s >= burn:
            accepted += int(acc.sum())
            counted += chains
    rate = accepted / counted
    if check_tuning and not 0.1 <= rate <= 0.9:
        raise TuningError(f"acceptance rate {rate:.3f} outside [0.1, 0.9]")
    return ChainResult(z, rate)


def sample_rnm_mcmc(potential: Potential, N: int, steps: int, rng) -> PointConfiguration:
    """One configuration from the random normal matrix ensemble after ``steps`` MALA updates."""
    return run_rnm_chains(potential, N, steps, rng, chains=1).configurations()[0]
