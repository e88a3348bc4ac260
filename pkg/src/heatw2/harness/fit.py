"""Power-law fits of mean W2 against the process parameter."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .records import mean_w2

MODELS = ("pure-power", "sqrt-log")


@dataclass(frozen=True)
class RateFit:
    exponent: float
    stderr: float
    log_corrected: bool
    residual_norm: float
    intercept: float
    param_range: tuple

    def predict(self, params) -> np.ndarray:
        """Fitted log mean W2 at ``params``."""
        x = np.log(np.asarray(params, dtype=float))
        y = self.intercept + self.exponent * x
        if self.log_corrected:
            y = y + 0.5 * np.log(x)
        return y

    def to_json(self) -> str:
        d = asdict(self)
        d["param_range"] = list(self.param_range)
        return json.dumps(d, sort_keys=True)


def fit_power(params, values, model: str = "pure-power") -> RateFit:
    """Least squares of log(values) on log(params); the sqrt-log model first removes 0.5 log log(param)."""
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    p = np.asarray(params, dtype=float)
    v = np.asarray(values, dtype=float)
    if p.size < 3:
        raise ValueError("need at least three parameter values to fit a line with an error estimate")
    if np.any(v <= 0) or np.any(p <= 0):
        raise ValueError("values and parameters must be positive")
    x = np.log(p)
    y = np.log(v)
    corrected = model == "sqrt-log"
    if corrected:
        if np.any(p <= 1):
            raise ValueError("sqrt-log model needs parameters above 1")
        y = y - 0.5 * np.log(x)
    res = stats.linregress(x, y)
    fit = RateFit(float(res.slope), float(res.stderr), corrected, 0.0, float(res.intercept),
                  (float(p.min()), float(p.max())))
    resid = np.log(v) - fit.predict(p)
    return RateFit(fit.exponent, fit.stderr, corrected, float(np.linalg.norm(resid)), fit.intercept,
                   fit.param_range)


def fit_rate(records, model: str = "pure-power", min_params: int = 4, min_trials: int = 8) -> RateFit:
    """Fit the decay exponent of mean W2 over trials, per parameter value."""
    means = mean_w2(records)
    if len(means) < min_params:
        raise ValueError(f"need at least {min_params} distinct parameters, got {len(means)}")
    short = [p for p, (_, n, _) in means.items() if n < min_trials]
    if short:
        raise ValueError(f"parameters {short} have fewer than {min_trials} usable trials")
    params = list(means)
    return fit_power(params, [means[p][0] for p in params], model)
