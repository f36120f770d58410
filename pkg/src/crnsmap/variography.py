"""Time-weighted empirical semivariogram and Gaussian model fitting.

Count observations with different observation times carry different
Poisson noise, so pairs are weighted by ``t_i t_j / (t_i + t_j)`` and the
squared rate differences are bias-corrected by the time-weighted mean rate.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.distance import pdist

from .observations import observation_arrays

DEFAULT_BIN_WIDTH = 10.0


class VariogramError(ValueError):
    pass


class VariogramFitWarning(UserWarning):
    pass


@dataclass(frozen=True)
class VariogramModel:
    """Gaussian semivariogram ``p0 + (p2 - p0) * (1 - exp(-h^2 / p1^2))``.

    ``source`` records where the parameters came from (``"fit"`` or
    ``"prior"``) and is carried into run logs.
    """

    nugget: float
    range: float
    sill: float
    source: str = "fit"

    def __post_init__(self):
        if not (self.nugget >= 0 and self.range > 0 and self.sill >= self.nugget):
            raise VariogramError(
                f"invalid Gaussian variogram parameters p0={self.nugget}, "
                f"p1={self.range}, p2={self.sill}"
            )

    @property
    def params(self):
        return (self.nugget, self.range, self.sill)

    def gamma(self, h):
        return model_gamma(self, h)

    def covariance(self, h):
        return self.sill - model_gamma(self, h)

    def to_dict(self):
        return {
            "nugget": float(self.nugget),
            "range": float(self.range),
            "sill": float(self.sill),
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"nugget", "range", "sill", "source"}
        if unknown:
            raise VariogramError(f"unknown variogram keys: {sorted(unknown)}")
        return cls(float(d["nugget"]), float(d["range"]), float(d["sill"]), d.get("source", "fit"))


def model_gamma(model, h):
    h = np.asarray(h, dtype=float)
    p0, p1, p2 = model.params
    out = p0 + (p2 - p0) * (1.0 - np.exp(-(h**2) / p1**2))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EmpiricalVariogram:
    lags: np.ndarray
    gamma: np.ndarray
    weights: np.ndarray
    pair_counts: np.ndarray
    raw_gamma: np.ndarray
    bin_width: float
    max_lag: float
    mean_rate: float
    rate_variance: float

    def __len__(self):
        return len(self.lags)


def weighted_mean_rate(measurements):
    """Observation-time weighted mean rate, i.e. total counts over total time."""
    if len(measurements) == 0:
        raise VariogramError("weighted mean rate of an empty measurement set")
    _, counts, durations = observation_arrays(measurements)
    # correctly rounded totals, independent of summation order
    total_t = math.fsum(durations)
    if not total_t > 0:
        raise VariogramError("total observation time must be > 0")
    return math.fsum(counts) / total_t


def empirical_variogram(measurements, bin_width=DEFAULT_BIN_WIDTH, max_lag=None):
    """Bin the time-weighted pair statistics into fixed-width lag classes.

    Bin ``k`` has centre ``(k + 0.5) * bin_width`` and collects pairs whose
    separation ``d`` satisfies ``k * bw <= d < (k + 1) * bw``. Pairs beyond
    ``max_lag`` are ignored; empty bins are dropped. ``max_lag`` defaults to
    half the bounding-box diagonal of the measurement locations.
    """
    if bin_width <= 0:
        raise VariogramError("bin_width must be > 0")
    xy, counts, t = observation_arrays(measurements)
    n = len(t)
    if n < 2:
        raise VariogramError("need at least 2 measurements")
    if len(np.unique(xy, axis=0)) < 2:
        raise VariogramError("need at least 2 distinct locations")
    if max_lag is None:
        span = xy.max(axis=0) - xy.min(axis=0)
        max_lag = 0.5 * float(np.hypot(*span))

    m_hat = math.fsum(counts) / math.fsum(t)
    rates = counts / t

    d = pdist(xy)
    i, j = np.triu_indices(n, k=1)
    w = t[i] * t[j] / (t[i] + t[j])
    sq = w * (rates[i] - rates[j]) ** 2 - m_hat

    keep = d <= max_lag
    if not keep.any():
        raise VariogramError("no measurement pairs within max_lag")
    k = np.floor(d[keep] / bin_width).astype(int)
    nbins = int(k.max()) + 1
    num = np.bincount(k, weights=sq[keep], minlength=nbins)
    den = np.bincount(k, weights=w[keep], minlength=nbins)
    cnt = np.bincount(k, minlength=nbins)

    occupied = cnt > 0
    lags = (np.arange(nbins) + 0.5)[occupied] * bin_width
    raw = num[occupied] / (2.0 * den[occupied])
    return EmpiricalVariogram(
        lags=lags,
        gamma=np.maximum(raw, 0.0),
        weights=den[occupied],
        pair_counts=cnt[occupied],
        raw_gamma=raw,
        bin_width=float(bin_width),
        max_lag=float(max_lag),
        mean_rate=m_hat,
        rate_variance=float(np.var(rates)),
    )


def _soft_l1_residuals(q, lags, target):
    p0, p1, psill = q
    return p0 + psill * (1.0 - np.exp(-(lags**2) / p1**2)) - target


def fit_gaussian_model(emp, fallback=None, loss_scale=1.0):
    """Fit nugget, range and sill to ``emp`` under a soft-L1 loss.

    The fit works on ``(nugget, range, sill - nugget)`` with lower bounds
    ``(0, tiny, 0)`` so every returned model is valid. When fewer than three
    bins are available, or the optimiser fails, ``fallback`` is returned (with
    ``source="prior"``) and a :class:`VariogramFitWarning` is issued; without a
    fallback a :class:`VariogramError` is raised.
    """
    reason = None
    if len(emp) < 3:
        reason = f"only {len(emp)} variogram bins"
    else:
        lags = np.asarray(emp.lags, dtype=float)
        target = np.asarray(emp.gamma, dtype=float)
        max_lag = max(float(emp.max_lag), float(lags.max()))
        sill0 = emp.rate_variance if emp.rate_variance > 0 else float(target.max())
        if not sill0 > 0:
            sill0 = 1.0
        x0 = np.array([0.0, max_lag / 3.0, sill0])
        lo = np.array([0.0, 1e-6 * max_lag, 0.0])
        hi = np.array([np.inf, 10.0 * max_lag, np.inf])
        x0 = np.clip(x0, lo, hi)
        try:
            res = least_squares(
                _soft_l1_residuals,
                x0,
                bounds=(lo, hi),
                loss="soft_l1",
                f_scale=loss_scale,
                args=(lags, target),
                x_scale="jac",
                xtol=1e-15,
                ftol=1e-15,
                gtol=1e-15,
                max_nfev=5000,
            )
        except (ValueError, np.linalg.LinAlgError) as exc:
            res = None
            reason = f"optimiser error: {exc}"
        if res is not None:
            if res.status > 0 and np.all(np.isfinite(res.x)):
                p0, p1, psill = (float(v) for v in res.x)
                return VariogramModel(p0, p1, p0 + psill, "fit")
            reason = f"optimiser failed: {res.message}"

    if fallback is None:
        raise VariogramError(f"cannot fit variogram ({reason})")
    warnings.warn(f"variogram fit fell back to prior: {reason}", VariogramFitWarning, stacklevel=2)
    return VariogramModel(fallback.nugget, fallback.range, fallback.sill, "prior")


def write_variogram_csv(path, emp, model=None):
    """Export bins as ``h,gamma_hat,weight,pairs,gamma_fit`` rows."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["h", "gamma_hat", "weight", "pairs", "gamma_fit"])
        fit = model_gamma(model, emp.lags) if model is not None else [None] * len(emp)
        for h, g, w, c, f in zip(emp.lags, emp.gamma, emp.weights, emp.pair_counts, fit):
            writer.writerow([repr(float(h)), repr(float(g)), repr(float(w)), int(c), "" if f is None else repr(float(f))])
