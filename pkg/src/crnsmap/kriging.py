"""Ordinary and Poisson kriging.

Both solvers share one bordered system::

    [ C + D   1 ] [ w  ]   [ c0 ]
    [ 1^T     0 ] [ mu ] = [ 1  ]

where ``C`` is the covariance between observation sites, ``c0`` the
covariance between each site and the query point, and ``D`` is zero for
ordinary kriging and ``diag(m_hat / t_i)`` for Poisson kriging (the
Poisson noise variance of a rate observed for ``t_i`` seconds).

The matrix does not depend on the query point, so it is factorised once and
re-used for every right-hand side.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.linalg as spl
from scipy.spatial.distance import cdist

from .grid import GridSpec, write_grid_text
from .observations import observation_arrays

JITTER = 1e-10

OK = "OK"
PK = "PK"

# "kriging": C(0) - sum(w_i C_i0) - mu (minimum-variance prediction error)
# "covariance_sum": sum(w_i C_i0), the weighted covariance alone
VARIANCE_FORMS = ("kriging", "covariance_sum")


class KrigingError(RuntimeError):
    pass


@dataclass(frozen=True)
class KrigingWeights:
    weights: np.ndarray
    lagrange: float


class KrigingResult(NamedTuple):
    estimate: float
    variance: float
    weights: KrigingWeights


@dataclass(frozen=True)
class KrigingMap:
    spec: GridSpec
    estimate: np.ndarray
    variance: np.ndarray
    method: str = PK
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.estimate.shape != self.spec.shape or self.variance.shape != self.spec.shape:
            raise ValueError("estimate/variance shape does not match grid spec")

    def summary(self):
        return {
            "estimate_mean": float(self.estimate.mean()),
            "estimate_min": float(self.estimate.min()),
            "estimate_max": float(self.estimate.max()),
            "variance_mean": float(self.variance.mean()),
            "variance_max": float(self.variance.max()),
        }


def covariance_from_variogram(model, h):
    """``C(h) = sill - gamma(h)``."""
    return model.covariance(h)


def _system_matrix(xy, model, noise):
    n = len(xy)
    a = np.empty((n + 1, n + 1))
    a[:n, :n] = model.covariance(cdist(xy, xy))
    a[:n, :n] += np.diag(noise)
    a[n, :n] = 1.0
    a[:n, n] = 1.0
    a[n, n] = 0.0
    return a


def _factorise(a):
    n = len(a) - 1
    for attempt in range(2):
        lu, piv = spl.lu_factor(a, check_finite=True)
        d = np.abs(np.diag(lu))
        if np.all(d > np.finfo(float).eps * max(d.max(), 1.0)):
            return lu, piv
        if attempt == 0:
            a = a.copy()
            a[np.arange(n), np.arange(n)] += JITTER
    raise KrigingError(f"kriging system of size {n + 1} is singular")


class _Kriger:
    """Factorised kriging system for a fixed observation set."""

    def __init__(self, obs, model, m_hat=None, method=PK, variance_form="kriging"):
        if method not in (OK, PK):
            raise ValueError(f"unknown kriging method {method!r}")
        if variance_form not in VARIANCE_FORMS:
            raise ValueError(f"unknown variance form {variance_form!r}")
        xy, counts, t = observation_arrays(obs)
        n = len(t)
        if n == 0:
            raise KrigingError("no observations")
        if method == OK and n < 2:
            raise KrigingError("ordinary kriging needs at least 2 observations")
        if len(np.unique(xy, axis=0)) != n:
            raise KrigingError("observation locations must be distinct")
        if method == PK:
            if m_hat is None or not m_hat >= 0:
                raise KrigingError(f"Poisson kriging needs m_hat >= 0, got {m_hat}")
            noise = m_hat / t
        else:
            noise = np.zeros(n)
        self.xy = xy
        self.rates = counts / t
        self.model = model
        self.variance_form = variance_form
        self.lu, self.piv = _factorise(_system_matrix(xy, model, noise))

    def solve(self, points):
        """Weights ``(n, m)``, multipliers ``(m,)``, estimates and variances."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        n = len(self.xy)
        c0 = self.model.covariance(cdist(self.xy, points))
        rhs = np.vstack([c0, np.ones((1, len(points)))])
        sol = spl.lu_solve((self.lu, self.piv), rhs)
        w, mu = sol[:n], sol[n]
        est = self.rates @ w
        wc = np.sum(w * c0, axis=0)
        if self.variance_form == "kriging":
            var = self.model.covariance(0.0) - wc - mu
        else:
            var = wc
        return w, mu, est, var


def _single(kriger, x0, y0):
    w, mu, est, var = kriger.solve([[x0, y0]])
    return KrigingResult(
        max(float(est[0]), 0.0), max(float(var[0]), 0.0), KrigingWeights(w[:, 0].copy(), float(mu[0]))
    )


def solve_poisson_kriging(obs, model, m_hat, x0, y0, variance_form="kriging"):
    """Poisson-kriging estimate of the rate at ``(x0, y0)``."""
    return _single(_Kriger(obs, model, m_hat, PK, variance_form), x0, y0)


def solve_ordinary_kriging(obs, model, x0, y0, variance_form="kriging"):
    return _single(_Kriger(obs, model, None, OK, variance_form), x0, y0)


def krige_points(obs, model, points, m_hat=None, method=PK, variance_form="kriging"):
    """Estimates and variances at an ``(m, 2)`` array of points."""
    _, _, est, var = _Kriger(obs, model, m_hat, method, variance_form).solve(points)
    return np.maximum(est, 0.0), np.maximum(var, 0.0)


def krige_grid(obs, model, m_hat, spec, method=PK, variance_form="kriging", extra_points=None):
    """Krige every cell centre of ``spec``.

    With ``extra_points`` the same factorisation also serves those points and
    ``(map, extra_estimate, extra_variance)`` is returned.
    """
    kriger = _Kriger(obs, model, m_hat, method, variance_form)
    nodes = spec.node_coords()
    try:
        _, _, est, var = kriger.solve(nodes)
    except (ValueError, spl.LinAlgError) as exc:
        raise KrigingError(f"grid solve failed on {len(nodes)} nodes: {exc}") from exc
    bad = ~(np.isfinite(est) & np.isfinite(var))
    if bad.any():
        x, y = nodes[np.argmax(bad)]
        raise KrigingError(f"non-finite kriging result at node ({x}, {y})")
    kmap = KrigingMap(
        spec,
        np.maximum(est, 0.0).reshape(spec.shape),
        np.maximum(var, 0.0).reshape(spec.shape),
        method,
        {
            "method": method,
            "variogram": model.to_dict(),
            "m_hat": None if m_hat is None else float(m_hat),
            "n_observations": len(kriger.rates),
            "variance_form": variance_form,
            "n_clamped_estimate": int(np.count_nonzero(est < 0)),
            "n_clamped_variance": int(np.count_nonzero(var < 0)),
        },
    )
    if extra_points is None:
        return kmap
    _, _, e_est, e_var = kriger.solve(extra_points)
    return kmap, np.maximum(e_est, 0.0), np.maximum(e_var, 0.0)


def save_kriging_map(kmap, directory, stem):
    """Write ``<stem>_estimate.txt``, ``<stem>_variance.txt`` and ``<stem>.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_grid_text(directory / f"{stem}_estimate.txt", kmap.spec, kmap.estimate)
    write_grid_text(directory / f"{stem}_variance.txt", kmap.spec, kmap.variance)
    sidecar = dict(kmap.metadata)
    sidecar["grid"] = kmap.spec.to_dict()
    (directory / f"{stem}.json").write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
