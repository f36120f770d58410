"""Mission loop: pick a sampling location, drive there, measure, re-krige.

Three strategies choose targets from a regular waypoint lattice using the
Poisson-kriging variance (KV) as the reward:

* ``Greedy`` - the unvisited waypoint with the highest KV.
* ``MonteCarlo`` - a waypoint drawn with probability proportional to KV.
* ``AdaptiveSampling`` - keeps a multi-target plan; after each update it
  drops targets whose KV is below the map's mean KV, tops the plan up with
  KV-weighted draws so the remaining time can still be filled, and re-orders
  it with an open-path TSP from the robot's position.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .kriging import PK, krige_grid, krige_points
from .metrics import mse
from .routing import plan_tsp_route
from .sensor import AMI, NEUTRAL_ENV, TICK_S, EnvConditions, SamplingRegime, simulate_measurement
from .variography import (
    DEFAULT_BIN_WIDTH,
    VariogramError,
    VariogramModel,
    empirical_variogram,
    fit_gaussian_model,
    weighted_mean_rate,
)

GREEDY = "Greedy"
MONTE_CARLO = "MonteCarlo"
ADAPTIVE = "AdaptiveSampling"
STRATEGIES = (GREEDY, MONTE_CARLO, ADAPTIVE)

MIN_FIT_MEASUREMENTS = 5
_STRATEGY_STREAM = 0
_MEASUREMENT_STREAM = 1
_RATE_EPS = 1e-6


class MissionConfigError(ValueError):
    pass


def bootstrap_variogram(spec):
    """Cold-start prior used until enough measurements exist to fit."""
    return VariogramModel(0.0, 0.25 * spec.diagonal, 1.0, "prior")


@dataclass(frozen=True)
class MissionConfig:
    strategy: str
    regime: SamplingRegime
    horizon: float
    seed: int = 0
    robot_speed: float = 1.0
    waypoint_spacing: float = 10.0
    bootstrap: VariogramModel | None = None
    env: EnvConditions = NEUTRAL_ENV
    bin_width: float = DEFAULT_BIN_WIDTH
    max_lag: float | None = None
    loss_scale: float = 1.0
    min_fit_measurements: int = MIN_FIT_MEASUREMENTS
    start: tuple | None = None
    mc_candidates: str = "lattice"
    mc_random_count: int = 50
    variance_form: str = "kriging"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise MissionConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if not self.horizon >= 0:
            raise MissionConfigError("horizon must be >= 0")
        if not self.robot_speed > 0:
            raise MissionConfigError("robot_speed must be > 0")
        if not self.waypoint_spacing > 0:
            raise MissionConfigError("waypoint_spacing must be > 0")
        if self.mc_candidates not in ("lattice", "random"):
            raise MissionConfigError("mc_candidates must be 'lattice' or 'random'")

    def to_dict(self):
        return {
            "strategy": self.strategy,
            "regime": self.regime.to_dict(),
            "horizon": float(self.horizon),
            "seed": int(self.seed),
            "robot_speed": float(self.robot_speed),
            "waypoint_spacing": float(self.waypoint_spacing),
            "bootstrap": None if self.bootstrap is None else self.bootstrap.to_dict(),
            "env": self.env.to_dict(),
            "bin_width": float(self.bin_width),
            "max_lag": None if self.max_lag is None else float(self.max_lag),
            "loss_scale": float(self.loss_scale),
            "min_fit_measurements": int(self.min_fit_measurements),
            "start": None if self.start is None else [float(v) for v in self.start],
            "mc_candidates": self.mc_candidates,
            "mc_random_count": int(self.mc_random_count),
            "variance_form": self.variance_form,
        }


@dataclass(frozen=True)
class CurvePoint:
    elapsed: float
    distance: float
    mse: float


@dataclass
class RunLog:
    header: dict
    records: list = field(default_factory=list)
    footer: dict = field(default_factory=dict)
    final_map: object = None
    trajectory: list = field(default_factory=list)

    @property
    def measurements(self):
        return [r["measurement"] for r in self.records]

    def curve(self):
        return [CurvePoint(r["elapsed"], r["distance"], r["mse"]) for r in self.records]

    def to_jsonl(self):
        lines = [json.dumps({"type": "header", **self.header}, sort_keys=True)]
        lines += [json.dumps({"type": "measurement", **r}, sort_keys=True) for r in self.records]
        lines.append(json.dumps({"type": "footer", **self.footer}, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text):
        header, records, footer = {}, [], {}
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.pop("type")
            if kind == "header":
                header = obj
            elif kind == "measurement":
                records.append(obj)
            elif kind == "footer":
                footer = obj
        trajectory = [tuple(p) for p in footer.get("trajectory", [])]
        return cls(header, records, footer, None, trajectory)

    def trajectory_csv(self):
        rows = ["x,y"] + [f"{float(x)!r},{float(y)!r}" for x, y in self.trajectory]
        return "\n".join(rows) + "\n"


def candidate_waypoints(spec, spacing):
    """Row-major lattice of waypoints with the given spacing, corners included.

    An axis shorter than ``spacing`` collapses to its centre coordinate.
    """
    if not spacing > 0:
        raise ValueError("spacing must be > 0")

    def axis(origin, length):
        if spacing > length:
            return np.array([origin + 0.5 * length])
        n = int(math.floor(length / spacing + 1e-9)) + 1
        return origin + spacing * np.arange(n)

    xs = axis(spec.origin_x, spec.width)
    ys = axis(spec.origin_y, spec.height)
    xx, yy = np.meshgrid(xs, ys)
    return np.column_stack([xx.ravel(), yy.ravel()])


def select_greedy(kv, candidates, current_pos, visited=None):
    """Index of the unvisited candidate with the largest KV, or ``None``.

    Ties go to the candidate nearest ``current_pos``, then the lowest index.
    """
    kv = np.asarray(kv, dtype=float)
    cand = np.asarray(candidates, dtype=float).reshape(-1, 2)
    avail = np.ones(len(cand), bool) if visited is None else ~np.asarray(visited, bool)
    if not avail.any():
        return None
    top = kv[avail].max()
    tied = np.flatnonzero(avail & (kv >= top - 1e-12 * abs(top)))
    dist = np.hypot(*(cand[tied] - np.asarray(current_pos, dtype=float)).T)
    return int(tied[np.lexsort((tied, dist))[0]])


def select_monte_carlo(kv, rng, visited=None):
    """Index drawn with probability ``KV_i / sum(KV)`` among unvisited candidates."""
    kv = np.asarray(kv, dtype=float)
    avail = np.ones(len(kv), bool) if visited is None else ~np.asarray(visited, bool)
    idx = np.flatnonzero(avail)
    if idx.size == 0:
        return None
    w = np.clip(kv[idx], 0.0, None)
    total = w.sum()
    p = w / total if total > 0 else np.full(idx.size, 1.0 / idx.size)
    return int(idx[rng.choice(idx.size, p=p)])


def expected_measurement_duration(regime, m_hat):
    if regime.kind != AMI:
        return float(regime.fmi_duration)
    if m_hat is None:
        return float(regime.max_duration)
    target = 1.0 / regime.ami_threshold**2
    d = TICK_S * math.ceil(target / max(m_hat, _RATE_EPS) / TICK_S)
    return float(min(d, regime.max_duration))


def minimum_plan_size(remaining_time, expected_duration, mean_leg_time):
    per_sample = expected_duration + mean_leg_time
    if remaining_time <= 0 or per_sample <= 0:
        return 0
    return int(math.floor(remaining_time / per_sample))


def adaptive_replan(
    plan,
    kv,
    mean_kv,
    candidates,
    visited,
    current_pos,
    n_min,
    rng,
):
    """Prune below-mean-KV targets, top up to ``n_min`` with KV-weighted
    draws from unvisited candidates, then TSP-order from ``current_pos``."""
    kv = np.asarray(kv, dtype=float)
    cand = np.asarray(candidates, dtype=float).reshape(-1, 2)
    kept = [k for k in plan if kv[k] >= mean_kv]
    taken = np.asarray(visited, bool).copy()
    taken[kept] = True
    while len(kept) < n_min:
        k = select_monte_carlo(kv, rng, taken)
        if k is None:
            break
        kept.append(k)
        taken[k] = True
    if not kept:
        return []
    order = plan_tsp_route(cand[kept], current_pos)
    return [kept[i] for i in order]


class _Mission:
    def __init__(self, config, truth):
        self.cfg = config
        self.truth = truth
        spec = truth.spec
        self.spec = spec
        self.candidates = candidate_waypoints(spec, config.waypoint_spacing)
        self.visited = np.zeros(len(self.candidates), bool)
        self.bootstrap = config.bootstrap or bootstrap_variogram(spec)
        self.max_lag = config.max_lag if config.max_lag is not None else 0.5 * spec.diagonal
        self.rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence([int(config.seed), _STRATEGY_STREAM]))
        )
        start = config.start if config.start is not None else (spec.origin_x, spec.origin_y)
        self.pos = (float(start[0]), float(start[1]))
        self.elapsed = 0.0
        self.distance = 0.0
        self.legs = []
        self.obs = []
        self.kv = None
        self.mean_kv = None
        self.m_hat = None
        self.model = self.bootstrap
        self.kmap = None
        self.plan = []
        self.trajectory = [self.pos]

    # target selection -------------------------------------------------
    def _center_index(self):
        c = np.asarray(self.spec.center)
        d = np.hypot(*(self.candidates - c).T)
        d[self.visited] = np.inf
        return int(np.argmin(d))

    def _mean_leg_time(self):
        if self.legs:
            return float(np.mean(self.legs)) / self.cfg.robot_speed
        return self.cfg.waypoint_spacing / self.cfg.robot_speed

    def _n_min(self):
        return minimum_plan_size(
            self.cfg.horizon - self.elapsed,
            expected_measurement_duration(self.cfg.regime, self.m_hat),
            self._mean_leg_time(),
        )

    def _initial_plan(self):
        n = min(max(self._n_min(), 1), len(self.candidates))
        picks = self.rng.choice(len(self.candidates), size=n, replace=False)
        picks = [int(k) for k in picks]
        order = plan_tsp_route(self.candidates[picks], self.pos)
        return [picks[i] for i in order]

    def next_target(self):
        if self.visited.all():
            return None
        strategy = self.cfg.strategy
        if strategy == ADAPTIVE:
            if not self.obs and not self.plan:
                self.plan = self._initial_plan()
            self.plan = [k for k in self.plan if not self.visited[k]]
            if not self.plan:
                return None
            k = self.plan[0]
            return k, tuple(self.candidates[k])
        if not self.obs:
            k = self._center_index()
            return k, tuple(self.candidates[k])
        if strategy == GREEDY:
            k = select_greedy(self.kv, self.candidates, self.pos, self.visited)
            return None if k is None else (k, tuple(self.candidates[k]))
        if self.cfg.mc_candidates == "random":
            pts = np.column_stack(
                [
                    self.rng.uniform(self.spec.origin_x, self.spec.origin_x + self.spec.width, self.cfg.mc_random_count),
                    self.rng.uniform(self.spec.origin_y, self.spec.origin_y + self.spec.height, self.cfg.mc_random_count),
                ]
            )
            _, kv = krige_points(self.obs, self.model, pts, self.m_hat, PK, self.cfg.variance_form)
            i = select_monte_carlo(kv, self.rng)
            return None, (float(pts[i, 0]), float(pts[i, 1]))
        k = select_monte_carlo(self.kv, self.rng, self.visited)
        return None if k is None else (k, tuple(self.candidates[k]))

    # model update ----------------------------------------------------
    def update_model(self):
        self.m_hat = weighted_mean_rate(self.obs)
        model = self.bootstrap
        if len(self.obs) >= self.cfg.min_fit_measurements:
            try:
                emp = empirical_variogram(self.obs, self.cfg.bin_width, self.max_lag)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    model = fit_gaussian_model(emp, self.bootstrap, self.cfg.loss_scale)
            except VariogramError:
                model = self.bootstrap
        self.model = model
        self.kmap, _, self.kv = krige_grid(
            self.obs,
            model,
            self.m_hat,
            self.spec,
            PK,
            self.cfg.variance_form,
            extra_points=self.candidates,
        )
        self.mean_kv = float(self.kmap.variance.mean())

    def run(self):
        cfg = self.cfg
        records = []
        k = 0
        exhausted = False
        while self.elapsed < cfg.horizon:
            choice = self.next_target()
            if choice is None:
                exhausted = True
                break
            idx, target = choice
            leg = math.hypot(target[0] - self.pos[0], target[1] - self.pos[1])
            travel = leg / cfg.robot_speed
            if self.elapsed + travel + TICK_S > cfg.horizon:
                break
            self.elapsed += travel
            self.distance += leg
            self.legs.append(leg)
            self.pos = (float(target[0]), float(target[1]))
            self.trajectory.append(self.pos)
            if idx is not None:
                self.visited[idx] = True
                if cfg.strategy == ADAPTIVE and self.plan and self.plan[0] == idx:
                    self.plan.pop(0)

            remaining_ticks = int(math.floor((cfg.horizon - self.elapsed) / TICK_S + 1e-9))
            meas = simulate_measurement(
                self.truth,
                self.pos[0],
                self.pos[1],
                cfg.regime,
                (int(cfg.seed), _MEASUREMENT_STREAM, k),
                cfg.env,
                max_ticks=remaining_ticks,
            )
            self.elapsed += meas.duration
            self.obs.append(meas.to_observation())
            self.update_model()
            err = mse(self.kmap.estimate, self.truth.rates)

            if cfg.strategy == ADAPTIVE:
                self.plan = adaptive_replan(
                    self.plan,
                    self.kv,
                    self.mean_kv,
                    self.candidates,
                    self.visited,
                    self.pos,
                    self._n_min(),
                    self.rng,
                )

            records.append(
                {
                    "index": k,
                    "target": [self.pos[0], self.pos[1]],
                    "leg_distance": leg,
                    "travel_time": travel,
                    "measurement": meas.to_dict(),
                    "elapsed": self.elapsed,
                    "distance": self.distance,
                    "variogram": self.model.to_dict(),
                    "m_hat": self.m_hat,
                    "mse": err,
                    "map": self.kmap.summary(),
                    "plan_size": len(self.plan) if cfg.strategy == ADAPTIVE else None,
                }
            )
            k += 1
        return records, exhausted


def run_mission(config, truth):
    """Simulate one mission over ``truth`` and return its :class:`RunLog`."""
    mission = _Mission(config, truth)
    records, exhausted = mission.run()
    header = {
        "config": config.to_dict(),
        "seed": int(config.seed),
        "grid": truth.spec.to_dict(),
        "truth": {k: v for k, v in truth.metadata.items()},
        "n_candidates": len(mission.candidates),
        "bootstrap": mission.bootstrap.to_dict(),
        "max_lag": mission.max_lag,
    }
    footer = {
        "n_measurements": len(records),
        "elapsed": mission.elapsed,
        "distance": mission.distance,
        "travel_time": float(sum(r["travel_time"] for r in records)),
        "measurement_time": float(sum(r["measurement"]["duration"] for r in records)),
        "final_mse": records[-1]["mse"] if records else None,
        "candidates_exhausted": exhausted,
        "trajectory": [[x, y] for x, y in mission.trajectory],
    }
    return RunLog(header, records, footer, mission.kmap, list(mission.trajectory))


def with_seed(config, seed):
    return replace(config, seed=int(seed))
