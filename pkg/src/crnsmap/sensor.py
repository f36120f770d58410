"""Fast-neutron counting sensor simulation.

The sensor reports a Poisson count every 10 s tick. A measurement at one
location accumulates ticks until its sampling regime says stop:

* FMI (fixed measurement interval): a fixed number of ticks.
* AMI (adaptive measurement interval): until the relative standard error of
  the accumulated corrected count, ``1 / sqrt(N)``, drops to the threshold,
  i.e. ``N >= ceil(1 / theta^2)``, or until ``max_duration``.

Every measurement draws from its own Philox stream keyed by
``(run_seed, measurement_index)``; the same key always reproduces the same
measurement.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .observations import ObservationRecord

TICK_S = 10.0
DEFAULT_AMI_MAX_DURATION = 1800.0
HUMIDITY_COEFF = 0.00054

FMI = "FMI"
AMI = "AMI"


class SensorError(ValueError):
    pass


@dataclass(frozen=True)
class EnvConditions:
    """Correction inputs: cosmic-ray monitor rate, barometric pressure and
    absolute humidity with their calibration references.

    The defaults are neutral, giving unit correction factors.
    """

    cosmic_rate: float = 1.0
    cosmic_ref: float = 1.0
    pressure: float = 1013.25
    pressure_ref: float = 1013.25
    beta: float = 0.0
    humidity: float = 0.0
    humidity_ref: float = 0.0

    def __post_init__(self):
        for name in ("cosmic_rate", "cosmic_ref", "pressure", "pressure_ref"):
            if not getattr(self, name) > 0:
                raise SensorError(f"{name} must be > 0, got {getattr(self, name)}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise SensorError(f"unknown env keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})


NEUTRAL_ENV = EnvConditions()


def correction_factors(env):
    """Return ``(F_C, F_P, F_Q)`` for cosmic intensity, pressure and humidity."""
    if env.cosmic_rate == 0:
        raise ZeroDivisionError("cosmic-ray monitor rate is zero")
    f_c = env.cosmic_ref / env.cosmic_rate
    f_p = math.exp(env.beta * (env.pressure - env.pressure_ref))
    f_q = 1.0 + HUMIDITY_COEFF * (env.humidity - env.humidity_ref)
    if f_q <= 0:
        raise SensorError(f"humidity correction factor {f_q} is not positive")
    return f_c, f_p, f_q


def correct_counts(n_raw, env=NEUTRAL_ENV):
    if n_raw < 0:
        raise SensorError("raw counts must be >= 0")
    f_c, f_p, f_q = correction_factors(env)
    return n_raw * f_p * f_q * f_c


def measurement_sigma(lambda_hat, n_crr):
    """Standard error of a rate estimated from ``n_crr`` counts."""
    if not n_crr > 0:
        raise SensorError(f"n_crr must be > 0, got {n_crr}")
    return lambda_hat * math.sqrt(n_crr) / n_crr


def ami_count_target(theta):
    """Smallest count ``N`` with ``1 / sqrt(N) <= theta``."""
    # guard against 1/theta**2 landing a few ulps above an integer
    return math.ceil(1.0 / theta**2 * (1.0 - 1e-12))


@dataclass(frozen=True)
class SamplingRegime:
    kind: str
    fmi_duration: float | None = None
    ami_threshold: float | None = None
    max_duration: float = DEFAULT_AMI_MAX_DURATION

    def __post_init__(self):
        if self.kind == FMI:
            d = self.fmi_duration
            if d is None or d <= 0 or not math.isclose(d / TICK_S, round(d / TICK_S)):
                raise SensorError(f"FMI duration must be a positive multiple of {TICK_S:g} s, got {d}")
        elif self.kind == AMI:
            th = self.ami_threshold
            if th is None or not 0 < th < 1:
                raise SensorError(f"AMI threshold must lie in (0, 1), got {th}")
            if self.max_duration < TICK_S:
                raise SensorError(f"AMI max_duration must be >= {TICK_S:g} s")
        else:
            raise SensorError(f"unknown sampling regime {self.kind!r}")

    @classmethod
    def fmi(cls, duration):
        return cls(FMI, fmi_duration=float(duration))

    @classmethod
    def ami(cls, threshold, max_duration=DEFAULT_AMI_MAX_DURATION):
        return cls(AMI, ami_threshold=float(threshold), max_duration=float(max_duration))

    @property
    def max_ticks(self):
        if self.kind == FMI:
            return int(round(self.fmi_duration / TICK_S))
        return int(self.max_duration // TICK_S)

    @property
    def label(self):
        if self.kind == FMI:
            return f"FMI-{self.fmi_duration:g}s"
        return f"AMI-{100 * self.ami_threshold:g}%"

    def to_dict(self):
        if self.kind == FMI:
            return {"kind": FMI, "fmi_duration": self.fmi_duration}
        return {"kind": AMI, "ami_threshold": self.ami_threshold, "max_duration": self.max_duration}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"kind", "fmi_duration", "ami_threshold", "max_duration"}
        if unknown:
            raise SensorError(f"unknown regime keys: {sorted(unknown)}")
        if d.get("kind") not in (FMI, AMI):
            raise SensorError(f"regime kind must be {FMI!r} or {AMI!r}, got {d.get('kind')!r}")
        if d["kind"] == FMI:
            return cls.fmi(d.get("fmi_duration", 600.0))
        return cls.ami(d.get("ami_threshold", 0.025), d.get("max_duration", DEFAULT_AMI_MAX_DURATION))


@dataclass(frozen=True)
class Measurement:
    x: float
    y: float
    ticks: int
    raw_counts: int
    corrected_counts: float
    duration: float
    rate: float
    sigma: float | None
    sigma_rel: float | None
    threshold_reached: bool
    truncated: bool = False

    def to_observation(self):
        return ObservationRecord(self.x, self.y, self.duration, self.corrected_counts)

    def to_dict(self):
        return asdict(self)


def measurement_rng(rng_seed):
    """Philox generator for an int seed or a ``(run_seed, index)`` key."""
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    entropy = list(rng_seed) if isinstance(rng_seed, (tuple, list)) else int(rng_seed)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def simulate_ticks(rate, n_ticks, rng_seed):
    """Raw Poisson counts for ``n_ticks`` consecutive ticks at ``rate`` counts/s."""
    if not rate >= 0:
        raise SensorError("rate must be >= 0")
    return measurement_rng(rng_seed).poisson(rate * TICK_S, size=int(n_ticks))


def simulate_measurement(field, x, y, regime, rng_seed, env=NEUTRAL_ENV, max_ticks=None):
    """Dwell at ``(x, y)`` and count neutrons until ``regime`` stops.

    ``max_ticks`` imposes an external cap (e.g. the remaining mission time);
    a measurement cut short by it is flagged ``truncated``.
    """
    lam = field.rate_at(x, y)
    limit = regime.max_ticks
    truncated = False
    if max_ticks is not None:
        if max_ticks < 1:
            raise SensorError("a measurement needs at least one tick")
        if max_ticks < limit:
            limit, truncated = int(max_ticks), True

    draws = simulate_ticks(lam, limit, rng_seed)
    factor = float(np.prod(correction_factors(env)))

    if regime.kind == FMI:
        ticks = limit
        reached = not truncated
    else:
        target = ami_count_target(regime.ami_threshold)
        cum = np.cumsum(draws) * factor
        hit = np.flatnonzero(cum >= target)
        if hit.size:
            ticks = int(hit[0]) + 1
            reached = True
            truncated = False
        else:
            ticks = limit
            reached = False

    raw = int(draws[:ticks].sum())
    n_crr = raw * factor
    duration = ticks * TICK_S
    rate = n_crr / duration
    if n_crr > 0:
        sigma = measurement_sigma(rate, n_crr)
        sigma_rel = 1.0 / math.sqrt(n_crr)
    else:
        sigma = sigma_rel = None
    return Measurement(
        float(x), float(y), ticks, raw, n_crr, duration, rate, sigma, sigma_rel, reached, truncated
    )
