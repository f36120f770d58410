"""Poisson kriging and kriging-variance driven exploration for cosmic-ray
neutron soil-moisture mapping."""

from .evaluation import AggregateCurve, aggregate_runs, compare_conditions
from .exploration import MissionConfig, RunLog, run_mission
from .field import RateField, build_surrogate_from_observations, make_step_field, rate_at
from .grid import GridSpec
from .kriging import KrigingMap, krige_grid, solve_ordinary_kriging, solve_poisson_kriging
from .metrics import mse
from .observations import ObservationRecord, load_observations_csv
from .sensor import EnvConditions, Measurement, SamplingRegime, simulate_measurement
from .variography import VariogramModel, empirical_variogram, fit_gaussian_model, weighted_mean_rate

__version__ = "0.1.0"
