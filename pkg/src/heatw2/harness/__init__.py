from .config import ConfigError, ExperimentConfig, SmoothingSettings, TransportSettings, load_config
from .experiment import run_experiment, sample_process, summarize
from .fit import RateFit, fit_power, fit_rate
from .records import COLUMNS, ExperimentRecord, mean_w2, read_records, write_records
