from .meter import CsvSchema, MeterSeries, load_meter_csv, write_meter_csv
from .params import ConstraintParams, estimate_params, max_relative_step
from .synth import SyntheticProcessConfig, synth_ground_truth
from .windows import WindowFilter, filter_window, to_samples

__all__ = ["CsvSchema", "MeterSeries", "load_meter_csv", "write_meter_csv", "ConstraintParams",
           "estimate_params", "max_relative_step", "SyntheticProcessConfig",
           "synth_ground_truth", "WindowFilter", "filter_window", "to_samples"]
