from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .experiment import execute, run_experiment
from .report import ExperimentResult, emit_report, report_schema

__all__ = ['ConfigError', 'ExperimentConfig', 'load_config', 'parse_config', 'execute', 'run_experiment',
           'ExperimentResult', 'emit_report', 'report_schema']
