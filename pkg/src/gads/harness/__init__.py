"""Test scenes, experiment configs and runners, and the ``gads`` command."""
from .config import ArmConfig, ConfigError, ExperimentConfig, config_from_dict, load_config
from .experiment import CSV_COLUMNS, ArmResult, ExperimentReport, run_experiment, sweep
from .scenes import SUITE, SceneSpec, get_scene, make_scene_suite
