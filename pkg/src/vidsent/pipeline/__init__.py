"""File-based pipeline stages, configuration and the command-line interface."""

from .config import Config, ConfigError, apply_override, load_config
from .commands import (Artifacts, cmd_describe, cmd_eval, cmd_featurize, cmd_synth, cmd_track,
                       cmd_train, cmd_train_codebook, describe_stream, track_stream)

__all__ = ["Config", "ConfigError", "apply_override", "load_config", "Artifacts",
           "cmd_describe", "cmd_eval", "cmd_featurize", "cmd_synth", "cmd_track", "cmd_train",
           "cmd_train_codebook", "describe_stream", "track_stream"]
