"""Wind-turbine power curves with Monte-Carlo-dropout uncertainty, in numpy."""
from .data import ColumnMapping, DataError, FeatureSpec, load_scada
from .model import Network, NetworkConfig, init_network
from .train import Checkpoint, TrainConfig, load_checkpoint, save_checkpoint, train
from .uq import McConfig, PredictiveSummary, summarize

__version__ = "0.1.0"

__all__ = [
    "ColumnMapping", "DataError", "FeatureSpec", "load_scada", "Network", "NetworkConfig",
    "init_network", "Checkpoint", "TrainConfig", "load_checkpoint", "save_checkpoint", "train",
    "McConfig", "PredictiveSummary", "summarize",
]
