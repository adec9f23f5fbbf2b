from .layers import Conv1d, Dense, Flatten, Lstm, MaxPool1, MultiHeadAttention
from .model import PROFILES, CarleNet, ModelProfile, ResCnnUnit, get_profile
from .train import RmsProp, TrainConfig, TrainReport, train

__all__ = [
    "Conv1d",
    "Dense",
    "Flatten",
    "Lstm",
    "MaxPool1",
    "MultiHeadAttention",
    "PROFILES",
    "CarleNet",
    "ModelProfile",
    "ResCnnUnit",
    "get_profile",
    "RmsProp",
    "TrainConfig",
    "TrainReport",
    "train",
]
