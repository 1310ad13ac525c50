"""Writer identification with deep adaptive multi-task CNNs."""

__version__ = "0.1.0"
