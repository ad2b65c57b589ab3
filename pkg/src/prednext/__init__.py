"""Self-supervised spiking video encoders with cross-view future prediction."""

__version__ = "0.1.0"
