"""Joint compression and M-QAM transmission policies for sensor-node lifetime."""

__version__ = "0.1.0"
