"""MediaPipe Holistic adapter for the posemt external-process protocol."""

__version__ = "0.1.0"
