"""Video-to-trajectory benchmark: push simulator, tracker, VOT models and evaluation harness."""

__version__ = "0.1.0"
