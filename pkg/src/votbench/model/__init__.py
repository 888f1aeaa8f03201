"""Video-occupancy transformer models."""
