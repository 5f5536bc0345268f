"""Predictive distance fields, goal-aware human trajectory prediction and
receding-horizon GP motion planning on planar grids."""

__version__ = "0.1.0"
