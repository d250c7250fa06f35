"""Cohort comfort models: predict a new occupant's thermal preference from similar occupants."""

__version__ = "0.1.0"
