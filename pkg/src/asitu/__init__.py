"""Affective situation labeling from egocentric video, accelerometer and EEG."""

__version__ = "0.1.0"
