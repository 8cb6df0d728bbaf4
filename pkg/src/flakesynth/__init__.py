"""flakesynth - synthetic microscopy data and contrast-space flake detection for 2D materials."""

__version__ = "0.1.0"
__author__ = "flakesynth developers"
__description__ = "Physics-based synthetic microscopy data engine for 2D material flakes with contrast-space classifiers and AP50 evaluation"
