"""Coded light-field toolbox.

Simulates spatio-spectrally coded light-field capture, reconstructs light
fields with compressed-sensing solvers (5D-DCT LASSO via OWL-QN, learned
dictionaries via FISTA), evaluates reconstruction and disparity quality,
trains a small two-head network with several multi-task and auxiliary-loss
weighting strategies, and solves the radiometric calibration of a
spectrally scanned camera.
"""

__version__ = "0.1.0"
