"""Sparse signal detection from compressive measurements at multiple nodes:
subspace decision statistic, minimum-support-fraction planner, OMP-based
centralized and distributed detectors, and a Monte Carlo harness."""

from . import detector, harness, model, omp, planner, specfun

__all__ = ["detector", "harness", "model", "omp", "planner", "specfun"]
__version__ = "0.1.0"
