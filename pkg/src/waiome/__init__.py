"""Wideband absorbance grid analysis: resampling, rank-sum maps, classifiers
and discriminative-region extraction."""
from .grid import Cohort, EarLabel, ParseError, ValidationError, WaiImage, load_cohort, save_cohort

__version__ = "0.1.0"

__all__ = ["Cohort", "EarLabel", "ParseError", "ValidationError", "WaiImage", "load_cohort", "save_cohort", "__version__"]
