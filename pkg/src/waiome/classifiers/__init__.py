"""Classifier families: KNN, kernel SVM, random forest, FNN and CNN."""
from .features import Standardizer, flatten, unflatten
from .models import ModelSpec, TrainedModel, fit_model, load_model, save_model

__all__ = ["ModelSpec", "Standardizer", "TrainedModel", "fit_model", "flatten", "load_model", "save_model", "unflatten"]
