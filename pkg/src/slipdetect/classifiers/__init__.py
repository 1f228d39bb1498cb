from .base import SLIP, STATIC, NumericError, Prediction, SlipClassifier, TrainingError, label_from_score
from .logreg import LogisticSlipClassifier
from .svm import SMOSlipClassifier
from .threshold import ThresholdSlipClassifier

__all__ = ["SLIP", "STATIC", "NumericError", "Prediction", "SlipClassifier", "TrainingError",
           "label_from_score", "LogisticSlipClassifier", "SMOSlipClassifier",
           "ThresholdSlipClassifier"]
