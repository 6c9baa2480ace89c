"""Gate-level single-event-effect analysis: hierarchy clustering, SET/SEU
fault-injection campaigns and SVM-based node sensitivity prediction."""

__version__ = "0.1.0"
