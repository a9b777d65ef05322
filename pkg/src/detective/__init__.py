"""Detective: evidential active learning for multi-source domain adaptation."""

__version__ = "0.1.0"
