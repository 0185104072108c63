"""Day-to-day route choice with human logit learners and deep-Q AVs."""

__version__ = "0.1.0"
