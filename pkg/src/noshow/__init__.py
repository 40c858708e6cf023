"""No-show risk scoring, explanation, and intervention-group tuning."""

__version__ = "0.1.0"
