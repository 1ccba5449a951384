"""Semi-blind tensor receivers for RIS-aided fluid-antenna uplinks."""

__version__ = "0.1.0"
