"""Weekly protest forecasting from event, policy and search-trend streams."""

__version__ = "0.1.0"
