"""Annual emission forecasting: stationarity preprocessing, model zoo, stacking, recursive forecasts."""

__version__ = "0.1.0"
