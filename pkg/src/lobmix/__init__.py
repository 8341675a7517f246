"""Deep recurrent mixture-density forecasting of tick-quantized price moves."""

__version__ = "0.1.0"
