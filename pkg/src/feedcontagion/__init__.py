"""Network contagion laboratory: cascades, percolation theory, limited-attention
feed simulation, response-function estimation and visibility-based forecasts."""

__version__ = "0.1.0"
