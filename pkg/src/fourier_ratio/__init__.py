"""Fourier ratio toolkit: regularised frequency norms of measures, decay exponents and synthesis thresholds."""

__version__ = "0.1.0"
