"""
wimo: wideband direction-of-arrival estimation by modal orthogonality,
with the space-frequency baselines and a Monte Carlo bench.
"""

__version__ = "0.1.0"
