"""Core numerics: array geometry, simulation, STCM, the approximated STCM, configuration and the bench."""
