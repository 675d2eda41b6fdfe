"""Core models and solvers for Spectra DD."""
