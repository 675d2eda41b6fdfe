"""Tests for spectra-dd."""
