"""Command-line tools, presets and experiment runners for Spectra DD."""
