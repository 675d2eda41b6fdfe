"""Terminal UI components for Spectra DD."""
