"""Experiment drivers, CSV and SVG output, validation checks and the CLI."""
