"""Single source of the package version string embedded in run summaries."""

VERSION = "0.1.0"
