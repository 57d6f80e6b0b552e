"""Render figures from the svagree CSV report contracts."""

__version__ = "0.1.0"
