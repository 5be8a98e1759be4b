"""Simulated robot-assisted tactile sensing pipeline for Borrmann-type gastric tumor classification."""

__version__ = "0.1.0"
