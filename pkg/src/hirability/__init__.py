"""Hirability prediction from behavioral cues via apparent-personality estimates."""

__version__ = "0.1.0"
