"""Waymo Open Motion Dataset scenario shards -> trajeval scene files."""

__version__ = "0.1.0"
