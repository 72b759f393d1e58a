"""Influence scoring for year-stamped corpora via linguistic-change cascades."""

__version__ = "0.1.0"
