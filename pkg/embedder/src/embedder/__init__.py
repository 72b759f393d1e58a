"""Inputs for the cascade-influence core: contextual embeddings, language
filtering, and topic features, exchanged through its documented file formats."""

__version__ = "0.1.0"
