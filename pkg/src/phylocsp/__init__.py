"""Phylogenetic constraint satisfaction workbench."""

__version__ = "0.1.0"
