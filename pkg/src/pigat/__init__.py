"""Dynamic-graph recommender with pairwise attention and manual gradients."""

__version__ = "0.1.0"
