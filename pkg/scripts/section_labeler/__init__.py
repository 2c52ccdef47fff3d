"""
Radiology Report Section Labeler Package

This package labels every sentence of a free-text radiology report with one
of seven section categories, using weak supervision to bootstrap training
data and a stacked ensemble of three complementary classifiers.
"""

__version__ = "1.0.0"
