"""
Utility functions for section labeling
"""
