"""
Minimal neural building blocks: layers, Adam, training loop, gradient checks
"""
