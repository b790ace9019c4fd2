"""
Test package for ASTRA AoI Tools.
"""
