"""
Test suite for probcon
"""
