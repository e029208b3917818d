"""
Test suite for the tissue growth package.
"""
