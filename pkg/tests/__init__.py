"""
Test suite for Documentation Tester.
"""

