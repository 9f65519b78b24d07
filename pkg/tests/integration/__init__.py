"""Integration tests for the eal command line."""
