"""Unit tests for ergodic-lab components."""
