"""Tests for the ductile package."""
