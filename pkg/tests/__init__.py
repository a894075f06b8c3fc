"""Tests for layout-prior-reasoning."""
