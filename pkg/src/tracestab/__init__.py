"""Trace constants and stability diagnostics."""
