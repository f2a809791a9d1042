"""Pseudo-spectral solver for the primitive equations with mixed top/bottom boundary conditions."""
