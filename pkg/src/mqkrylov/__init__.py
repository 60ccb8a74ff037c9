"""Meshless multiquadric collocation for the 3D Helmholtz equation."""
