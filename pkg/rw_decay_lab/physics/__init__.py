"""Numerical core: geometry, special functions, Jost solutions, WKB, evolution, Mourre estimates, full wave"""
