"""
Numerical modules for the suspension-bridge simulator.
"""
