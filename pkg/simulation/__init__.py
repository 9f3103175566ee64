"""
Simulation package initialization
"""
