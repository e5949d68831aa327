"""
Init file for the vortexforge library
"""
