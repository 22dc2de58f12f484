"""
Configuration modules for Heisenberg VQE
"""
