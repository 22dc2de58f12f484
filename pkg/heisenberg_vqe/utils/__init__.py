"""
Utility modules for Heisenberg VQE
"""
