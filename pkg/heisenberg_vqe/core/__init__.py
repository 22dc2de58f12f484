"""
Core functionality modules for Heisenberg VQE
"""
