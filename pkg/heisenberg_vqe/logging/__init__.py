"""
Logging modules for Heisenberg VQE
"""
