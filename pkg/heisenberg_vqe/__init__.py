"""
Heisenberg VQE - variational ground states of the Heisenberg antiferromagnet

This package emulates the variational quantum eigensolver with the Hamiltonian
variational ansatz on chains and kagome lattices, with exact references,
native-gate compilation and experiment bookkeeping.
"""

__version__ = "1.0.0"
