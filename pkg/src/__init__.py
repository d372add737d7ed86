"""
Quantum Walk Cages
Discrete-time quantum walks on the diamond chain and T3 lattice in a magnetic field
"""

__version__ = "0.1.0"
