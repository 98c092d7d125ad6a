"""
fraglab: Hilbert-space fragmentation of a blockaded Rydberg chain and its lattice gauge theory image
"""

__version__ = "1.0.0"
