"""Toolkit for exponential Diophantine equations.

Decides solvability of congruences a1*b11^e11*... + ... = c modulo
composite moduli, searches for moduli witnessing that an equation has no
solutions, runs the bound-and-split solving strategy, and emits
independently verifiable text certificates.
"""

__version__ = "0.1.0"
