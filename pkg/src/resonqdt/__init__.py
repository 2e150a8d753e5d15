"""Two-channel bound states and Feshbach resonances by two methods.

A mapped Fourier grid Hamiltonian with an optical potential and a
generalized multichannel quantum defect treatment with optimized
reference functions, cross-validated on a synthetic spin-orbit model.
"""

__version__ = "0.1.0"
