"""Numerical workbench for the mean-field / quadratic-fluctuation pipeline of
finite-mode boson systems, with exact-diagonalization cross checks.

Subpackages and modules:

* ``eigen``       spectral kernels (dense, Lanczos, PSD square root, trace norm)
* ``model``       finite-mode systems (T, W), generators, file format
* ``hartree``     mean-field minimization and excitation-space operators
* ``quadratic``   quadratic boson Hamiltonians: frequencies, transform, thermal sums
* ``fock``        occupation bases, sparse second quantization, relabeling unitary
* ``experiments`` study runners and the ``bogobench`` CLI
"""

__version__ = "0.1.0"

from . import eigen, errors, fock, hartree, model, quadratic  # noqa: F401
