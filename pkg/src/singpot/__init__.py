"""Potentials and the Dirichlet problem for the multi-singular elliptic
operator ``Delta u + sum_k (2 alpha_k / x_k) u_{x_k}``.

Submodules: specialfun, lauricella, kernels, geometry, potentials,
dirichlet, cli. Import them directly; the package itself stays light so
the command-line entry point can configure threads before numpy loads.
"""

__version__ = "0.1.0"
