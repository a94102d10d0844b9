"""Linear representations of nonlinear ODEs: Carleman truncation, EDMD,
Koopman-von Neumann wave mechanics and upwind Liouville/master equations."""

__version__ = "0.1.0"
