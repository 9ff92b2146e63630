"""Numerical laboratory for scale-invariant blow-up on sector domains.

Modules:
    angular_field  angular grids, parity-tagged fields, Hölder norm estimators
    elliptic_1d    the angular problem 4G + G'' = g with Dirichlet ends
    evolve_1d      method-of-lines integration of the angular (g, P) system
    ode_blowup     Riccati comparison and acute-corner ODEs
    sector_green   Green's-function calculus and probes on sectors
    cli            command-line dispatcher (``sector-blowup``)
"""

__version__ = "0.1.0"
