"""Semiclassical expansion of oscillatory integrals.

Diagrammatic small-h asymptotics of integrals with phases exp(i f(x)/h),
including fermionic and gauge-fixed variants, checked against quadrature
and Berezin-integral oracles.  See the README for the CLI.
"""

__version__ = "0.1.0"
