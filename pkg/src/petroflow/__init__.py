"""Steady-state optimization and nodal pricing for liquid pipeline networks."""

from .network import Network, load_network, parse_network, serialize_network, validate_network

__version__ = "0.1.0"

__all__ = ["Network", "load_network", "parse_network", "serialize_network", "validate_network", "__version__"]
