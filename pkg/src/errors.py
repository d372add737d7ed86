"""
Quantum Walk Errors
Exception hierarchy shared by the lattice, coin, walk, spectrum and caging layers
"""


class QuantumWalkError(ValueError):
    """Base class for every error raised by the simulation library."""


class LatticeError(QuantumWalkError):
    """Invalid extent, unknown site kind or unknown plaquette."""


class DanglingEdgeError(LatticeError):
    """An open-boundary edge state has no partner on the finite lattice."""


class NonAdjacentError(LatticeError):
    """Two basis states do not share an edge."""


class GaugeError(QuantumWalkError):
    """Flux value not representable by the requested gauge variant."""


class CoinError(QuantumWalkError):
    """Coin dimension mismatch, non-unitary coin or unparseable coin spec."""


class NotUnitaryError(QuantumWalkError):
    """A matrix expected to be unitary failed the unitarity check."""


class FormulaDomainError(QuantumWalkError):
    """A closed-form band expression was evaluated outside its domain."""


class NotCagedError(QuantumWalkError):
    """A cage-only quantity was requested for an uncaged walk."""


class NoOutChannelError(QuantumWalkError):
    """The rim coin reflects completely, so nothing is transmitted."""


class LatticeTooSmallError(LatticeError):
    """The finite lattice cannot contain the requested experiment."""


class ConfigError(QuantumWalkError):
    """Experiment configuration failed validation."""
