"""cipherflow: authenticated homomorphic encryption with data-flow checking."""

__version__ = "0.1.0"
