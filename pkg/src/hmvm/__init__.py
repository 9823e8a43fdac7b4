"""Hermite moment solver for the Vlasov-Maxwell and Vlasov-Ampere systems."""

__version__ = "0.1.0"
