"""Polarisation transfer from NV centres to nuclear spins: rates, baths and yields."""

__version__ = "0.1.0"
