"""Operator algebra, boson mapping and spectra for a trapped magnetic rigid rotor."""

__version__ = "0.1.0"
