"""Maximally entangled states, perfect correlations, and the impossibility of
non-contextual value maps, with a pilot-wave model of contextual spin
measurement."""

__version__ = "0.1.0"
