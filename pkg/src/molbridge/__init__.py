"""Molecular-generation benchmark toolkit.

SMILES chemistry core (parsing, canonicalization, fingerprints, descriptors,
scaffolds), SLERP-based latent-space bridge generation with a pluggable
decoder protocol, and the KPI pipeline that scores generation runs.
"""

__version__ = "0.1.0"
