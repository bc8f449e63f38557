"""Adaptive multi-band NOM-precoded FTN-NOFDM link simulator."""
__version__ = "0.1.0"
