"""Stabilization of finite-energy GKP states with ST, BsB and sBs protocols."""
__version__ = "0.1.0"
