"""Exact and Monte Carlo checks of SLE martingales built from affine and Virasoro modules."""

__version__ = "0.1.0"
