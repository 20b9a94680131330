"""Block floating point arithmetic and progressive-precision multigrid."""
__version__ = "0.1.0"
