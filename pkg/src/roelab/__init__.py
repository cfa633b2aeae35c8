"""roelab: a desk-scale numerical laboratory for band and quasi-local operators
on finite metric spaces."""

__version__ = "0.1.0"
