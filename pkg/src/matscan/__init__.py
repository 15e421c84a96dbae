"""Synthetic appearance-capture pipeline: photometric scan simulation,
bivariate reflectance-table estimation, material segmentation by propagation,
and re-rendering with quantitative evaluation."""

__version__ = "0.1.0"
