"""Fisher-Rao geometry of parametric families and perturbation robustness analysis."""

__version__ = "0.1.0"
