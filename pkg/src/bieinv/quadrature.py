"""Gauss-Legendre rules and weighted-sum integration helpers."""

from collections import namedtuple

import numpy as np

from .errors import ConfigurationError, ContractViolation

QuadratureRule = namedtuple("QuadratureRule", ["nodes", "weights"])

MAX_ORDER = 32


def gauss_legendre(n):
    """Standard n-point rule on (-1, 1); exact through degree 2n-1."""
    if not (1 <= n <= MAX_ORDER):
        raise ConfigurationError(f"gauss_legendre order must be in 1..{MAX_ORDER}, got {n}")
    nodes, weights = np.polynomial.legendre.leggauss(int(n))
    return QuadratureRule(nodes, weights)


def gauss_on_interval(n, lo, hi):
    """n-point rule mapped to (lo, hi)."""
    rule = gauss_legendre(n)
    half = 0.5 * (hi - lo)
    return QuadratureRule(lo + half * (rule.nodes + 1.0), rule.weights * half)


def composite_gauss(n, panels, lo=0.0, hi=1.0):
    """Composite rule: `panels` equal panels of an n-point rule on (lo, hi)."""
    if panels < 1:
        raise ConfigurationError(f"panel count must be >= 1, got {panels}")
    nodes, weights = [], []
    edges = np.linspace(lo, hi, panels + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        r = gauss_on_interval(n, a, b)
        nodes.append(r.nodes)
        weights.append(r.weights)
    return QuadratureRule(np.concatenate(nodes), np.concatenate(weights))


def integrate(values, weights):
    """Weighted sum over matching node sets."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape:
        raise ContractViolation(
            f"integrate: {values.shape} values vs {weights.shape} weights"
        )
    if values.size == 0:
        return 0.0
    return float(values @ weights)
