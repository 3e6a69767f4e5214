"""Numerical marginalization of the conditional evidence over the jitter."""
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from .errors import ConfigError
from .linear import laplace_log_evidence
from .priors import jitter_support, log_prior_jitter

__all__ = [
    "JitterGrid",
    "make_jitter_grid",
    "marginalize_jitter",
    "jitter_posterior",
    "jitter_log_profile",
    "JitterPosterior",
    "posterior_from_profile",
    "MIN_NODES",
    "DEFAULT_NODES",
]

MIN_NODES = 16
DEFAULT_NODES = 48
FLOOR_FRACTION = 1e-3


@dataclass(frozen=True, eq=False)
class JitterGrid:
    """Quadrature nodes and weights for ``int g(s) ds``.

    ``weights`` already contain the ``ds = s dlog(s)`` Jacobian; when the
    prior support reaches zero the first weight also carries the rectangle
    ``[0, nodes[0]]`` (``floor_weight``).
    """

    nodes: np.ndarray
    weights: np.ndarray
    rule: str = "trapezoid_log"
    floor_weight: float = 0.0

    def __post_init__(self):
        if self.rule not in ("trapezoid_log", "adaptive"):
            raise ConfigError(f"unknown jitter quadrature rule {self.rule!r}")
        if self.nodes.size < MIN_NODES:
            raise ConfigError(f"jitter grid needs at least {MIN_NODES} nodes")
        if np.any(np.diff(self.nodes) <= 0):
            raise ConfigError("jitter nodes must be strictly increasing")

    @property
    def log_weights(self):
        return np.log(self.weights)


def make_jitter_grid(priors, n_nodes=DEFAULT_NODES, rule="trapezoid_log"):
    """Log-spaced grid over the jitter prior support.

    The lower end is ``max(jitter_min, 1e-3 b0)``.  If ``jitter_min`` is zero
    the segment ``[0, floor]`` is added to the first node's weight, where the
    integrand is flat because the jitter is negligible next to every sigma_k
    at that scale.
    """
    lo, hi = jitter_support(priors)
    floor = max(lo, FLOOR_FRACTION * priors.b0)
    if floor >= hi:
        raise ConfigError("jitter support is empty after applying the floor")
    u = np.linspace(math.log(floor), math.log(hi), n_nodes)
    nodes = np.exp(u)
    nodes[0], nodes[-1] = floor, hi
    du = np.diff(u)
    w = np.zeros(n_nodes)
    w[:-1] += 0.5 * du
    w[1:] += 0.5 * du
    weights = w * nodes
    floor_weight = floor if lo == 0 else 0.0
    weights[0] += floor_weight
    return JitterGrid(nodes, weights, rule, floor_weight)


def jitter_log_profile(ts, design, priors, grid, flat_prior=False):
    """``laplace_log_evidence + log p(jitter)`` at every grid node."""
    ll = np.array(
        [laplace_log_evidence(ts, design, s, priors, flat_prior=flat_prior) for s in grid.nodes]
    )
    return ll + log_prior_jitter(grid.nodes, priors)


def marginalize_jitter(ts, design, priors, grid=None, flat_prior=False):
    """``log int exp(laplace_log_evidence(s)) p(s) ds`` over the jitter."""
    grid = make_jitter_grid(priors) if grid is None else grid
    if grid.rule == "adaptive":
        return _adaptive(ts, design, priors, grid, flat_prior)
    prof = jitter_log_profile(ts, design, priors, grid, flat_prior)
    return float(logsumexp(prof + grid.log_weights))


def _adaptive(ts, design, priors, grid, flat_prior):
    prof = jitter_log_profile(ts, design, priors, grid, flat_prior)
    ref = float(np.max(prof))
    lo = math.log(grid.nodes[0])
    hi = math.log(grid.nodes[-1])

    def integrand(u):
        s = math.exp(u)
        v = laplace_log_evidence(ts, design, s, priors, flat_prior=flat_prior)
        return math.exp(v + float(log_prior_jitter(s, priors)) - ref) * s

    # nodes as breakpoints keep quad from stepping over a narrow peak
    pts = np.log(grid.nodes[1:-1:4])
    val, _ = integrate.quad(integrand, lo, hi, points=pts, limit=400, epsrel=1e-10)
    if grid.floor_weight:
        val += math.exp(prof[0] - ref) * grid.floor_weight
    return ref + math.log(val)


@dataclass(frozen=True, eq=False)
class JitterPosterior:
    """Posterior over the jitter on quadrature nodes.

    ``density`` is per unit jitter (``sum(density * weights) == 1``);
    ``probabilities = density * weights`` sums to one.
    """

    nodes: np.ndarray
    weights: np.ndarray
    density: np.ndarray
    floor_mass: float

    @property
    def probabilities(self):
        return self.density * self.weights

    @property
    def mean(self):
        return float(np.sum(self.nodes * self.probabilities))

    @property
    def mode(self):
        return float(self.nodes[int(np.argmax(self.density))])

    def mass_above(self, s):
        return float(np.sum(self.probabilities[self.nodes > s]))


def posterior_from_profile(log_profile, grid):
    """Normalize a per-node log(evidence x prior) profile into a posterior."""
    lw = log_profile + grid.log_weights
    lz = logsumexp(lw)
    prob = np.exp(lw - lz)
    density = prob / grid.weights
    floor_mass = float(prob[0] * grid.floor_weight / grid.weights[0]) if grid.floor_weight else 0.0
    return JitterPosterior(grid.nodes, grid.weights, density, floor_mass)


def jitter_posterior(ts, design, priors, grid=None, flat_prior=False):
    """Posterior density of the jitter for a fixed design."""
    grid = make_jitter_grid(priors) if grid is None else grid
    return posterior_from_profile(jitter_log_profile(ts, design, priors, grid, flat_prior), grid)

