"""Posterior over model size, Bayes factors and derived marginals."""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import SurrogateError
from .linear import build_design, fit_linear, uncenter_coefficients
from .priors import log_prior_nd, log_prior_nf

__all__ = [
    "ModelPosterior",
    "assemble_posterior",
    "amplitude_phase",
    "BinnedDensity",
    "frequency_marginal",
    "period_marginal",
    "delta_posterior",
    "harmonic_overlap",
    "overlap_report",
    "summarize_tuple",
]


@dataclass(eq=False)
class ModelPosterior:
    """Posterior probabilities over ``(nf, nd)``.

    ``log_evidence[i, j]`` and ``probability[i, j]`` refer to
    ``nf = nf_values[i]``, ``nd = nd_values[j]``; truncated cells hold
    ``nan`` evidence and exactly zero probability.
    """

    nf_values: np.ndarray
    nd_values: np.ndarray
    log_evidence: np.ndarray
    log_prior: np.ndarray
    probability: np.ndarray
    truncated: np.ndarray
    nf_stop: int

    @property
    def nf_probability(self):
        return self.probability.sum(axis=1)

    @property
    def nd_probability(self):
        return self.probability.sum(axis=0)

    def bayes_factor(self, n):
        """``B_{n+1,n} = p(nf=n+1 | data) / p(nf=n | data)``, nd marginalized."""
        p = self.nf_probability
        if n + 1 >= p.size or p[n] == 0:
            return math.nan
        return float(p[n + 1] / p[n])

    def bayes_factor_at_nd(self, n, nd):
        j = int(np.flatnonzero(self.nd_values == nd)[0])
        if n + 1 >= self.probability.shape[0] or self.probability[n, j] == 0:
            return math.nan
        return float(self.probability[n + 1, j] / self.probability[n, j])

    @property
    def map_model(self):
        i, j = np.unravel_index(int(np.argmax(self.probability)), self.probability.shape)
        return int(self.nf_values[i]), int(self.nd_values[j])

    @property
    def map_nf(self):
        return int(self.nf_values[int(np.argmax(self.nf_probability))])

    def to_dict(self):
        models = []
        for i, nf in enumerate(self.nf_values):
            for j, nd in enumerate(self.nd_values):
                le = self.log_evidence[i, j]
                models.append({
                    "nf": int(nf),
                    "nd": int(nd),
                    "log_evidence": None if not np.isfinite(le) else float(le),
                    "log_prior": float(self.log_prior[i, j]),
                    "probability": float(self.probability[i, j]),
                    "truncated": bool(self.truncated[i, j]),
                })
        bf = {}
        bf_nd = {}
        for n in range(self.nf_values.size - 1):
            v = self.bayes_factor(n)
            bf[f"{n + 1},{n}"] = None if math.isnan(v) else v
            for nd in self.nd_values:
                v = self.bayes_factor_at_nd(n, int(nd))
                bf_nd.setdefault(str(int(nd)), {})[f"{n + 1},{n}"] = None if math.isnan(v) else v
        return {
            "models": models,
            "nf_probability": [float(v) for v in self.nf_probability],
            "nd_probability": [float(v) for v in self.nd_probability],
            "bayes_factors": bf,
            "bayes_factors_by_nd": bf_nd,
            "nf_stop": self.nf_stop,
            "map_model": {"nf": self.map_model[0], "nd": self.map_model[1]},
        }


def assemble_posterior(per_model_evidence, priors, nf_stop=None):
    """Normalize ``evidence x p(nf) x p(nd)`` over the evaluated table.

    Parameters
    ----------
    per_model_evidence : dict
        ``{(nf, nd): log_evidence}``.  Every cell with ``nf <= nf_stop`` and
        ``nd_min <= nd <= nd_max`` must be present.
    nf_stop : int, optional
        Models with more sinusoids get zero probability and a truncation
        marker.  Defaults to ``priors.nf_max``.
    """
    nf_stop = priors.nf_max if nf_stop is None else nf_stop
    nf_values = np.arange(priors.nf_max + 1)
    nd_values = np.arange(priors.nd_min, priors.nd_max + 1)
    shape = (nf_values.size, nd_values.size)
    le = np.full(shape, np.nan)
    lp = np.empty(shape)
    trunc = np.zeros(shape, dtype=bool)
    for i, nf in enumerate(nf_values):
        for j, nd in enumerate(nd_values):
            lp[i, j] = log_prior_nf(int(nf), priors) + log_prior_nd(int(nd), priors)
            if nf > nf_stop:
                trunc[i, j] = True
                continue
            key = (int(nf), int(nd))
            if key not in per_model_evidence:
                raise SurrogateError(f"missing evidence for model nf={nf}, nd={nd}")
            le[i, j] = per_model_evidence[key]
    logpost = np.where(trunc, -np.inf, le + lp)
    logpost = np.where(np.isnan(logpost), -np.inf, logpost)
    z = logsumexp(logpost)
    if not np.isfinite(z):
        raise SurrogateError("every model has zero evidence")
    prob = np.exp(logpost - z)
    return ModelPosterior(nf_values, nd_values, le, lp, prob, trunc, int(nf_stop))


def amplitude_phase(s, c):
    """``(A, phi)`` with ``A = hypot(S, C)`` and ``phi = atan2(-S, C)``.

    ``(0, 0)`` maps to ``(0, 0)``.  The phase lies in ``(-pi, pi]``.
    """
    amp = math.hypot(s, c)
    if amp == 0:
        return 0.0, 0.0
    phi = math.atan2(-s, c)
    if phi == -math.pi:
        phi = math.pi
    return amp, phi


@dataclass(frozen=True, eq=False)
class BinnedDensity:
    """Piecewise-constant density: ``density[i]`` on ``[edges[i], edges[i+1])``."""

    edges: np.ndarray
    density: np.ndarray

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def mass(self):
        return self.density * self.widths

    @property
    def total(self):
        return float(np.sum(self.mass))

    @property
    def mode(self):
        return float(self.centers[int(np.argmax(self.density))])

    @classmethod
    def from_mass(cls, edges, mass):
        edges = np.asarray(edges, dtype=float)
        return cls(edges, np.asarray(mass, dtype=float) / np.diff(edges))

    def mass_within(self, lo, hi):
        c = self.centers
        return float(np.sum(self.mass[(c >= lo) & (c <= hi)]))


def _mix(scans, weights, fn):
    if weights is None:
        weights = np.ones(len(scans))
    weights = np.asarray(weights, dtype=float)
    weights = weights / weights.sum()
    return sum(w * fn(s) for s, w in zip(scans, weights) if w > 0)


def _as_list(scans):
    return list(scans) if isinstance(scans, (list, tuple)) else [scans]


def frequency_marginal(scans, slot, weights=None):
    """Marginal posterior of frequency ``slot`` (0-based, ascending order).

    ``scans`` may be one :class:`ScanResult` or several sharing one grid
    (e.g. different polynomial degrees) mixed with ``weights``.
    """
    scans = _as_list(scans)
    grid = scans[0].grid
    mass = _mix(scans, weights, lambda s: s.marginal(slot))
    edges = grid.f_min + grid.step * (np.arange(grid.count + 1) - 0.5)
    return BinnedDensity.from_mass(edges, mass)


def period_marginal(scans, slot, weights=None):
    """Marginal posterior of ``P = 1 / f`` on the reciprocal frequency bins.

    Bins are the images of the frequency bins, so corresponding sets carry
    identical probability; bins are listed in increasing period.
    """
    fm = frequency_marginal(scans, slot, weights)
    return _reciprocal(fm)


def _reciprocal(fm):
    if fm.edges[0] <= 0:
        raise SurrogateError("frequency bins reach zero; cannot map to periods")
    edges = 1.0 / fm.edges[::-1]
    return BinnedDensity.from_mass(edges, fm.mass[::-1])


def delta_posterior(scans, weights=None):
    """Posterior of ``delta = f2 - 2 f1`` for two-frequency scans.

    The grid maps ``(i, j)`` to ``delta = -f_min + (j - 2 i) step`` exactly, so
    the pushforward is binned on that lattice with width ``step``.
    """
    scans = _as_list(scans)
    if any(s.nf != 2 for s in scans):
        raise SurrogateError("delta posterior needs two-frequency scans")
    grid = scans[0].grid
    m = grid.count
    kmin, kmax = -2 * (m - 1), m - 1

    def push(s):
        k = s.tuples[:, 1] - 2 * s.tuples[:, 0]
        return np.bincount(k - kmin, weights=s.posterior, minlength=kmax - kmin + 1)

    mass = _mix(scans, weights, push)
    k = np.arange(kmin, kmax + 2)
    edges = -grid.f_min + (k - 0.5) * grid.step
    nz = np.flatnonzero(mass)
    lo, hi = (nz[0], nz[-1] + 1) if nz.size else (0, 1)
    return BinnedDensity.from_mass(edges[lo:hi + 1], mass[lo:hi])


def harmonic_overlap(scans, weights=None):
    """Overlap of the posteriors of ``P2 = 1/f2`` and ``P1/2 = 1/(2 f1)``.

    ``2 f1`` lives on a lattice with spacing ``2 step``, so both densities
    are binned there: bins of width ``2 step`` centred on ``2 f1`` nodes,
    with each ``f2`` node's mass split linearly between its two nearest
    centres.  Densities are then mapped to periods.  Returns
    ``(overlap, p2, p1_half)``.
    """
    scans = _as_list(scans)
    grid = scans[0].grid
    h = 2.0 * grid.step
    base = 2.0 * grid.f_min
    # lowest centre: at or below f_min, but with a positive lower edge
    jlo = int(math.floor((grid.f_min - base) / h))
    while base + jlo * h - grid.step <= 0:
        jlo += 1
    nb = grid.count - jlo
    centers = base + h * (np.arange(nb) + jlo)
    edges = np.append(centers - grid.step, centers[-1] + grid.step)

    def f2(s):
        u = (grid.node(s.tuples[:, 1]) - base) / h - jlo
        u = np.clip(u, 0.0, nb - 1.0)
        lo = np.minimum(np.floor(u).astype(int), nb - 2)
        frac = u - lo
        return (np.bincount(lo, weights=s.posterior * (1 - frac), minlength=nb)
                + np.bincount(lo + 1, weights=s.posterior * frac, minlength=nb))

    def twice_f1(s):
        return np.bincount(s.tuples[:, 0] - jlo, weights=s.posterior, minlength=nb)

    a = _reciprocal(BinnedDensity.from_mass(edges, _mix(scans, weights, f2)))
    b = _reciprocal(BinnedDensity.from_mass(edges, _mix(scans, weights, twice_f1)))
    return overlap_report(a, b), a, b


def overlap_report(a, b, rtol=1e-9):
    """Overlap coefficient ``sum min(a_i, b_i) width_i`` of two densities.

    Both must share the same bin edges; raises otherwise.
    """
    if a.edges.shape != b.edges.shape or not np.allclose(a.edges, b.edges, rtol=rtol, atol=0):
        raise SurrogateError("densities are not on a common binning")
    return float(np.sum(np.minimum(a.density, b.density) * a.widths))


def summarize_tuple(ts, freqs, nd, sigma_j):
    """Laplace summary of the coefficients for one frequency tuple.

    The fit uses jitter ``sigma_j`` (typically its posterior mean).  Errors
    come from the inverse normal matrix propagated to amplitude and phase
    to first order.  Polynomial coefficients are in the original abscissa.
    """
    design = build_design(ts, freqs, nd)
    fit = fit_linear(ts, design, sigma_j)
    cov = fit.covariance()
    orig = uncenter_coefficients(fit.coeffs, design.freqs, nd, design.offset)
    out = []
    for i, f in enumerate(design.freqs):
        s, c = orig[2 * i], orig[2 * i + 1]
        amp, phi = amplitude_phase(s, c)
        a = 2.0 * math.pi * f * design.offset
        rot = np.array([[math.cos(a), math.sin(a)], [-math.sin(a), math.cos(a)]])
        block = rot @ cov[2 * i:2 * i + 2, 2 * i:2 * i + 2] @ rot.T
        if amp > 0:
            ga = np.array([s, c]) / amp
            gp = np.array([-c, s]) / amp ** 2
            amp_err = float(math.sqrt(max(ga @ block @ ga, 0.0)))
            phi_err = float(math.sqrt(max(gp @ block @ gp, 0.0)))
        else:
            amp_err = phi_err = math.nan
        out.append({
            "frequency": float(f),
            "period": 1.0 / float(f),
            "S": float(s),
            "C": float(c),
            "amplitude": amp,
            "amplitude_err": amp_err,
            "phase": phi,
            "phase_err": phi_err,
        })
    poly = [float(v) for v in orig[2 * len(design.freqs):]]
    return {"sinusoids": out, "polynomial": poly, "sigma_j": float(sigma_j), "chi2": fit.chi2}
