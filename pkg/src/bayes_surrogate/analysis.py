"""End-to-end analysis: scan every (nf, nd) model, stop adding frequencies
once they stop mattering, and assemble the model posterior."""
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from .compare import (
    assemble_posterior,
    delta_posterior,
    frequency_marginal,
    period_marginal,
    summarize_tuple,
)
from .jitter import DEFAULT_NODES, make_jitter_grid
from .priors import PriorConfig, log_prior_nd, log_prior_nf, resolve_priors
from .scan import (
    DEFAULT_EPSILON,
    DEFAULT_OVERSAMPLE,
    DEFAULT_RESEED,
    make_grid,
    scan_1d,
    scan_2d,
    scan_greedy,
    scan_nf0,
    truncate_nf,
)

__all__ = ["ScanSettings", "Analysis", "analyze", "config_hash", "PRIOR_NOTES"]

PRIOR_NOTES = [
    "amplitude-pair prior normalized to unit mass on the disk A <= a_max "
    "(density 1/[2 pi A (A + a0) log(1 + a_max/a0)])",
    "coefficient and jitter priors use the finite modified Jeffreys form 1/(|b| + b0)",
    "p(nf = 0) set to 1 - sum_{n>=1} alpha^n so the prior sums to one",
    "multi-frequency tuples carry prior density nf! prod p(f_i) on the ordered simplex",
]


@dataclass(frozen=True)
class ScanSettings:
    """Numerical settings of an analysis (everything except the priors)."""

    oversample: float = DEFAULT_OVERSAMPLE
    epsilon: float = DEFAULT_EPSILON
    stop_ratio: float = 1e-3
    threads: int = 1
    exact_pairs: bool = False
    jitter_nodes: int = DEFAULT_NODES
    reseed: int = DEFAULT_RESEED
    max_nodes: int = 10_000_000

    def to_dict(self):
        return asdict(self)


def config_hash(doc):
    """SHA-256 of the canonical JSON form of ``doc``."""
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass(eq=False)
class Analysis:
    ts: object
    priors: PriorConfig
    settings: ScanSettings
    grid: object
    scans: dict
    posterior: object
    truncation: object
    timing: dict = field(default_factory=dict)

    def config(self):
        """Everything that determines the results (thread count excluded)."""
        scan = {k: v for k, v in self.settings.to_dict().items() if k != "threads"}
        return {"priors": self.priors.to_dict(), "scan": scan, "grid": self.grid.to_dict()}

    def config_hash(self):
        return config_hash(self.config())

    def nd_weights(self, nf):
        """``p(nd | nf, data)`` over ``posterior.nd_values``."""
        row = self.posterior.probability[nf]
        tot = row.sum()
        return row / tot if tot > 0 else np.full(row.size, 1.0 / row.size)

    def scans_for(self, nf):
        return [self.scans[(nf, int(nd))] for nd in self.posterior.nd_values]

    def frequency_marginals(self, nf):
        scans, w = self.scans_for(nf), self.nd_weights(nf)
        return [frequency_marginal(scans, i, w) for i in range(nf)]

    def period_marginals(self, nf):
        scans, w = self.scans_for(nf), self.nd_weights(nf)
        return [period_marginal(scans, i, w) for i in range(nf)]

    def delta(self):
        if (2, int(self.posterior.nd_values[0])) not in self.scans:
            return None
        return delta_posterior(self.scans_for(2), self.nd_weights(2))

    def jitter_posterior(self, nf=None, nd=None):
        if nf is None:
            nf, nd = self.posterior.map_model
        return self.scans[(nf, nd)].jitter_posterior()

    def retained_summaries(self, nf=None, nd=None, limit=10):
        """Laplace amplitude/phase summaries for the top retained tuples."""
        if nf is None:
            nf, nd = self.posterior.map_model
        scan = self.scans[(nf, nd)]
        jp = scan.jitter_posterior()
        sj = jp.mean if jp is not None else 0.0
        out = []
        for k in scan.retained[:limit]:
            s = summarize_tuple(self.ts, scan.frequencies[k], nd, sj)
            s["posterior"] = float(scan.posterior[k])
            s["log_evidence"] = float(scan.log_evidence[k])
            out.append(s)
        return out


def _nf_posterior(scans, priors, nf_top):
    """Posterior over nf = 0..nf_top, normalized over those levels only."""
    logp = np.full(nf_top + 1, -np.inf)
    for nf in range(nf_top + 1):
        terms = [scans[(nf, nd)].log_total + log_prior_nf(nf, priors) + log_prior_nd(nd, priors)
                 for nd in range(priors.nd_min, priors.nd_max + 1)]
        logp[nf] = logsumexp(terms)
    return np.exp(logp - logsumexp(logp))


def analyze(ts, priors=None, settings=None, progress=None, **prior_overrides):
    """Run the full model comparison on ``ts``.

    ``priors`` may be partially specified; data-dependent defaults are
    filled by :func:`resolve_priors` (``f_max`` is required).
    """
    ts.validate_for_analysis()
    settings = ScanSettings() if settings is None else settings
    priors = resolve_priors(ts, priors, **prior_overrides)
    grid = make_grid(ts, priors.f_min, priors.f_max, settings.oversample, settings.max_nodes)
    jgrid = make_jitter_grid(priors, settings.jitter_nodes)
    nd_values = range(priors.nd_min, priors.nd_max + 1)
    common = dict(jitter_grid=jgrid, threads=settings.threads, reseed=settings.reseed)
    scans = {}
    timing = {}

    def report(label):
        if progress is None:
            return None
        return lambda done, total: progress(label, done, total)

    for nd in nd_values:
        s = scan_nf0(ts, nd, priors, jitter_grid=jgrid)
        scans[(0, nd)] = s
        timing[f"0,{nd}"] = s.elapsed

    truncation = None
    for nf in range(1, priors.nf_max + 1):
        for nd in nd_values:
            label = f"nf={nf} nd={nd}"
            if nf == 1:
                s = scan_1d(ts, grid, nd, priors, settings.epsilon, progress=report(label), **common)
            elif nf == 2 and settings.exact_pairs:
                s = scan_2d(ts, grid, nd, priors, settings.epsilon, progress=report(label), **common)
            else:
                s = scan_greedy(ts, grid, nf, nd, priors, scans[(nf - 1, nd)], settings.epsilon,
                                progress=report(label), **common)
            scans[(nf, nd)] = s
            timing[f"{nf},{nd}"] = s.elapsed
        p_nf = _nf_posterior(scans, priors, nf)
        truncation = truncate_nf(p_nf, settings.stop_ratio, priors.nf_max)
        if truncation.fired:
            break
    nf_stop = truncation.n_stop
    posterior = assemble_posterior({k: v.log_total for k, v in scans.items()}, priors, nf_stop)
    return Analysis(ts, priors, settings, grid, scans, posterior, truncation, timing)

