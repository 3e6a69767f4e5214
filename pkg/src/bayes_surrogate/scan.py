"""Brute-force integration over frequencies on a regular grid.

Sines and cosines of ``2 pi f x_k`` are advanced from node to node with the
angle-addition identities and recomputed directly every ``reseed`` nodes.
Work is split into chunks aligned with the reseed blocks, so every node's
trig values, and therefore every result, are the same whether chunks run
serially or on a thread pool.
"""
import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .errors import GridError
from .jitter import make_jitter_grid, posterior_from_profile
from .linear import batch_log_evidence
from .priors import log_prior_frequency, log_prior_jitter

__all__ = [
    "FrequencyGrid",
    "make_grid",
    "TrigTable",
    "seed_trig",
    "advance_trig",
    "trig_block",
    "ScanResult",
    "scan_nf0",
    "scan_1d",
    "scan_2d",
    "scan_greedy",
    "truncate_nf",
    "Truncation",
    "retained_prefix",
    "DEFAULT_OVERSAMPLE",
    "DEFAULT_EPSILON",
    "DEFAULT_RESEED",
    "MIN_NODE_SEPARATION",
]

TWO_PI = 2.0 * math.pi
DEFAULT_OVERSAMPLE = 10.0
DEFAULT_EPSILON = 1e-4
DEFAULT_RESEED = 1024
DEFAULT_MAX_NODES = 10_000_000
DEFAULT_MAX_PAIRS = 20_000_000
# tuples with two frequencies this many grid steps apart or closer are skipped
MIN_NODE_SEPARATION = 2


@dataclass(frozen=True)
class FrequencyGrid:
    """Nodes ``f_min + i * step`` for ``i = 0 .. count - 1``."""

    f_min: float
    f_max: float
    step: float
    oversample: float = None

    def __post_init__(self):
        if not 0 < self.f_min < self.f_max:
            raise GridError(f"need 0 < f_min < f_max, got [{self.f_min}, {self.f_max}]")
        if not self.step > 0:
            raise GridError("grid step must be positive")
        if self.count < 2:
            raise GridError("frequency grid needs at least two nodes")

    @property
    def count(self):
        return int(math.floor((self.f_max - self.f_min) / self.step * (1 + 1e-12))) + 1

    @property
    def nodes(self):
        return self.f_min + self.step * np.arange(self.count)

    def node(self, i):
        return self.f_min + self.step * i

    @property
    def log_weights(self):
        """Trapezoid weights; the last node also absorbs the gap up to ``f_max``."""
        w = np.full(self.count, self.step)
        w[0] = w[-1] = 0.5 * self.step
        w[-1] += max(self.f_max - self.node(self.count - 1), 0.0)
        return np.log(w)

    def to_dict(self):
        return {"f_min": self.f_min, "f_max": self.f_max, "step": self.step,
                "oversample": self.oversample, "count": self.count}


def make_grid(ts, f_min, f_max, oversample=DEFAULT_OVERSAMPLE, max_nodes=DEFAULT_MAX_NODES):
    """Grid with step ``1 / (oversample * T_obs)``."""
    if not oversample >= 1:
        raise GridError("oversample must be >= 1")
    if not f_min < f_max:
        raise GridError(f"f_min ({f_min}) must be below f_max ({f_max})")
    span = ts.span
    if not span > 0:
        raise GridError("series has zero span")
    step = 1.0 / (oversample * span)
    grid = FrequencyGrid(float(f_min), float(f_max), step, float(oversample))
    if grid.count > max_nodes:
        raise GridError(
            f"grid would have {grid.count} nodes, above the ceiling of {max_nodes}; "
            "lower --oversample or narrow the frequency range"
        )
    return grid


@dataclass(frozen=True, eq=False)
class TrigTable:
    """Per-observation sin/cos at the current node plus the one-step rotation."""

    x: np.ndarray
    freq: float
    step: float
    sin: np.ndarray
    cos: np.ndarray
    step_sin: np.ndarray
    step_cos: np.ndarray
    f0: float = None
    index: int = 0
    reseed: int = DEFAULT_RESEED


def seed_trig(x, f, step, reseed=DEFAULT_RESEED):
    x = np.asarray(x, dtype=float)
    a = TWO_PI * f * x
    b = TWO_PI * step * x
    return TrigTable(x, float(f), float(step), np.sin(a), np.cos(a), np.sin(b), np.cos(b),
                     f0=float(f), index=0, reseed=reseed)


def advance_trig(table):
    """Move ``table`` one grid step up in frequency.

    Uses ``sin(a+b) = sin a cos b + cos a sin b`` and
    ``cos(a+b) = cos a cos b - sin a sin b``; every ``reseed`` advances the
    values are recomputed directly from ``f0 + index * step``.
    """
    index = table.index + 1
    freq = table.f0 + index * table.step
    if table.reseed and index % table.reseed == 0:
        a = TWO_PI * freq * table.x
        s, c = np.sin(a), np.cos(a)
    else:
        s = table.sin * table.step_cos + table.cos * table.step_sin
        c = table.cos * table.step_cos - table.sin * table.step_sin
    return replace(table, freq=freq, sin=s, cos=c, index=index)


def trig_block(x, grid, start, stop, reseed=DEFAULT_RESEED):
    """sin/cos tables ``(stop - start, N)`` for grid nodes ``start:stop``.

    Values are seeded directly at every multiple of ``reseed`` and advanced
    by complex rotation in between, so a node's values do not depend on the
    block it was requested in.
    """
    x = np.asarray(x, dtype=float)
    n = stop - start
    out = np.empty((n, x.size), dtype=complex)
    rot = np.exp(1j * TWO_PI * grid.step * x)
    i = start
    while i < stop:
        block_end = min(stop, (i // reseed + 1) * reseed)
        seed_at = (i // reseed) * reseed
        steps = np.empty((block_end - seed_at, x.size), dtype=complex)
        steps[0] = np.exp(1j * TWO_PI * grid.node(seed_at) * x)
        steps[1:] = rot
        vals = np.cumprod(steps, axis=0)
        out[i - start:block_end - start] = vals[i - seed_at:]
        i = block_end
    return out.imag, out.real


def _node_trig(x, grid, idx, reseed):
    s, c = trig_block(x, grid, idx, idx + 1, reseed)
    return s[0], c[0]


@dataclass(eq=False)
class ScanResult:
    """Evidence for every evaluated frequency tuple of one (nf, nd) model.

    Attributes
    ----------
    tuples : ndarray of int, shape (K, nf)
        Grid node indices, ascending within each row.
    log_evidence : ndarray, shape (K,)
        Log evidence conditioned on the tuple, jitter marginalized.
    log_weight : ndarray, shape (K,)
        Log prior mass of the tuple's grid cell: ``log nf! + sum log p(f_i) + nf log step``.
    posterior : ndarray, shape (K,)
        Normalized posterior over the evaluated tuples.
    retained : ndarray of int
        Indices into ``tuples`` of the smallest highest-posterior set with
        mass at least ``1 - epsilon``, in descending order.
    log_total : float
        Log evidence of the model, marginalized over frequencies.
    """

    nf: int
    nd: int
    grid: FrequencyGrid
    tuples: np.ndarray
    log_evidence: np.ndarray
    log_weight: np.ndarray
    epsilon: float
    n_evaluations: int
    log_jitter_profile: np.ndarray = None
    jitter_grid: object = None
    elapsed: float = 0.0
    method: str = "scan"
    posterior: np.ndarray = field(init=False)
    retained: np.ndarray = field(init=False)
    log_total: float = field(init=False)

    def __post_init__(self):
        lp = self.log_evidence + self.log_weight
        self.log_total = float(logsumexp(lp)) if lp.size else -math.inf
        if math.isfinite(self.log_total):
            self.posterior = np.exp(lp - self.log_total)
        else:
            self.posterior = np.zeros(lp.size)
        self.retained = retained_prefix(self.posterior, self.epsilon)

    @property
    def frequencies(self):
        if self.grid is None:
            return np.zeros(self.tuples.shape)
        return self.grid.f_min + self.grid.step * self.tuples

    @property
    def best(self):
        return tuple(int(i) for i in self.tuples[int(np.argmax(self.posterior))])

    def marginal(self, slot):
        """Posterior mass per grid node for frequency ``slot`` (0-based)."""
        return np.bincount(self.tuples[:, slot], weights=self.posterior, minlength=self.grid.count)

    def jitter_posterior(self):
        if self.log_jitter_profile is None:
            return None
        return posterior_from_profile(self.log_jitter_profile, self.jitter_grid)

    def summary(self, max_retained=50):
        ret = self.retained[:max_retained]
        return {
            "nf": self.nf,
            "nd": self.nd,
            "method": self.method,
            "grid": None if self.grid is None else self.grid.to_dict(),
            "epsilon": self.epsilon,
            "log_total": self.log_total,
            "n_tuples": int(self.tuples.shape[0]),
            "n_evaluations": int(self.n_evaluations),
            "n_retained": int(self.retained.size),
            "retained": [
                {
                    "frequencies": [float(f) for f in self.frequencies[k]],
                    "log_evidence": float(self.log_evidence[k]),
                    "posterior": float(self.posterior[k]),
                }
                for k in ret
            ],
        }

    def to_json(self):
        return json.dumps(self.summary(), indent=1, sort_keys=True)

    def grid_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"f{i + 1}" for i in range(self.nf)] + ["log_evidence", "posterior"])
        for k in range(self.tuples.shape[0]):
            w.writerow([repr(float(f)) for f in self.frequencies[k]]
                       + [repr(float(self.log_evidence[k])), repr(float(self.posterior[k]))])
        return buf.getvalue()


def retained_prefix(posterior, epsilon):
    """Smallest descending-probability prefix holding at least ``1 - epsilon``."""
    if posterior.size == 0:
        return np.zeros(0, dtype=int)
    order = np.argsort(-posterior, kind="stable")
    cum = np.cumsum(posterior[order])
    k = int(np.searchsorted(cum, (1.0 - epsilon) * cum[-1], side="left")) + 1
    return order[:min(max(k, 1), order.size)]


@dataclass(frozen=True, eq=False)
class _Context:
    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    grid: FrequencyGrid
    nd: int
    priors: object
    jitter_nodes: np.ndarray
    jitter_logw: np.ndarray
    marginalize: bool
    flat_prior: bool
    reseed: int
    log_node_weight: np.ndarray

    def poly(self):
        return np.column_stack([self.x ** k for k in range(self.nd + 1)]) if self.nd >= 0 \
            else np.empty((self.x.size, 0))

    def fixed_columns(self, idx):
        cols = []
        for i in idx:
            s, c = _node_trig(self.x, self.grid, int(i), self.reseed)
            cols += [s, c]
        pieces = ([np.column_stack(cols)] if cols else []) + [self.poly()]
        return np.hstack(pieces)


def _make_context(ts, grid, nd, priors, jitter_grid, fixed_jitter, flat_prior, reseed):
    ts.validate_for_analysis()
    x = ts.x - float(np.mean(ts.x))
    if fixed_jitter is not None:
        nodes = np.array([float(fixed_jitter)])
        logw = np.zeros(1)
        marg = False
        jitter_grid = None
    else:
        jitter_grid = make_jitter_grid(priors) if jitter_grid is None else jitter_grid
        nodes = jitter_grid.nodes
        logw = log_prior_jitter(nodes, priors) + jitter_grid.log_weights
        marg = True
    lnw = None if grid is None else log_prior_frequency(grid.nodes, priors) + grid.log_weights
    ctx = _Context(x, ts.y.copy(), ts.sigma.copy(), grid, nd, priors, nodes, logw, marg,
                   flat_prior, reseed, lnw)
    return ctx, jitter_grid


def _reduce_jitter(ctx, ll):
    if ctx.marginalize:
        return logsumexp(ll + ctx.jitter_logw, axis=1)
    return ll[:, 0]


def _eval_chunk(ctx, fixed_idx, start, stop, skip, log_tuple_weight):
    """Evidence for tuples ``fixed_idx + (j,)`` with ``j`` in ``start:stop``.

    ``skip`` marks nodes (relative to ``start``) that are not evaluated.
    Returns marginal log evidence per node (nan where skipped) and the chunk's
    contribution to the jitter profile.
    """
    S, C = trig_block(ctx.x, ctx.grid, start, stop, ctx.reseed)
    keep = ~skip
    fixed = ctx.fixed_columns(fixed_idx)
    ll = batch_log_evidence(ctx.y, ctx.sigma, fixed, len(fixed_idx), S[keep], C[keep],
                            ctx.jitter_nodes, ctx.priors, flat_prior=ctx.flat_prior)
    out = np.full(stop - start, np.nan)
    out[keep] = _reduce_jitter(ctx, ll)
    prof = logsumexp(ll + ctx.jitter_logw + log_tuple_weight[keep][:, None], axis=0) \
        if keep.any() else np.full(ctx.jitter_nodes.size, -np.inf)
    return out, prof


def _run(tasks, threads, progress=None):
    total = len(tasks)
    if threads is None or threads <= 1:
        results = []
        for k, t in enumerate(tasks):
            results.append(t())
            if progress:
                progress(k + 1, total)
        return results
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(t) for t in tasks]
        results = []
        for k, f in enumerate(futures):
            results.append(f.result())
            if progress:
                progress(k + 1, total)
    return results


def _chunks(grid, reseed):
    m = grid.count
    return [(a, min(a + reseed, m)) for a in range(0, m, reseed)]


def scan_nf0(ts, nd, priors, jitter_grid=None, fixed_jitter=None, flat_prior=False,
             grid=None):
    """Model without sinusoids: polynomial of degree ``nd`` only."""
    t0 = time.perf_counter()
    ctx, jgrid = _make_context(ts, grid, nd, priors, jitter_grid, fixed_jitter, flat_prior,
                               DEFAULT_RESEED)
    ll = batch_log_evidence(ctx.y, ctx.sigma, ctx.poly(), 0, None, None, ctx.jitter_nodes,
                            priors, flat_prior=flat_prior)
    lev = _reduce_jitter(ctx, ll)
    return ScanResult(0, nd, ctx.grid, np.zeros((1, 0), dtype=int), lev, np.zeros(1),
                      epsilon=0.0, n_evaluations=1,
                      log_jitter_profile=(ll + ctx.jitter_logw)[0] if ctx.marginalize else None,
                      jitter_grid=jgrid, elapsed=time.perf_counter() - t0, method="direct")


def scan_1d(ts, grid, nd, priors, epsilon=DEFAULT_EPSILON, jitter_grid=None, threads=1,
            fixed_jitter=None, flat_prior=False, reseed=DEFAULT_RESEED, progress=None):
    """Evaluate every single-frequency model on ``grid``.

    ``fixed_jitter`` and ``flat_prior`` are hooks that replace the jitter
    integral by a fixed value and the coefficient priors by a unit density.
    """
    t0 = time.perf_counter()
    ctx, jgrid = _make_context(ts, grid, nd, priors, jitter_grid, fixed_jitter, flat_prior, reseed)
    chunks = _chunks(grid, reseed)
    tasks = [
        (lambda a=a, b=b: _eval_chunk(ctx, (), a, b, np.zeros(b - a, bool), ctx.log_node_weight[a:b]))
        for a, b in chunks
    ]
    results = _run(tasks, threads, progress)
    lev = np.concatenate([r[0] for r in results])
    prof = logsumexp(np.stack([r[1] for r in results]), axis=0)
    return ScanResult(1, nd, grid, np.arange(grid.count)[:, None], lev, ctx.log_node_weight.copy(),
                      epsilon, n_evaluations=grid.count,
                      log_jitter_profile=prof if ctx.marginalize else None, jitter_grid=jgrid,
                      elapsed=time.perf_counter() - t0, method="scan_1d")


def _extend(ctx, bases, nf, threads, progress, sep, triangular=False):
    """Scan one new frequency against each base tuple in ``bases``.

    With ``triangular`` (single-node bases) only nodes above the base are
    used; otherwise tuples already reached from an earlier base are skipped.
    """
    m = ctx.grid.count
    j = np.arange(m)
    chunks = _chunks(ctx.grid, ctx.reseed)
    log_fact = math.lgamma(nf + 1)
    seen = set()
    plan = []
    for base in bases:
        base = tuple(int(i) for i in base)
        skip = np.zeros(m, dtype=bool)
        for i in base:
            skip |= np.abs(j - i) <= sep
        if triangular:
            skip |= j <= base[0]
        else:
            for jj in np.flatnonzero(~skip):
                key = tuple(sorted(base + (int(jj),)))
                if key in seen:
                    skip[jj] = True
                else:
                    seen.add(key)
        if skip.all():
            continue
        tw = log_fact + ctx.log_node_weight + float(np.sum(ctx.log_node_weight[list(base)]))
        for a, b in chunks:
            if not skip[a:b].all():
                plan.append((base, a, b, skip[a:b].copy(), tw[a:b]))
    tasks = [(lambda p=p: _eval_chunk(ctx, p[0], p[1], p[2], p[3], p[4])) for p in plan]
    results = _run(tasks, threads, progress)
    tuples, lev, lw, profs = [], [], [], []
    for (base, a, b, skip, tw), (vals, prof) in zip(plan, results):
        keep = ~skip
        new = j[a:b][keep]
        block = np.empty((new.size, nf), dtype=int)
        block[:, :-1] = base
        block[:, -1] = new
        tuples.append(np.sort(block, axis=1))
        lev.append(vals[keep])
        lw.append(tw[keep])
        profs.append(prof)
    if not tuples:
        raise GridError("no admissible frequency tuples; widen the grid")
    return (np.concatenate(tuples), np.concatenate(lev), np.concatenate(lw),
            logsumexp(np.stack(profs), axis=0))


def scan_2d(ts, grid, nd, priors, epsilon=DEFAULT_EPSILON, jitter_grid=None, threads=1,
            fixed_jitter=None, flat_prior=False, reseed=DEFAULT_RESEED, progress=None,
            max_pairs=DEFAULT_MAX_PAIRS, min_separation=MIN_NODE_SEPARATION):
    """Evaluate every ordered pair ``f1 < f2`` of grid nodes.

    Pairs closer than ``min_separation`` steps are skipped.
    """
    m = grid.count
    n_pairs = m * (m - 1) // 2
    if n_pairs > max_pairs:
        raise GridError(
            f"a full two-frequency scan needs {n_pairs} evaluations, above the ceiling of "
            f"{max_pairs}; lower the oversampling, narrow the range or use the greedy scan"
        )
    t0 = time.perf_counter()
    ctx, jgrid = _make_context(ts, grid, nd, priors, jitter_grid, fixed_jitter, flat_prior, reseed)
    bases = [(i,) for i in range(m)]
    tuples, lev, lw, prof = _extend(ctx, bases, 2, threads, progress, min_separation,
                                    triangular=True)
    return ScanResult(2, nd, grid, tuples, lev, lw, epsilon, n_evaluations=lev.size,
                      log_jitter_profile=prof if ctx.marginalize else None, jitter_grid=jgrid,
                      elapsed=time.perf_counter() - t0, method="scan_2d")


def scan_greedy(ts, grid, nf_target, nd, priors, previous, epsilon=DEFAULT_EPSILON,
                jitter_grid=None, threads=1, fixed_jitter=None, flat_prior=False,
                reseed=DEFAULT_RESEED, progress=None, min_separation=MIN_NODE_SEPARATION):
    """Add one frequency to each tuple retained by ``previous``.

    ``previous`` is the :class:`ScanResult` for ``nf_target - 1`` sinusoids.
    Tuples reached from several retained bases are evaluated once.  At most
    ``M * prod(m_i)`` tuples are evaluated.
    """
    if nf_target < 2:
        raise ValueError("greedy extension needs nf_target >= 2")
    if previous.nf != nf_target - 1:
        raise ValueError(f"previous scan has nf={previous.nf}, expected {nf_target - 1}")
    t0 = time.perf_counter()
    ctx, jgrid = _make_context(ts, grid, nd, priors, jitter_grid, fixed_jitter, flat_prior, reseed)
    bases = [previous.tuples[k] for k in previous.retained]
    tuples, lev, lw, prof = _extend(ctx, bases, nf_target, threads, progress, min_separation)
    return ScanResult(nf_target, nd, grid, tuples, lev, lw, epsilon, n_evaluations=lev.size,
                      log_jitter_profile=prof if ctx.marginalize else None, jitter_grid=jgrid,
                      elapsed=time.perf_counter() - t0, method="greedy")


@dataclass(frozen=True)
class Truncation:
    n_stop: int
    fired: bool
    warning: bool


def truncate_nf(posteriors, stop_ratio=1e-3, nf_max=None):
    """Find the level at which to stop adding frequencies.

    Returns the smallest ``n >= 1`` with
    ``p(n) < stop_ratio * sum(p(0..n-1))``.  If none qualifies, ``n_stop`` is
    ``nf_max`` (default: the last level given) and ``warning`` is set.
    """
    p = np.asarray(posteriors, dtype=float)
    cum = np.cumsum(p)
    for n in range(1, p.size):
        if p[n] < stop_ratio * cum[n - 1]:
            return Truncation(n, True, False)
    last = p.size - 1 if nf_max is None else nf_max
    return Truncation(last, False, True)
