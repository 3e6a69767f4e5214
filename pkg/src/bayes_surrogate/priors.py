"""Prior densities for the sinusoid + polynomial surrogate model.

All densities are proper on their support.  Two places differ from the
textbook forms of the modified Jeffreys prior only by normalization:

* the two-dimensional amplitude prior integrates to one over the disk
  ``sqrt(S^2 + C^2) <= a_max``;
* the coefficient/jitter prior is ``1 / (|b| + b0)`` (finite at zero) rather
  than ``1 / (|b| (1 + |b|/b0))``.
"""
import json
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import ConfigError

__all__ = [
    "JITTER_PRIORS",
    "PriorConfig",
    "resolve_priors",
    "prior_nf",
    "prior_nd",
    "log_prior_nf",
    "log_prior_nd",
    "log_prior_frequency",
    "log_prior_amplitude_pair",
    "log_prior_coefficient",
    "log_prior_jitter",
    "jitter_support",
    "AMPLITUDE_FLOOR",
]

JITTER_PRIORS = ("mjeff", "cutoff", "halfnormal")

# fraction of a0 below which the amplitude prior is evaluated at the floor
AMPLITUDE_FLOOR = 1e-3


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters of every prior.

    ``None`` means "derive from the data"; see :func:`resolve_priors`.
    Amplitudes and coefficients are in units of ``y``, frequencies in
    ``1/x``.
    """

    alpha: float = 0.5
    beta: float = 0.5
    nf_max: int = 2
    nd_max: int = 1
    nd_min: int = 0
    a0: float = None
    a_max: float = None
    b0: float = None
    b_max: float = None
    f_min: float = None
    f_max: float = None
    jitter_min: float = 0.0
    jitter_prior: str = "mjeff"
    jitter_cutoff: float = None
    jitter_scale: float = None

    @property
    def resolved(self):
        return all(getattr(self, f.name) is not None for f in fields(self))

    def validate(self):
        """Raise :class:`ConfigError` unless the configuration is usable."""
        if not self.resolved:
            missing = [f.name for f in fields(self) if getattr(self, f.name) is None]
            raise ConfigError(f"unresolved prior settings: {', '.join(missing)}")
        if not 0 < self.alpha <= 0.5:
            raise ConfigError(f"alpha must be in (0, 0.5], got {self.alpha}")
        if not 0 < self.beta <= 0.5:
            raise ConfigError(f"beta must be in (0, 0.5], got {self.beta}")
        if self.nf_max < 1:
            raise ConfigError("nf_max must be >= 1")
        if self.nd_min not in (0, 1):
            raise ConfigError("nd_min must be 0 or 1")
        if self.nd_max < self.nd_min:
            raise ConfigError("nd_max must be >= nd_min")
        if not 0 < self.a0 < self.a_max:
            raise ConfigError("need 0 < a0 < a_max")
        if not 0 < self.b0 < self.b_max:
            raise ConfigError("need 0 < b0 < b_max")
        if not 0 < self.f_min < self.f_max:
            raise ConfigError("need 0 < f_min < f_max")
        if not 0 <= self.jitter_min < self.b_max:
            raise ConfigError("need 0 <= jitter_min < b_max")
        if self.jitter_prior not in JITTER_PRIORS:
            raise ConfigError(f"jitter_prior must be one of {JITTER_PRIORS}")
        if not self.jitter_cutoff > self.jitter_min:
            raise ConfigError("jitter_cutoff must exceed jitter_min")
        if not self.jitter_scale > 0:
            raise ConfigError("jitter_scale must be positive")
        _geometric_masses(self.alpha, self.nf_max, 0)
        _geometric_masses(self.beta, self.nd_max, self.nd_min)
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown prior settings: {sorted(unknown)}")
        return cls(**d)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def replace(self, **changes):
        return replace(self, **changes)


def resolve_priors(ts, cfg=None, **overrides):
    """Fill data-dependent defaults and validate.

    Defaults: ``a0 = b0 = <1/sigma^2>^(-1/2)``; ``a_max = 10 (max y - min y)``;
    ``b_max = 10 max(max y - min y, max |y|)`` so that a constant offset is
    always inside the coefficient prior; ``f_min = 2 / T_obs``;
    ``jitter_cutoff = 10 b0`` and ``jitter_scale = b0``.  ``f_max`` has no
    default.
    """
    cfg = PriorConfig() if cfg is None else cfg
    if overrides:
        cfg = replace(cfg, **overrides)
    spread = float(np.max(ts.y) - np.min(ts.y))
    top = float(np.max(np.abs(ts.y)))
    prec = ts.weighted_precision
    fill = {}
    if cfg.a0 is None:
        fill["a0"] = prec
    if cfg.b0 is None:
        fill["b0"] = prec
    a0 = fill.get("a0", cfg.a0)
    b0 = fill.get("b0", cfg.b0)
    if cfg.a_max is None:
        fill["a_max"] = max(10.0 * spread, 10.0 * a0)
    if cfg.b_max is None:
        fill["b_max"] = max(10.0 * spread, 10.0 * top, 10.0 * b0)
    if cfg.f_min is None and ts.span > 0:
        fill["f_min"] = 2.0 / ts.span
    if cfg.jitter_cutoff is None:
        fill["jitter_cutoff"] = 10.0 * b0
    if cfg.jitter_scale is None:
        fill["jitter_scale"] = b0
    if cfg.f_max is None:
        raise ConfigError("f_max must be given (no default)")
    return replace(cfg, **fill).validate()


def _geometric_masses(ratio, n_max, n_min):
    """Masses on ``n_min..n_max``: ``ratio**(n - n_min)`` above the minimum,
    the remainder at ``n_min``."""
    k = np.arange(1, n_max - n_min + 1)
    tail = ratio ** k
    head = 1.0 - tail.sum()
    if head < 0:
        raise ConfigError(
            f"geometric ratio {ratio} too large for {n_max - n_min} terms (negative mass at minimum)"
        )
    return np.concatenate([[head], tail])


def prior_nf(n, cfg):
    """Prior probability of ``n`` sinusoids."""
    if n < 0 or n > cfg.nf_max:
        return 0.0
    return float(_geometric_masses(cfg.alpha, cfg.nf_max, 0)[n])


def prior_nd(n, cfg):
    """Prior probability of polynomial degree ``n``."""
    if n < cfg.nd_min or n > cfg.nd_max:
        return 0.0
    return float(_geometric_masses(cfg.beta, cfg.nd_max, cfg.nd_min)[n - cfg.nd_min])


def log_prior_nf(n, cfg):
    p = prior_nf(n, cfg)
    return math.log(p) if p > 0 else -math.inf


def log_prior_nd(n, cfg):
    p = prior_nd(n, cfg)
    return math.log(p) if p > 0 else -math.inf


def log_prior_frequency(f, cfg):
    """Log density of a log-uniform frequency on ``[f_min, f_max]``."""
    f = np.asarray(f, dtype=float)
    inside = (f >= cfg.f_min) & (f <= cfg.f_max)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(inside, -np.log(f) - math.log(math.log(cfg.f_max / cfg.f_min)), -np.inf)
    return out[()] if out.ndim == 0 else out


def log_prior_amplitude_pair(s, c, cfg, floor=False):
    """Log density of a sinusoid's (S, C) coefficient pair.

    ``p(S, C) = 1 / [2 pi A (A + a0) log(1 + a_max/a0)]`` for
    ``A = hypot(S, C) <= a_max``: uniform phase, modified Jeffreys amplitude.
    With ``floor=True`` amplitudes below ``AMPLITUDE_FLOOR * a0`` are
    evaluated at the floor instead of diverging.
    """
    amp = np.hypot(np.asarray(s, dtype=float), np.asarray(c, dtype=float))
    if floor:
        amp = np.maximum(amp, AMPLITUDE_FLOOR * cfg.a0)
    norm = math.log(2.0 * math.pi * math.log1p(cfg.a_max / cfg.a0))
    with np.errstate(divide="ignore"):
        out = np.where(amp <= cfg.a_max, -np.log(amp) - np.log(amp + cfg.a0) - norm, -np.inf)
    return out[()] if out.ndim == 0 else out


def log_prior_coefficient(b, cfg, signed=True):
    """Log modified Jeffreys density with knee ``b0`` and cap ``b_max``.

    ``signed=True`` is the symmetric form used for polynomial coefficients on
    ``[-b_max, b_max]``; ``signed=False`` is the one-sided form on
    ``[0, b_max]``.
    """
    b = np.asarray(b, dtype=float)
    log_norm = math.log(math.log1p(cfg.b_max / cfg.b0))
    if signed:
        inside = np.abs(b) <= cfg.b_max
        val = -math.log(2.0) - np.log(np.abs(b) + cfg.b0) - log_norm
    else:
        inside = (b >= 0) & (b <= cfg.b_max)
        with np.errstate(invalid="ignore"):
            val = -np.log(b + cfg.b0) - log_norm
    out = np.where(inside, val, -np.inf)
    return out[()] if out.ndim == 0 else out


def jitter_support(cfg):
    """``(low, high)`` bounds of the jitter prior."""
    if cfg.jitter_prior == "cutoff":
        return cfg.jitter_min, min(cfg.jitter_cutoff, cfg.b_max)
    return cfg.jitter_min, cfg.b_max


def log_prior_jitter(s, cfg):
    """Log density of the jitter under the selected ``cfg.jitter_prior``.

    ``mjeff`` and ``cutoff`` are the one-sided modified Jeffreys form on
    ``[jitter_min, high]``; ``halfnormal`` has scale ``jitter_scale``.  All
    three are renormalized to their support.
    """
    s = np.asarray(s, dtype=float)
    lo, hi = jitter_support(cfg)
    inside = (s >= lo) & (s <= hi)
    if cfg.jitter_prior == "halfnormal":
        w = cfg.jitter_scale
        # renormalize to P(lo <= |N(0, w)| <= hi)
        p_lo = math.erf(lo / (w * math.sqrt(2.0)))
        p_hi = math.erf(hi / (w * math.sqrt(2.0)))
        log_mass = math.log(p_hi - p_lo)
        val = 0.5 * math.log(2.0 / math.pi) - math.log(w) - 0.5 * (s / w) ** 2 - log_mass
    else:
        log_norm = math.log(math.log((hi + cfg.b0) / (lo + cfg.b0)))
        with np.errstate(invalid="ignore"):
            val = -np.log(s + cfg.b0) - log_norm
    out = np.where(inside, val, -np.inf)
    return out[()] if out.ndim == 0 else out
