"""Synthetic data: sinusoid/polynomial signals, stylized Keplerian velocity
curves, and observing cadences with the gaps of ground-based surveys."""
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import CadenceError, ConfigError
from .timeseries import TimeSeries

__all__ = [
    "Sinusoid",
    "Keplerian",
    "SignalSpec",
    "CadenceSpec",
    "gen_signal",
    "signal_values",
    "gen_cadence",
    "in_windows",
    "transit_indices",
    "replicate_aliasing_experiment",
    "AliasingOutcome",
    "SIDEREAL_DAY",
    "SYNODIC_MONTH",
    "YEAR",
]

SIDEREAL_DAY = (23 * 3600 + 56 * 60 + 4) / 86400.0
SYNODIC_MONTH = 29.53
YEAR = 365.25
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Sinusoid:
    """``amplitude * cos(2 pi frequency x + phase)``, i.e. ``phase = atan2(-S, C)``."""

    frequency: float
    amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class Keplerian:
    """Truncated Fourier velocity curve of an eccentric orbit (stylized).

    Harmonic ``n`` has amplitude ``k0 * ecc**(n - 1)`` and phase ``n * phase``.
    """

    period: float
    k0: float
    ecc: float = 0.0
    n_harmonics: int = 2
    phase: float = 0.0

    def __post_init__(self):
        if not 0 <= self.ecc < 1:
            raise ConfigError("eccentricity must be in [0, 1)")
        if self.k0 < 0:
            raise ConfigError("k0 must be non-negative")
        if self.n_harmonics < 1:
            raise ConfigError("need at least one harmonic")
        if not self.period > 0:
            raise ConfigError("period must be positive")

    def harmonics(self):
        return [
            Sinusoid(n / self.period, self.k0 * self.ecc ** (n - 1), n * self.phase)
            for n in range(1, self.n_harmonics + 1)
        ]


@dataclass(frozen=True)
class SignalSpec:
    """Everything needed to generate one synthetic series.

    ``sigma`` is a scalar, a per-point sequence, or a ``(low, high)`` pair
    from which per-point uncertainties are drawn uniformly.  ``jitter`` is
    added to the noise but not to the reported uncertainties.
    """

    components: tuple = ()
    polynomial: tuple = ()
    keplerian: Keplerian = None
    sigma: object = 1.0
    jitter: float = 0.0
    seed: int = 0
    kind: str = "generic"

    def all_sinusoids(self):
        sins = list(self.components)
        if self.keplerian is not None:
            sins += self.keplerian.harmonics()
        return sins

    def to_dict(self):
        d = asdict(self)
        d["components"] = [asdict(c) for c in self.components]
        if isinstance(self.sigma, np.ndarray):
            d["sigma"] = self.sigma.tolist()
        elif isinstance(self.sigma, tuple):
            d["sigma"] = list(self.sigma)
        d["polynomial"] = list(self.polynomial)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["components"] = tuple(Sinusoid(**c) for c in d.get("components", ()))
        d["polynomial"] = tuple(d.get("polynomial", ()))
        if d.get("keplerian") is not None:
            d["keplerian"] = Keplerian(**d["keplerian"])
        if isinstance(d.get("sigma"), list):
            d["sigma"] = tuple(d["sigma"]) if len(d["sigma"]) == 2 else np.asarray(d["sigma"])
        return cls(**d)


def signal_values(spec, times):
    """Noise-free model values at ``times``."""
    t = np.asarray(times, dtype=float)
    y = np.zeros_like(t)
    for s in spec.all_sinusoids():
        y += s.amplitude * np.cos(TWO_PI * s.frequency * t + s.phase)
    for k, c in enumerate(spec.polynomial):
        y += c * t ** k
    return y


def _draw_sigma(spec, n, rng):
    sig = spec.sigma
    if np.isscalar(sig):
        return np.full(n, float(sig))
    sig = np.asarray(sig, dtype=float)
    if isinstance(spec.sigma, tuple) and sig.size == 2:
        return rng.uniform(sig[0], sig[1], n)
    if sig.size != n:
        raise ConfigError(f"got {sig.size} uncertainties for {n} times")
    return sig


def gen_signal(spec, times, seed=None):
    """Synthetic observations of ``spec`` at ``times``.

    Noise is Gaussian with variance ``sigma_k^2 + jitter^2``; the returned
    uncertainties are ``sigma_k`` only.  ``seed`` overrides ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    t = np.asarray(times, dtype=float)
    sig = _draw_sigma(spec, t.size, rng)
    noise = rng.normal(0.0, 1.0, t.size) * np.sqrt(sig ** 2 + spec.jitter ** 2)
    return TimeSeries(t, signal_values(spec, t) + noise, sig, kind=spec.kind)


def transit_indices(n, start=0):
    """Transit numbers ``start .. start + n - 1`` as floats."""
    return np.arange(start, start + n, dtype=float)


@dataclass(frozen=True)
class CadenceSpec:
    """Observing schedule model.

    ``ground_based`` draws at most one observation per night.  Night ``d`` is
    centred on ``start + d * day`` (``day`` is the sidereal day when
    ``sidereal`` is set) and observable for ``night_window`` hours; a season
    of ``season_gap`` months per year starting at year fraction
    ``season_start`` is unobservable; acceptance is weighted toward full
    Moon with strength ``lunar_strength`` in [0, 1].
    """

    mode: str = "random_uniform"
    n_obs: int = 40
    span: float = 1000.0
    start: float = 0.0
    night_window: float = 8.0
    season_gap: float = 3.0
    season_start: float = 0.0
    lunar_strength: float = 0.8
    sidereal: bool = True
    full_moon: float = 0.0

    def validate(self):
        if self.mode not in ("uniform", "random_uniform", "ground_based"):
            raise ConfigError(f"unknown cadence mode {self.mode!r}")
        if self.n_obs < 1:
            raise ConfigError("n_obs must be at least 1")
        if not self.span > 0:
            raise ConfigError("span must be positive")
        if not 0 < self.night_window <= 24:
            raise ConfigError("night_window must be in (0, 24] hours")
        if not 0 <= self.season_gap < 12:
            raise ConfigError("season_gap must be in [0, 12) months")
        if not 0 <= self.lunar_strength <= 1:
            raise ConfigError("lunar_strength must be in [0, 1]")
        return self

    @property
    def day(self):
        return SIDEREAL_DAY if self.sidereal else 1.0

    def in_season_gap(self, t):
        phase = np.mod((np.asarray(t) - self.start) / YEAR - self.season_start, 1.0)
        return phase < self.season_gap / 12.0

    def lunar_weight(self, t):
        c = np.cos(TWO_PI * (np.asarray(t) - self.full_moon) / SYNODIC_MONTH)
        return (1.0 - self.lunar_strength) + self.lunar_strength * 0.5 * (1.0 + c)

    def to_dict(self):
        return asdict(self)


def gen_cadence(spec, seed=0):
    """Observation times for ``spec``, sorted.

    Raises
    ------
    CadenceError
        When fewer than ``n_obs`` nights are available, or accept-reject
        sampling fails to place every observation (``shortfall`` says how
        many are missing).
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    n = spec.n_obs
    if spec.mode == "uniform":
        return spec.start + np.linspace(0.0, spec.span, n)
    if spec.mode == "random_uniform":
        return np.sort(spec.start + rng.uniform(0.0, spec.span, n))

    half = spec.night_window / 48.0
    nights = spec.start + spec.day * np.arange(int(math.floor(spec.span / spec.day)) + 1)
    nights = nights[~spec.in_season_gap(nights)]
    if nights.size < n:
        raise CadenceError(
            f"only {nights.size} observable nights for {n} observations", shortfall=n - nights.size
        )
    free = np.ones(nights.size, dtype=bool)
    times = []
    tries = 0
    max_tries = 200 * n + 1000
    while len(times) < n and tries < max_tries:
        tries += 1
        d = rng.integers(nights.size)
        if not free[d]:
            continue
        t = nights[d] + rng.uniform(-half, half)
        if t < spec.start or t > spec.start + spec.span or spec.in_season_gap(t):
            continue
        if rng.uniform() < spec.lunar_weight(t):
            free[d] = False
            times.append(t)
    if len(times) < n:
        raise CadenceError(
            f"placed {len(times)} of {n} observations", shortfall=n - len(times)
        )
    return np.sort(np.array(times))


def in_windows(times, spec):
    """Boolean mask: which ``times`` satisfy every constraint of ``spec``."""
    t = np.asarray(times, dtype=float)
    ok = (t >= spec.start) & (t <= spec.start + spec.span)
    if spec.mode != "ground_based":
        return ok
    d = np.rint((t - spec.start) / spec.day)
    ok &= np.abs(t - (spec.start + d * spec.day)) <= spec.night_window / 48.0 + 1e-12
    ok &= ~spec.in_season_gap(t)
    return ok


@dataclass
class AliasingOutcome:
    """Overlap of ``P2`` and ``P1/2`` posteriors under two cadences."""

    overlap_a: float
    overlap_b: float
    seed: int
    details: dict = field(default_factory=dict)

    @property
    def difference(self):
        return self.overlap_a - self.overlap_b


def replicate_aliasing_experiment(base, cadence_a, cadence_b, f_max, priors=None,
                                  oversample=10.0, seed=0, nd=0, epsilon=1e-4,
                                  jitter_grid=None, threads=1):
    """Analyse the same signal and noise draw under two cadences.

    For each cadence the two-frequency model (greedy extension of the
    one-frequency scan, polynomial degree ``nd``) is evaluated and the
    overlap of the ``P2`` and ``P1/2`` marginal posteriors is reported.
    """
    from .compare import harmonic_overlap
    from .priors import resolve_priors
    from .scan import make_grid, scan_1d, scan_greedy

    overlaps = []
    details = {}
    for label, cad in (("a", cadence_a), ("b", cadence_b)):
        times = gen_cadence(cad, seed)
        ts = gen_signal(base, times, seed)
        pr = resolve_priors(ts, priors, f_max=f_max, nd_min=min(nd, 1), nd_max=nd)
        grid = make_grid(ts, pr.f_min, pr.f_max, oversample)
        s1 = scan_1d(ts, grid, nd, pr, epsilon=epsilon, jitter_grid=jitter_grid, threads=threads)
        s2 = scan_greedy(ts, grid, 2, nd, pr, s1, epsilon=epsilon, jitter_grid=jitter_grid,
                         threads=threads)
        ov, _, _ = harmonic_overlap(s2)
        overlaps.append(ov)
        f1, f2 = s2.frequencies[int(np.argmax(s2.posterior))]
        details[label] = {
            "mode": cad.mode,
            "overlap": ov,
            "best_f1": float(f1),
            "best_f2": float(f2),
            "log_total_nf1": s1.log_total,
            "log_total_nf2": s2.log_total,
            "n_retained_nf1": int(s1.retained.size),
        }
    return AliasingOutcome(overlaps[0], overlaps[1], seed, details)


def truth_json(spec, cadence=None):
    doc = {"signal": spec.to_dict()}
    if cadence is not None:
        doc["cadence"] = cadence.to_dict()
    return json.dumps(doc, indent=1, sort_keys=True, default=float)
