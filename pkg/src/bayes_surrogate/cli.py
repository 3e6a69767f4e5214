"""Command-line entry point.

Subcommands::

    bayes-surrogate analyze --input data.csv --f-max 0.5 --output-dir out
    bayes-surrogate simulate --output-dir sim --cadence ground_based --seed 3
    bayes-surrogate alias-study --output-dir alias --n-seeds 20
    bayes-surrogate compare --input data.csv --f-max 0.5 --output-dir cmp

Settings resolve as: built-in defaults < ``--config`` JSON file < explicit
flags.  Exit status is 0 on success, 1 on a runtime error (error JSON on
stderr) and 2 on a configuration error.
"""
import argparse
import csv
import datetime
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import PRIOR_NOTES, ScanSettings, analyze, config_hash
from .errors import ConfigError, SurrogateError
from .priors import JITTER_PRIORS
from .simulate import (
    CadenceSpec,
    Keplerian,
    SignalSpec,
    gen_cadence,
    gen_signal,
    replicate_aliasing_experiment,
    truth_json,
)
from .timeseries import dumps_timeseries, load_timeseries

__all__ = ["main", "build_parser", "resolve_config"]

COMMON_DEFAULTS = {
    "output_dir": ".",
    "seed": 0,
    "threads": 1,
    "progress": False,
}

ANALYZE_DEFAULTS = {
    "input": None,
    "format": None,
    "kind": "generic",
    "f_max": None,
    "f_min": None,
    "oversample": 10.0,
    "nf_max": 2,
    "nd_max": 1,
    "alpha": 0.5,
    "beta": 0.5,
    "epsilon": 1e-4,
    "stop_ratio": 1e-3,
    "jitter_prior": "mjeff",
    "exact_pairs": False,
    "max_nodes": 10_000_000,
    "priors": {},
}

SIMULATE_DEFAULTS = {
    "cadence": "ground_based",
    "n_obs": 40,
    "span": 200.0,
    "night_window": 8.0,
    "period": 25.0,
    "k0": 5.0,
    "ecc": 0.3,
    "n_harmonics": 2,
    "sigma": 1.0,
    "jitter": 0.0,
    "kind": "doppler",
    "signal": None,
    "cadence_spec": None,
}

ALIAS_DEFAULTS = {
    "n_seeds": 20,
    "n_obs": 40,
    "span": 200.0,
    "night_window": 2.0,
    "period": 25.0,
    "k0": 5.0,
    "ecc": 0.3,
    "sigma": 1.0,
    "f_max": 1.1,
    "oversample": 10.0,
    "epsilon": 1e-4,
    "cadence_a": "ground_based",
    "cadence_b": "random_uniform",
    "signal": None,
    "cadence_spec_a": None,
    "cadence_spec_b": None,
}

DEFAULTS = {
    "analyze": {**COMMON_DEFAULTS, **ANALYZE_DEFAULTS},
    "compare": {**COMMON_DEFAULTS, **ANALYZE_DEFAULTS},
    "simulate": {**COMMON_DEFAULTS, **SIMULATE_DEFAULTS},
    "alias-study": {**COMMON_DEFAULTS, **ALIAS_DEFAULTS},
}

FLAT_PRIOR_KEYS = ("f_max", "f_min", "nf_max", "nd_max", "alpha", "beta", "jitter_prior")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog="bayes-surrogate", description="Bayesian periodogram with model comparison.",
                argument_default=argparse.SUPPRESS)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--output-dir", dest="output_dir")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--config", help="JSON file; explicit flags take precedence")
        sp.add_argument("--progress", action="store_true", help="report progress on stderr")

    def analysis(sp):
        sp.add_argument("--input")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--kind", choices=("doppler", "transit_timing", "generic"))
        sp.add_argument("--f-max", dest="f_max", type=float)
        sp.add_argument("--f-min", dest="f_min", type=float)
        sp.add_argument("--oversample", type=float)
        sp.add_argument("--nf-max", dest="nf_max", type=int)
        sp.add_argument("--nd-max", dest="nd_max", type=int)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--stop-ratio", dest="stop_ratio", type=float)
        sp.add_argument("--jitter-prior", dest="jitter_prior", choices=JITTER_PRIORS)
        sp.add_argument("--exact-pairs", dest="exact_pairs", action="store_true",
                        help="full pair scan for nf=2 instead of greedy extension")
        sp.add_argument("--max-nodes", dest="max_nodes", type=int,
                        help="memory ceiling: largest frequency grid accepted")

    sp = sub.add_parser("analyze", help="model comparison on one data file",
                        argument_default=argparse.SUPPRESS)
    common(sp)
    analysis(sp)

    sp = sub.add_parser("compare", help="rerun analyze under each jitter prior",
                        argument_default=argparse.SUPPRESS)
    common(sp)
    analysis(sp)

    sp = sub.add_parser("simulate", help="synthetic data set with truth sidecar",
                        argument_default=argparse.SUPPRESS)
    common(sp)
    sp.add_argument("--cadence", choices=("uniform", "random_uniform", "ground_based"))
    sp.add_argument("--n-obs", dest="n_obs", type=int)
    sp.add_argument("--span", type=float)
    sp.add_argument("--night-window", dest="night_window", type=float)
    sp.add_argument("--period", type=float)
    sp.add_argument("--k0", type=float)
    sp.add_argument("--ecc", type=float)
    sp.add_argument("--n-harmonics", dest="n_harmonics", type=int)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--jitter", type=float)
    sp.add_argument("--kind", choices=("doppler", "transit_timing", "generic"))

    sp = sub.add_parser("alias-study", help="paired cadence aliasing experiment",
                        argument_default=argparse.SUPPRESS)
    common(sp)
    sp.add_argument("--n-seeds", dest="n_seeds", type=int)
    sp.add_argument("--n-obs", dest="n_obs", type=int)
    sp.add_argument("--span", type=float)
    sp.add_argument("--night-window", dest="night_window", type=float)
    sp.add_argument("--period", type=float)
    sp.add_argument("--k0", type=float)
    sp.add_argument("--ecc", type=float)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--f-max", dest="f_max", type=float)
    sp.add_argument("--oversample", type=float)
    sp.add_argument("--epsilon", type=float)
    choices = ("uniform", "random_uniform", "ground_based")
    sp.add_argument("--cadence-a", dest="cadence_a", choices=choices)
    sp.add_argument("--cadence-b", dest="cadence_b", choices=choices)
    return p


def _read_config(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read --config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"--config {path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("--config must hold a JSON object")
    # a posterior.json (or its config block) can be fed back verbatim
    if "config" in doc and isinstance(doc["config"], dict):
        doc = doc["config"]
    if "scan" in doc and isinstance(doc["scan"], dict):
        flat = {k: v for k, v in doc.items() if k not in ("scan", "grid", "data")}
        for k in ("oversample", "epsilon", "stop_ratio", "exact_pairs", "max_nodes"):
            if k in doc["scan"]:
                flat[k] = doc["scan"][k]
        doc = flat
    if isinstance(doc.get("priors"), dict):
        pri = dict(doc["priors"])
        for k in FLAT_PRIOR_KEYS:
            if k in pri:
                doc.setdefault(k, pri.pop(k))
        doc["priors"] = pri
    return doc


def resolve_config(argv):
    """Parse ``argv`` into ``(command, cfg)`` with precedence applied."""
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    defaults = DEFAULTS[command]
    file_cfg = _read_config(args["config"]) if "config" in args else {}
    unknown = sorted(set(file_cfg) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown keys in --config: {', '.join(unknown)}")
    cfg = {**defaults, **file_cfg, **{k: v for k, v in args.items() if k != "config"}}
    return command, cfg


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def _dumps(doc):
    return json.dumps(_clean(doc), indent=1, sort_keys=True) + "\n"


def _commit(outdir, files):
    """Write every ``name -> text`` atomically (temp file + rename)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        fd, tmp = tempfile.mkstemp(dir=outdir, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, outdir / name)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def _csv(header, rows, chash):
    buf = io.StringIO()
    buf.write(f"# config_hash: {chash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _progress_printer(enabled):
    if not enabled:
        return None

    def report(label, done, total):
        print(f"[scan] {label}: {done}/{total}", file=sys.stderr, flush=True)

    return report


def _data_digest(ts):
    h = hashlib.sha256()
    for a in (ts.x, ts.y, ts.sigma):
        h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return h.hexdigest()


# -- analyze ---------------------------------------------------------------

def _prior_overrides(cfg):
    over = dict(cfg.get("priors") or {})
    for k in FLAT_PRIOR_KEYS:
        if cfg.get(k) is not None:
            over[k] = cfg[k]
    return over


def _run_analysis(cfg, jitter_prior=None):
    if cfg.get("f_max") is None and not (cfg.get("priors") or {}).get("f_max"):
        raise ConfigError("--f-max is required (upper edge of the frequency grid)")
    if cfg.get("input") is None:
        raise ConfigError("--input is required")
    ts = load_timeseries(cfg["input"], cfg.get("format"), kind=cfg.get("kind", "generic"))
    over = _prior_overrides(cfg)
    if jitter_prior is not None:
        over["jitter_prior"] = jitter_prior
        # derived cutoff/scale belong to the prior being swapped in
        over.pop("jitter_cutoff", None)
        over.pop("jitter_scale", None)
    settings = ScanSettings(
        oversample=float(cfg["oversample"]),
        epsilon=float(cfg["epsilon"]),
        stop_ratio=float(cfg["stop_ratio"]),
        threads=int(cfg["threads"]),
        exact_pairs=bool(cfg["exact_pairs"]),
        max_nodes=int(cfg["max_nodes"]),
    )
    if settings.threads < 1:
        raise ConfigError("--threads must be at least 1")
    return analyze(ts, None, settings, progress=_progress_printer(cfg["progress"]), **over)


def _resolved(cfg, a):
    """Fully explicit configuration of an analysis (hashed)."""
    c = a.config()
    c["data"] = {"sha256": _data_digest(a.ts), "n_obs": len(a.ts), "kind": a.ts.kind}
    c["seed"] = cfg["seed"]
    return c


def _analysis_outputs(cfg, a):
    resolved = _resolved(cfg, a)
    chash = config_hash(resolved)
    post = a.posterior
    files = {}
    doc = {
        "config": resolved,
        "config_hash": chash,
        "data": {"n_obs": len(a.ts), "span": a.ts.span, "n_duplicates": a.ts.n_duplicates,
                 "kind": a.ts.kind},
        "posterior": post.to_dict(),
        "map_model": {"nf": int(post.map_model[0]), "nd": int(post.map_model[1])},
        "argmax_nf": int(post.map_nf),
        "truncation": {"n_stop": a.truncation.n_stop, "fired": a.truncation.fired,
                       "warning": a.truncation.warning},
        "prior_notes": PRIOR_NOTES,
        "scans": {f"{nf},{nd}": {k: v for k, v in s.summary(max_retained=10).items() if k != "grid"}
                  for (nf, nd), s in sorted(a.scans.items())},
        "retained": a.retained_summaries(),
        "version": __version__,
    }
    files["posterior.json"] = _dumps(doc)
    # wall-clock facts live apart so posterior.json is byte-reproducible
    files["run.json"] = _dumps({
        "config_hash": doc["config_hash"],
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "threads": a.settings.threads,
        "timing_seconds": a.timing,
    })

    for nf in sorted({k[0] for k in a.scans if k[0] >= 1}):
        rows = []
        for slot, m in enumerate(a.frequency_marginals(nf)):
            lo, hi = m.edges[:-1], m.edges[1:]
            for i in range(m.density.size):
                p_lo = 1.0 / hi[i] if hi[i] > 0 else math.inf
                p_hi = 1.0 / lo[i] if lo[i] > 0 else math.inf
                rows.append([slot + 1, m.centers[i], lo[i], hi[i], p_lo, p_hi, m.mass[i],
                             m.density[i]])
        files[f"marginal_{nf}.csv"] = _csv(
            ["slot", "frequency", "f_lo", "f_hi", "period_lo", "period_hi", "mass", "density"],
            rows, chash)

    d = a.delta()
    if d is not None:
        rows = [[c, lo, hi, m, dens] for c, lo, hi, m, dens in
                zip(d.centers, d.edges[:-1], d.edges[1:], d.mass, d.density)]
        files["delta.csv"] = _csv(["delta", "lo", "hi", "mass", "density"], rows, chash)

    jp = a.jitter_posterior()
    if jp is not None:
        rows = [[s, dens, pr] for s, dens, pr in zip(jp.nodes, jp.density, jp.probabilities)]
        files["jitter.csv"] = _csv(["sigma_j", "density", "probability"], rows, chash)
    return files


def cmd_analyze(cfg):
    a = _run_analysis(cfg)
    _commit(cfg["output_dir"], _analysis_outputs(cfg, a))
    return 0


def cmd_compare(cfg):
    """Jitter-prior sensitivity: the same analysis under every jitter prior."""
    per = {}
    hashes = {}
    for jp in JITTER_PRIORS:
        a = _run_analysis(cfg, jitter_prior=jp)
        post = a.posterior
        hashes[jp] = config_hash(_resolved(cfg, a))
        per[jp] = {
            "nf_probability": [float(v) for v in post.nf_probability],
            "bayes_factors": {f"{n + 1},{n}": post.bayes_factor(n)
                              for n in range(post.nf_values.size - 1)},
            "map_model": {"nf": int(post.map_model[0]), "nd": int(post.map_model[1])},
            "truncation": {"n_stop": a.truncation.n_stop, "fired": a.truncation.fired},
            "config_hash": hashes[jp],
        }
    b21 = [per[jp]["bayes_factors"].get("2,1") for jp in JITTER_PRIORS]
    b21 = [v for v in b21 if v is not None and not math.isnan(v)]
    crosses = bool(b21) and min(b21) < 1.0 < max(b21)
    chash = config_hash(hashes)
    doc = {
        "config_hash": chash,
        "jitter_priors": per,
        "b21_crosses_one": crosses,
        "map_nf_agrees": len({per[jp]["map_model"]["nf"] for jp in JITTER_PRIORS}) == 1,
    }
    rows = [[jp, per[jp]["map_model"]["nf"], per[jp]["bayes_factors"].get("1,0", math.nan),
             per[jp]["bayes_factors"].get("2,1", math.nan)] for jp in JITTER_PRIORS]
    _commit(cfg["output_dir"], {
        "compare.json": _dumps(doc),
        "compare.csv": _csv(["jitter_prior", "map_nf", "B10", "B21"], rows, chash),
    })
    return 0


# -- simulate --------------------------------------------------------------

def _signal(cfg, key="signal"):
    if cfg.get(key):
        return SignalSpec.from_dict(cfg[key])
    kep = Keplerian(cfg["period"], cfg["k0"], cfg["ecc"], cfg.get("n_harmonics", 2), 0.7)
    return SignalSpec(keplerian=kep, sigma=cfg["sigma"], jitter=cfg.get("jitter", 0.0),
                      seed=cfg["seed"], kind=cfg.get("kind", "doppler"))


def _cadence(cfg, mode, key):
    if cfg.get(key):
        return CadenceSpec(**cfg[key])
    if cfg["n_obs"] < 1:
        raise ConfigError("--n-obs must be at least 1")
    if mode == "ground_based":
        return CadenceSpec(mode, cfg["n_obs"], cfg["span"], night_window=cfg["night_window"])
    return CadenceSpec(mode, cfg["n_obs"], cfg["span"])


def cmd_simulate(cfg):
    spec = _signal(cfg)
    cad = _cadence(cfg, cfg["cadence"], "cadence_spec")
    times = gen_cadence(cad, cfg["seed"])
    ts = gen_signal(spec, times, cfg["seed"])
    truth = json.loads(truth_json(spec, cad))
    truth["seed"] = cfg["seed"]
    chash = config_hash(truth)
    truth["config_hash"] = chash
    data = f"# config_hash: {chash}\n" + dumps_timeseries(ts, "csv")
    _commit(cfg["output_dir"], {"data.csv": data, "truth.json": _dumps(truth)})
    return 0


# -- alias-study -----------------------------------------------------------

def cmd_alias_study(cfg):
    if cfg["n_seeds"] < 1:
        raise ConfigError("--n-seeds must be at least 1")
    spec = _signal({**cfg, "n_harmonics": 2, "jitter": 0.0, "kind": "doppler"})
    cad_a = _cadence(cfg, cfg["cadence_a"], "cadence_spec_a")
    cad_b = _cadence(cfg, cfg["cadence_b"], "cadence_spec_b")
    resolved = {"signal": spec.to_dict(), "cadence_a": cad_a.to_dict(),
                "cadence_b": cad_b.to_dict(), "f_max": cfg["f_max"],
                "oversample": cfg["oversample"], "epsilon": cfg["epsilon"],
                "seed": cfg["seed"], "n_seeds": cfg["n_seeds"]}
    chash = config_hash(resolved)
    report = _progress_printer(cfg["progress"])
    rows = []
    for k in range(cfg["n_seeds"]):
        seed = cfg["seed"] + k
        out = replicate_aliasing_experiment(spec, cad_a, cad_b, cfg["f_max"],
                                            oversample=cfg["oversample"], seed=seed,
                                            epsilon=cfg["epsilon"], threads=cfg["threads"])
        rows.append([seed, out.overlap_a, out.overlap_b, out.difference,
                     out.details["a"]["best_f2"], out.details["b"]["best_f2"]])
        if report:
            report("alias-study seeds", k + 1, cfg["n_seeds"])
    arr = np.array([r[1:4] for r in rows], dtype=float)
    agg = {
        "median_a": float(np.median(arr[:, 0])),
        "median_b": float(np.median(arr[:, 1])),
        "mean_a": float(np.mean(arr[:, 0])),
        "mean_b": float(np.mean(arr[:, 1])),
        "median_difference": float(np.median(arr[:, 2])),
        "fraction_a_below_b": float(np.mean(arr[:, 0] < arr[:, 1])),
        "n_seeds": len(rows),
    }
    agg_rows = [[name, agg[f"{name}_a"], agg[f"{name}_b"], agg[f"{name}_a"] - agg[f"{name}_b"],
                 "", ""] for name in ("median", "mean")]
    header = ["seed", "overlap_a", "overlap_b", "difference", "best_f2_a", "best_f2_b"]
    doc = {"config": resolved, "config_hash": chash, "aggregate": agg,
           "per_seed": [dict(zip(header, r)) for r in rows]}
    _commit(cfg["output_dir"], {
        "alias_study.csv": _csv(header, rows + agg_rows, chash),
        "alias_summary.json": _dumps(doc),
    })
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
    "alias-study": cmd_alias_study,
}


def _fail(kind, exc, code):
    err = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    for attr in ("row", "columns", "shortfall"):
        if getattr(exc, attr, None) is not None:
            err[attr] = getattr(exc, attr)
    print(json.dumps(_clean(err), sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        command, cfg = resolve_config(argv)
        return COMMANDS[command](cfg)
    except ConfigError as e:
        return _fail("config", e, 2)
    except (SurrogateError, ValueError, OSError) as e:
        return _fail("runtime", e, 1)


if __name__ == "__main__":
    sys.exit(main())
