"""
How much does the jitter prior matter?
======================================

Unmodelled scatter (jitter) competes with extra sinusoids for the same
residual variance, so the Bayes factor for a second sinusoid can move with
the jitter prior.  We rerun one analysis under each available choice.
"""
from bayes_surrogate import analyze
from bayes_surrogate.priors import JITTER_PRIORS
from bayes_surrogate.simulate import CadenceSpec, SignalSpec, Sinusoid, gen_cadence, gen_signal

# a strong sinusoid, a weak one, and 1.5 units of hidden jitter
times = gen_cadence(CadenceSpec(mode="random_uniform", n_obs=45, span=150.0), seed=3)
spec = SignalSpec(components=(Sinusoid(0.061, 4.0), Sinusoid(0.173, 1.2, 2.0)),
                  sigma=1.0, jitter=1.5)
ts = gen_signal(spec, times, seed=3)

print("%-11s %10s %10s %8s %14s" % ("prior", "B(1,0)", "B(2,1)", "MAP nf", "jitter mean"))
for jp in JITTER_PRIORS:
    a = analyze(ts, f_max=0.4, jitter_prior=jp)
    jit = a.jitter_posterior()
    print("%-11s %10.3g %10.3g %8d %14.2f"
          % (jp, a.posterior.bayes_factor(0), a.posterior.bayes_factor(1),
             a.posterior.map_nf, jit.mean))
