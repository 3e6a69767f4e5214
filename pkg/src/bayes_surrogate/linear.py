"""Weighted least squares and Laplace evidence over the linear coefficients.

For fixed frequencies, polynomial degree and jitter the surrogate model

    y(x) = sum_i [S_i sin(2 pi f_i x) + C_i cos(2 pi f_i x)] + sum_k D_k x^k

is linear in (S, C, D).  The integral of likelihood x prior over those
coefficients is approximated by expanding the log-likelihood to second order
about the weighted least-squares solution.  The prior enters as a factor
evaluated at that solution; the Hessian is the likelihood normal matrix only.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import SingularDesignError
from .priors import log_prior_amplitude_pair, log_prior_coefficient

__all__ = [
    "DesignMatrix",
    "LinearFit",
    "build_design",
    "fit_linear",
    "laplace_log_evidence",
    "log_prior_at_mode",
    "gaussian_log_norm",
    "uncenter_coefficients",
    "batch_log_evidence",
    "MAX_CONDITION",
]

MAX_CONDITION = 1e12
# relative squared norm of a numerically vanishing sinusoid column
ZERO_COLUMN = 1e-20
TWO_PI = 2.0 * math.pi
LOG_TWO_PI = math.log(TWO_PI)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Columns ``[sin f1, cos f1, ..., sin fN, cos fN, 1, x, ..., x^nd]``.

    ``x`` is centered on ``offset`` (the mean abscissa) before evaluation.
    ``nd = -1`` means no polynomial columns at all.
    """

    matrix: np.ndarray
    freqs: tuple
    nd: int
    offset: float

    @property
    def n_freqs(self):
        return len(self.freqs)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def column_names(self):
        names = []
        for i in range(1, self.n_freqs + 1):
            names += [f"S{i}", f"C{i}"]
        return names + [f"D{k}" for k in range(self.nd + 1)]


@dataclass(frozen=True, eq=False)
class LinearFit:
    coeffs: np.ndarray
    chi2: float
    normal_matrix: np.ndarray
    normal_matrix_logdet: float
    dof: int
    sigma_j: float

    def covariance(self):
        """Inverse normal matrix, the Laplace covariance of the coefficients."""
        return linalg.inv(self.normal_matrix)


def build_design(ts, freqs, nd, min_separation=0.0):
    """Design matrix for ``ts`` at frequencies ``freqs`` and degree ``nd``.

    Frequencies are put in increasing order.  Two frequencies closer than
    ``min_separation`` (or equal) raise :class:`SingularDesignError`.
    """
    freqs = tuple(sorted(float(f) for f in freqs))
    if nd < -1:
        raise ValueError("nd must be >= -1")
    gaps = np.diff(freqs)
    bad = np.flatnonzero(gaps <= min_separation)
    if bad.size:
        i = int(bad[0])
        raise SingularDesignError(
            f"frequencies {freqs[i]!r} and {freqs[i + 1]!r} are not separated by more than "
            f"{min_separation!r}",
            columns=(2 * i, 2 * i + 1, 2 * i + 2, 2 * i + 3),
        )
    offset = float(np.mean(ts.x))
    x = ts.x - offset
    cols = []
    for f in freqs:
        arg = TWO_PI * f * x
        cols += [np.sin(arg), np.cos(arg)]
    cols += [x ** k for k in range(nd + 1)]
    mat = np.column_stack(cols) if cols else np.empty((x.size, 0))
    mat.setflags(write=False)
    return DesignMatrix(mat, freqs, nd, offset)


def gaussian_log_norm(sigma, sigma_j):
    """``sum_k log N(0 | 0, sigma_k^2 + sigma_j^2)``."""
    return -0.5 * float(np.sum(np.log(TWO_PI * (sigma ** 2 + sigma_j ** 2))))


def _scaled_cholesky(h, names, floor=None):
    diag = np.diag(h).copy()
    floor = np.zeros_like(diag) if floor is None else floor
    zero = np.flatnonzero(~(diag > floor))
    if zero.size:
        raise SingularDesignError(
            "design has all-zero column(s): " + ", ".join(names[i] for i in zero), columns=zero
        )
    scale = np.sqrt(diag)
    hs = h / np.outer(scale, scale)
    evals, evecs = linalg.eigh(hs)
    if evals[0] <= 0 or evals[-1] / evals[0] > MAX_CONDITION:
        weight = np.abs(evecs[:, 0])
        cols = np.flatnonzero(weight > 0.1 * weight.max())
        raise SingularDesignError(
            "normal matrix is singular or ill conditioned (condition "
            f"{evals[-1] / max(evals[0], 1e-300):.3g}); offending columns: "
            + ", ".join(names[i] for i in cols),
            columns=cols,
        )
    chol = linalg.cholesky(hs, lower=True)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol)))) + float(np.sum(np.log(diag)))
    return chol, scale, logdet


def _zero_floor(w, d, n_freqs):
    """Weighted squared norms below which a sinusoid column counts as zero
    (e.g. ``sin(2 pi f x)`` with ``f x`` integer everywhere)."""
    floor = np.zeros(d)
    floor[:2 * n_freqs] = ZERO_COLUMN * float(np.sum(w))
    return floor


def fit_linear(ts, design, sigma_j=0.0):
    """Weighted least squares with weights ``1 / (sigma_k^2 + sigma_j^2)``.

    Raises
    ------
    SingularDesignError
        When the normal matrix has a zero column or a (Jacobi-scaled)
        condition number above ``MAX_CONDITION``.
    """
    X = np.asarray(design.matrix)
    w = 1.0 / (ts.sigma ** 2 + sigma_j ** 2)
    d = X.shape[1]
    if d == 0:
        chi2 = float(np.sum(w * ts.y ** 2))
        return LinearFit(np.zeros(0), chi2, np.zeros((0, 0)), 0.0, 0, float(sigma_j))
    Xw = X * w[:, None]
    h = X.T @ Xw
    b = Xw.T @ ts.y
    chol, scale, logdet = _scaled_cholesky(h, design.column_names,
                                           _zero_floor(w, d, design.n_freqs))
    z = linalg.cho_solve((chol, True), b / scale)
    theta = z / scale
    resid = ts.y - X @ theta
    chi2 = float(np.sum(w * resid ** 2))
    return LinearFit(theta, chi2, h, logdet, d, float(sigma_j))


def log_prior_at_mode(coeffs, n_freqs, priors):
    """Sum of coefficient log-priors at ``coeffs`` (amplitude floor applied)."""
    coeffs = np.asarray(coeffs, dtype=float)
    total = 0.0
    for i in range(n_freqs):
        total += float(log_prior_amplitude_pair(coeffs[2 * i], coeffs[2 * i + 1], priors, floor=True))
    if coeffs.size > 2 * n_freqs:
        total += float(np.sum(log_prior_coefficient(coeffs[2 * n_freqs:], priors)))
    return total


def laplace_log_evidence(ts, design, sigma_j, priors, flat_prior=False, fit=None):
    """Laplace approximation to ``log int L(theta) p(theta) dtheta`` over the
    linear coefficients, conditioned on frequencies, degree and jitter.

    ``flat_prior=True`` replaces the coefficient priors by a unit density
    (a test hook: the result is then the exact Gaussian integral).  A mode
    outside the prior support gives ``-inf``.
    """
    if fit is None:
        fit = fit_linear(ts, design, sigma_j)
    loglike = gaussian_log_norm(ts.sigma, sigma_j) - 0.5 * fit.chi2
    if fit.dof == 0:
        return loglike
    log_prior = 0.0 if flat_prior else log_prior_at_mode(fit.coeffs, design.n_freqs, priors)
    if not math.isfinite(log_prior):
        return -math.inf
    return loglike + log_prior + 0.5 * fit.dof * LOG_TWO_PI - 0.5 * fit.normal_matrix_logdet


def uncenter_coefficients(coeffs, freqs, nd, offset):
    """Express coefficients fitted on ``x - offset`` in the original ``x``.

    Sinusoid pairs pick up a phase rotation by ``2 pi f offset``; polynomial
    coefficients are re-expanded binomially.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    out = coeffs.copy()
    for i, f in enumerate(freqs):
        s, c = coeffs[2 * i], coeffs[2 * i + 1]
        a = TWO_PI * f * offset
        # S sin(w(x-o)) + C cos(w(x-o)) = S' sin(wx) + C' cos(wx)
        out[2 * i] = s * math.cos(a) + c * math.sin(a)
        out[2 * i + 1] = c * math.cos(a) - s * math.sin(a)
    base = 2 * len(freqs)
    d = coeffs[base:base + nd + 1]
    poly = np.zeros(nd + 1)
    for k in range(nd + 1):
        for j in range(k + 1):
            poly[j] += d[k] * math.comb(k, j) * (-offset) ** (k - j)
    out[base:base + nd + 1] = poly
    return out


def _batch_spd_solve(h, b):
    """Jacobi-scaled Cholesky solve of a stack of small SPD systems.

    ``h`` has layout ``(d, d, *batch)`` and ``b`` ``(d, *batch)``: the loops
    run over the matrix dimension and vectorize over the batch, which beats
    per-matrix LAPACK calls for the tiny systems met here.  Returns
    ``(theta, logdet, ok)``; systems that are not numerically positive
    definite or whose pivots imply a condition number above
    ``MAX_CONDITION`` are flagged ``ok=False``.
    """
    d = h.shape[0]
    diag = np.array([h[i, i] for i in range(d)])
    ok = np.all(diag > 0, axis=0)
    scale = np.sqrt(np.where(diag > 0, diag, 1.0))
    L = np.empty_like(h)  # only the lower triangle is read
    for j in range(d):
        ajj = h[j, j] / (scale[j] * scale[j]) - np.sum(L[j, :j] ** 2, axis=0)
        ok &= ajj > 0
        L[j, j] = np.sqrt(np.where(ajj > 0, ajj, 1.0))
        for i in range(j + 1, d):
            aij = h[i, j] / (scale[i] * scale[j])
            L[i, j] = (aij - np.sum(L[i, :j] * L[j, :j], axis=0)) / L[j, j]
    piv = np.array([L[i, i] for i in range(d)])
    # 1/min pivot^2 is a lower bound on the condition of a unit-diagonal SPD matrix
    ok &= np.min(piv, axis=0) ** 2 > 1.0 / MAX_CONDITION
    r = b / scale
    z = np.empty_like(r)
    for i in range(d):
        z[i] = (r[i] - np.sum(L[i, :i] * z[:i], axis=0)) / L[i, i]
    x = np.empty_like(r)
    for i in reversed(range(d)):
        x[i] = (z[i] - np.sum(L[i + 1:, i] * x[i + 1:], axis=0)) / L[i, i]
    logdet = 2.0 * np.sum(np.log(piv), axis=0) + 2.0 * np.sum(np.log(scale), axis=0)
    return x / scale, logdet, ok


def batch_log_evidence(y, sigma, fixed, n_fixed_pairs, new_sin, new_cos, jitter, priors,
                       flat_prior=False, return_coeffs=False):
    """Conditional Laplace log-evidence for many designs sharing columns.

    Every design consists of one new sinusoid pair (rows of ``new_sin`` and
    ``new_cos``, shape ``(m, N)``) plus the ``fixed`` columns ``(N, p)``,
    whose first ``2 * n_fixed_pairs`` columns are sinusoid pairs and the rest
    polynomial terms.  ``new_sin=None`` evaluates the fixed design alone.
    Each design is evaluated at every jitter value in ``jitter``.

    Returns
    -------
    ndarray, shape (m, J)
        Log-evidence; ``-inf`` for rejected designs or modes outside the
        prior support.  With ``return_coeffs`` also the ``(m, J, d)``
        coefficients ordered ``[S_new, C_new, fixed...]``.
    """
    y = np.asarray(y, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    jitter = np.atleast_1d(np.asarray(jitter, dtype=float))
    fixed = np.asarray(fixed, dtype=float).reshape(y.size, -1)
    p = fixed.shape[1]
    J = jitter.size
    W = 1.0 / (sigma[None, :] ** 2 + jitter[:, None] ** 2)  # (J, N)
    Wy = W * y
    yWy = Wy @ y
    lognorm = -0.5 * np.sum(np.log(TWO_PI / W), axis=1)
    FF = np.einsum("jn,na,nb->jab", W, fixed, fixed)
    Fy = Wy @ fixed
    if new_sin is None:
        m, d, q = 1, p, 0
        h = FF.transpose(1, 2, 0)[:, :, None, :]  # (d, d, 1, J)
        rhs = Fy.T[:, None, :]
    else:
        S = np.asarray(new_sin)
        C = np.asarray(new_cos)
        m, q = S.shape[0], 2
        d = p + 2
        h = np.empty((d, d, m, J))
        h[0, 0] = (S * S) @ W.T
        h[1, 1] = (C * C) @ W.T
        h[0, 1] = h[1, 0] = (S * C) @ W.T
        rhs = np.empty((d, m, J))
        rhs[0] = S @ Wy.T
        rhs[1] = C @ Wy.T
        if p:
            WF = (W[:, :, None] * fixed[None]).transpose(1, 2, 0).reshape(y.size, p * J)
            sF = (S @ WF).reshape(m, p, J).transpose(1, 0, 2)
            cF = (C @ WF).reshape(m, p, J).transpose(1, 0, 2)
            h[0, 2:] = h[2:, 0] = sF
            h[1, 2:] = h[2:, 1] = cF
            h[2:, 2:] = FF.transpose(1, 2, 0)[:, :, None, :]
            rhs[2:] = Fy.T[:, None, :]
    if d == 0:
        out = np.broadcast_to(lognorm - 0.5 * yWy, (m, J)).copy()
        return (out, np.zeros((m, J, 0))) if return_coeffs else out
    theta, logdet, ok = _batch_spd_solve(h, rhs)
    wsum = W.sum(axis=1)
    for i in range(q + 2 * n_fixed_pairs):
        ok &= h[i, i] > ZERO_COLUMN * wsum
    chi2 = np.maximum(yWy - np.sum(theta * rhs, axis=0), 0.0)
    theta = np.moveaxis(theta, 0, -1)
    out = lognorm - 0.5 * chi2 + 0.5 * d * LOG_TWO_PI - 0.5 * logdet
    if not flat_prior:
        lp = np.zeros(out.shape)
        if q:
            lp += log_prior_amplitude_pair(theta[..., 0], theta[..., 1], priors, floor=True)
        for i in range(n_fixed_pairs):
            lp += log_prior_amplitude_pair(theta[..., q + 2 * i], theta[..., q + 2 * i + 1], priors, floor=True)
        npoly = p - 2 * n_fixed_pairs
        if npoly:
            lp += np.sum(log_prior_coefficient(theta[..., d - npoly:], priors), axis=-1)
        out = out + lp
    out = np.where(ok, out, -np.inf)
    if return_coeffs:
        return out, theta
    return out
