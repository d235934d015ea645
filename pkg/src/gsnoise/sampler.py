"""Noise sequence generators: the GS mixture law, white Gaussian noise, and
the alpha-sub-Gaussian baseline.

GS sequences are rolled forward sample by sample: the first p samples are one
exact joint draw, and every later sample comes from the exact conditional law
given the previous p-1 samples.  The conditional of the mixture decomposes
into a posterior-weighted pair (fresh Gaussian, or a univariate student with
alpha + p - 1 degrees of freedom located at delta = h^T Sigma_11^{-1} Sigma_12
and rescaled by the Schur complement), so no rejection step is needed and
every sliding p-window carries the exact joint law.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from numpy.lib.stride_tricks import sliding_window_view

from .mathcore import RandomStream, SpdMatrix
from .model import GsParams


@dataclass(frozen=True)
class NoiseSequence:
    """A scalar sample stream with provenance tag.

    ``windows(p)`` returns the stride-1 sliding-window view with exactly
    len(samples) - p + 1 rows of dimension p.
    """

    samples: np.ndarray
    origin: str = field(default="unknown")

    def __post_init__(self):
        s = np.ascontiguousarray(self.samples, dtype=np.float64)
        if s.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.isfinite(s).all():
            raise ValueError("all samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size

    def windows(self, p):
        if not 1 <= p <= self.samples.size:
            raise ValueError(f"window size {p} out of range for {self.samples.size} samples")
        return sliding_window_view(self.samples, p)


def _origin_tag(model, param_text, rng):
    digest = hashlib.sha256(param_text.encode()).hexdigest()[:12]
    return f"{model}:{digest}:seed={rng.seed},stream={rng.stream_id}"


def _gs_param_text(params):
    st = ",".join(format(v, ".17g") for v in params.sigma_tilde.entries.ravel())
    return (
        f"alpha={params.alpha:.17g};gamma_g={params.gamma_g:.17g};"
        f"gamma_s={params.gamma_s:.17g};rho={params.rho:.17g};p={params.p};st={st}"
    )


def sample_stable_subordinator(alpha, rng, size):
    """Positively skewed stable variates S with E exp(-l S) = exp(-(2l)^(alpha/2)).

    S ~ S(alpha/2, beta=1, 2 cos(alpha pi / 4)^(2/alpha), 0), generated by the
    polar transformation method for totally skewed stable laws; all draws are
    strictly positive for 0 < alpha < 2.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"subordinator requires 0 < alpha < 2, got {alpha}")
    nu = alpha / 2.0
    gen = rng.generator
    v = gen.uniform(-math.pi / 2.0, math.pi / 2.0, size=size)
    w = gen.exponential(1.0, size=size)
    num = np.sin(nu * (v + math.pi / 2.0)) / np.cos(v) ** (1.0 / nu)
    rest = (np.cos(v - nu * (v + math.pi / 2.0)) / w) ** ((1.0 - nu) / nu)
    return 2.0 * num * rest


def sample_gs_vector(params: GsParams, rng, size=None, return_labels=False):
    """Exact joint draws from the GS law.

    With probability rho the draw is Gaussian (zero mean, covariance
    2 gamma_g^2 I); otherwise it is a student vector with dof alpha and scale
    matrix Sigma, realized as a Gaussian draw rescaled by sqrt(alpha/chi2_alpha).
    Returns a (p,) vector for size=None, else an (size, p) array; with
    ``return_labels`` a boolean array marking the Gaussian-branch draws is
    attached.
    """
    gen = rng.generator
    n = 1 if size is None else int(size)
    p = params.p
    labels = gen.uniform(size=n) < params.rho
    out = np.empty((n, p))
    n_gauss = int(labels.sum())
    if n_gauss:
        out[labels] = math.sqrt(2.0) * params.gamma_g * gen.standard_normal((n_gauss, p))
    n_stud = n - n_gauss
    if n_stud:
        z = gen.standard_normal((n_stud, p)) @ params.sigma.chol_lower.T
        v = gen.chisquare(params.alpha, size=n_stud)
        out[~labels] = z * np.sqrt(params.alpha / v)[:, None]
    if size is None:
        out, labels = out[0], bool(labels[0])
    return (out, labels) if return_labels else out


def sample_gs_conditional(params: GsParams, history, rng, size=None):
    """Draws from the conditional law of the next sample given p-1 history values.

    This is the exact per-step law of ``sample_gs_sequence``: a fresh
    Gaussian with posterior probability proportional to rho times the
    Gaussian history marginal, otherwise a relocated and rescaled student
    draw with alpha + p - 1 degrees of freedom.
    """
    cond = params._conditioner
    h, q1, norm_sq, delta = cond.history_stats(history)
    a = params.alpha
    w_gauss = params.rho * math.exp(cond.log_cg - norm_sq / (4.0 * params.gamma_g**2))
    w_stud = (1.0 - params.rho) * math.exp(
        cond.log_ct - 0.5 * (a + params.p - 1) * math.log1p(q1 / a)
    )
    prob_gauss = w_gauss / (w_gauss + w_stud)
    gen = rng.generator
    n = 1 if size is None else int(size)
    pick = gen.uniform(size=n) < prob_gauss
    out = np.empty(n)
    n_gauss = int(pick.sum())
    if n_gauss:
        out[pick] = math.sqrt(2.0) * params.gamma_g * gen.standard_normal(n_gauss)
    if n - n_gauss:
        dof = a + params.p - 1
        scale = math.sqrt(cond.cond_scale_sq * (a + q1) / dof)
        out[~pick] = delta + scale * gen.standard_t(dof, size=n - n_gauss)
    return float(out[0]) if size is None else out


@njit(cache=True)
def _roll_gs(out, start, u, z_gauss, t_stud, a11_inv, coeffs, cond_scale_sq,
             cond_dof, alpha, rho, gamma_g, log_cg, log_ct):
    p1 = coeffs.shape[0]
    inv4g2 = 1.0 / (4.0 * gamma_g * gamma_g)
    half_marg = 0.5 * (alpha + p1)
    sqrt2g = math.sqrt(2.0) * gamma_g
    for i in range(start, out.shape[0]):
        q1 = 0.0
        norm_sq = 0.0
        delta = 0.0
        for r in range(p1):
            hr = out[i - p1 + r]
            norm_sq += hr * hr
            delta += coeffs[r] * hr
            acc = 0.0
            for c in range(p1):
                acc += a11_inv[r, c] * out[i - p1 + c]
            q1 += hr * acc
        w_gauss = rho * math.exp(log_cg - norm_sq * inv4g2)
        w_stud = (1.0 - rho) * math.exp(log_ct - half_marg * math.log1p(q1 / alpha))
        if u[i] * (w_gauss + w_stud) < w_gauss:
            out[i] = sqrt2g * z_gauss[i]
        else:
            scale = math.sqrt(cond_scale_sq * (alpha + q1) / cond_dof)
            out[i] = delta + scale * t_stud[i]


def sample_gs_sequence(params: GsParams, length, rng, burn_in=0):
    """GS noise sequence of the requested length (length >= p).

    Every stride-1 window of dimension p has the exact GS joint law; lags
    beyond p-1 follow the conditional-mean extension of the rolled
    construction (documented, not zero).
    """
    length = int(length)
    burn_in = int(burn_in)
    if length < params.p:
        raise ValueError(f"length {length} smaller than memory order p={params.p}")
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    p = params.p
    total = length + burn_in
    gen = rng.generator
    if p == 1:
        out = sample_gs_vector(params, rng, size=total).ravel()
    else:
        cond = params._conditioner
        out = np.empty(total)
        out[:p] = sample_gs_vector(params, rng)
        u = gen.uniform(size=total)
        z = gen.standard_normal(total)
        t = gen.standard_t(params.alpha + p - 1, size=total)
        a11_inv = np.linalg.inv(cond.s11.entries)
        _roll_gs(out, p, u, z, t, a11_inv, cond.coeffs, cond.cond_scale_sq,
                 params.alpha + p - 1, params.alpha, params.rho, params.gamma_g,
                 cond.log_cg, cond.log_ct)
    return NoiseSequence(out[burn_in:], _origin_tag("gs", _gs_param_text(params), rng))


@njit(cache=True)
def _roll_asg(out, start, subord, z, coeffs, cond_scale_sq):
    p1 = coeffs.shape[0]
    for i in range(start, out.shape[0]):
        delta = 0.0
        for r in range(p1):
            delta += coeffs[r] * out[i - p1 + r]
        out[i] = delta + math.sqrt(subord[i] * cond_scale_sq) * z[i]


def sample_asg_sequence(alpha, sigma, length, rng):
    """Alpha-sub-Gaussian baseline: sliding blocks of sqrt(S) * G.

    The first block is one exact sqrt(S) * Gaussian(Sigma) draw; each later
    sample applies the Gaussian conditional location a^T h (scale free) with
    innovation scale sqrt(S_i * schur), drawing a fresh subordinator per step.
    Requires 0 < alpha < 2.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha-sub-Gaussian model requires 0 < alpha < 2, got {alpha}")
    if not isinstance(sigma, SpdMatrix):
        sigma = SpdMatrix(sigma)
    length = int(length)
    p = sigma.dim
    if length < p:
        raise ValueError(f"length {length} smaller than block dimension {p}")
    gen = rng.generator
    out = np.empty(length)
    s0 = sample_stable_subordinator(alpha, rng, 1)[0]
    out[:p] = math.sqrt(s0) * (sigma.chol_lower @ gen.standard_normal(p))
    if length > p:
        subord = sample_stable_subordinator(alpha, rng, length)
        z = gen.standard_normal(length)
        if p == 1:
            out[1:] = np.sqrt(subord[1:] * sigma.entries[0, 0]) * z[1:]
        else:
            s = sigma.entries
            coeffs = np.linalg.solve(s[: p - 1, : p - 1], s[: p - 1, p - 1])
            schur = float(s[p - 1, p - 1] - s[: p - 1, p - 1] @ coeffs)
            _roll_asg(out, p, subord, z, coeffs, schur)
    tag = ",".join(format(v, ".17g") for v in sigma.entries.ravel())
    return NoiseSequence(out, _origin_tag("asg", f"alpha={alpha:.17g};sigma={tag}", rng))


def sample_wgn(gamma_g, length, rng):
    """I.i.d. zero-mean Gaussian samples with variance 2 gamma_g^2."""
    if gamma_g <= 0:
        raise ValueError("gamma_g must be positive")
    length = int(length)
    if length < 1:
        raise ValueError("length must be at least 1")
    out = math.sqrt(2.0) * gamma_g * rng.generator.standard_normal(length)
    return NoiseSequence(out, _origin_tag("wgn", f"gamma_g={gamma_g:.17g}", rng))
