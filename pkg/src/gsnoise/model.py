"""The Gaussian-student mixture law for bursty mixed noise.

A memory-order-p noise vector N follows the weighted mixture

    f(n) = rho * k1 * exp(-||n||^2 / (4 gamma_g^2))
         + (1 - rho) * k2 * (1 + n^T Sigma^{-1} n / alpha)^{-(alpha+p)/2}

i.e. an isotropic Gaussian (background component, variance 2 gamma_g^2 per
axis) plus a multivariate student density with alpha degrees of freedom and
scale matrix Sigma = 2 gamma_s^2 * sigma_tilde, where sigma_tilde has unit
diagonal.  This module provides the joint / conditional / marginal densities,
the characteristic function, fractional absolute moments, special-case
classification and the generalized SNR.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import quad

from .mathcore import AccuracyError, SpdMatrix

_LOG_2SQRTPI = math.log(2.0 * math.sqrt(math.pi))


class MomentDivergenceError(ValueError):
    """The requested absolute moment does not exist (r >= alpha)."""


class SpecialCase(enum.Enum):
    WGN = "wgn"
    WHITE_IN = "white-in"
    WHITE_MIXED = "white-mixed"
    BURSTY_IN = "bursty-in"
    GENERAL = "general"


@dataclass(frozen=True)
class GsParams:
    """Full parameter tuple (alpha, gamma_g, gamma_s, rho, p, sigma_tilde).

    ``sigma_tilde`` is the unit-diagonal regularized covariance; the student
    scale matrix is Sigma = 2 * gamma_s^2 * sigma_tilde.  Derived
    normalization constants k1 and k2 are cached on first use.
    """

    alpha: float
    gamma_g: float
    gamma_s: float
    rho: float
    sigma_tilde: SpdMatrix

    def __post_init__(self):
        if not isinstance(self.sigma_tilde, SpdMatrix):
            object.__setattr__(self, "sigma_tilde", SpdMatrix(self.sigma_tilde))
        for name in ("alpha", "gamma_g", "gamma_s", "rho"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ValueError(f"{name} must be a finite number, got {v!r}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.gamma_g <= 0 or self.gamma_s <= 0:
            raise ValueError("scale parameters gamma_g, gamma_s must be positive")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        diag = np.diag(self.sigma_tilde.entries)
        if np.abs(diag - 1.0).max() > 1e-12:
            raise ValueError("sigma_tilde must have unit diagonal")

    @property
    def p(self):
        return self.sigma_tilde.dim

    @cached_property
    def sigma(self):
        """Student scale matrix Sigma = 2 gamma_s^2 sigma_tilde."""
        return self.sigma_tilde.scaled(2.0 * self.gamma_s**2)

    @cached_property
    def log_k1(self):
        return -self.p * (_LOG_2SQRTPI + math.log(self.gamma_g))

    @cached_property
    def k1(self):
        return math.exp(self.log_k1)

    @cached_property
    def log_k2(self):
        a, p = self.alpha, self.p
        return (
            math.lgamma((a + p) / 2.0)
            - math.lgamma(a / 2.0)
            - (p / 2.0) * math.log(2.0 * self.gamma_s**2 * a * math.pi)
            - 0.5 * self.sigma_tilde.logdet
        )

    @cached_property
    def k2(self):
        return math.exp(self.log_k2)

    @cached_property
    def _conditioner(self):
        if self.p < 2:
            raise ValueError("conditioning requires memory order p >= 2")
        return _Conditioner(self)


class _Conditioner:
    """Cached partition quantities for conditioning on the leading p-1 samples."""

    def __init__(self, params: GsParams):
        sig = params.sigma.entries
        p = params.p
        s11 = SpdMatrix(sig[: p - 1, : p - 1])
        s12 = sig[: p - 1, p - 1]
        self.params = params
        self.s11 = s11
        self.coeffs = np.linalg.solve(s11.entries, s12)  # Sigma_11^{-1} Sigma_12
        self.cond_scale_sq = float(sig[p - 1, p - 1] - s12 @ self.coeffs)
        # (p-1)-dimensional marginal constants: isotropic Gaussian + student
        # with the leading-block scale matrix and the same dof.
        a = params.alpha
        self.log_cg = -(p - 1) * (_LOG_2SQRTPI + math.log(params.gamma_g))
        self.log_ct = (
            math.lgamma((a + p - 1) / 2.0)
            - math.lgamma(a / 2.0)
            - ((p - 1) / 2.0) * math.log(a * math.pi)
            - 0.5 * s11.logdet
        )

    def history_stats(self, history):
        h = np.asarray(history, dtype=np.float64)
        if h.shape != (self.params.p - 1,):
            raise ValueError(
                f"history must have length p-1 = {self.params.p - 1}, got shape {h.shape}"
            )
        if not np.isfinite(h).all():
            raise ValueError("history must be finite")
        q1 = float(self.s11.quad_form_inv(h))
        norm_sq = float(h @ h)
        delta = float(self.coeffs @ h)
        return h, q1, norm_sq, delta

    def log_marginal(self, q1, norm_sq):
        """Log density of the (p-1)-dimensional history marginal."""
        pr = self.params
        a = pr.alpha
        lg = _log_weight(pr.rho) + self.log_cg - norm_sq / (4.0 * pr.gamma_g**2)
        lt = (
            _log_weight(1.0 - pr.rho)
            + self.log_ct
            - ((a + pr.p - 1) / 2.0) * math.log1p(q1 / a)
        )
        return np.logaddexp(lg, lt)


def _log_weight(w):
    return math.log(w) if w > 0.0 else -math.inf


def _as_points(n, p):
    x = np.asarray(n, dtype=np.float64)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[-1] != p:
        raise ValueError(f"input dimension {pts.shape[-1]} != memory order {p}")
    if not np.isfinite(pts).all():
        raise ValueError("noise vectors must be finite")
    return pts, single


def log_pdf(params: GsParams, n):
    """Log of the joint density, stable for arbitrarily large ||n||.

    Both mixture branches are evaluated in log space and combined with
    logaddexp, so the Gaussian branch underflowing for extreme inputs leaves
    the student branch intact instead of producing -inf.
    """
    pts, single = _as_points(n, params.p)
    q = params.sigma.quad_form_inv(pts)
    norm_sq = np.square(pts).sum(axis=-1)
    a, p = params.alpha, params.p
    log_gauss = _log_weight(params.rho) + params.log_k1 - norm_sq / (4.0 * params.gamma_g**2)
    log_stud = (
        _log_weight(1.0 - params.rho)
        + params.log_k2
        - ((a + p) / 2.0) * np.log1p(q / a)
    )
    out = np.logaddexp(log_gauss, log_stud)
    return float(out[0]) if single else out


def pdf(params: GsParams, n):
    """Joint density at n (a p-vector, or an (m, p) batch of vectors)."""
    out = np.exp(log_pdf(params, n))
    return out


def pdf_at_origin(params: GsParams):
    """rho*k1 + (1-rho)*k2, the joint density at n = 0."""
    return params.rho * params.k1 + (1.0 - params.rho) * params.k2


def conditional_pdf(params: GsParams, history, x):
    """Density of the next sample given the previous p-1 samples.

    Numerator follows the partitioned-quadratic-form identity
    n^T Sigma^{-1} n = h^T Sigma_11^{-1} h + (x - delta)^2 / sigma_c with
    delta = h^T Sigma_11^{-1} Sigma_12 and sigma_c = det(Sigma)/det(Sigma_11);
    the denominator is the analytic (p-1)-dimensional marginal.
    """
    cond = params._conditioner
    h, q1, norm_sq, delta = cond.history_stats(history)
    xv = np.asarray(x, dtype=np.float64)
    single = xv.ndim == 0
    xv = np.atleast_1d(xv)
    if not np.isfinite(xv).all():
        raise ValueError("conditioned sample values must be finite")
    a, p = params.alpha, params.p
    log_gauss = (
        _log_weight(params.rho)
        + params.log_k1
        - (np.square(xv) + norm_sq) / (4.0 * params.gamma_g**2)
    )
    resid = q1 + np.square(xv - delta) / cond.cond_scale_sq
    log_stud = (
        _log_weight(1.0 - params.rho)
        + params.log_k2
        - ((a + p) / 2.0) * np.log1p(resid / a)
    )
    out = np.exp(np.logaddexp(log_gauss, log_stud) - cond.log_marginal(q1, norm_sq))
    return float(out[0]) if single else out


@dataclass(frozen=True)
class MarginalParams:
    """Univariate marginal of the GS law (identical for every component).

    ``scale_p`` is the (p, p) element of the upper-triangular factor R of
    Sigma^{-1}; because R^T R = Sigma^{-1} with R upper triangular this equals
    1/sqrt(Sigma[p-1, p-1]) = 1/(sqrt(2) gamma_s), and the student term below
    then integrates to one (verified against the quadrature-marginalized
    joint in the test suite).
    """

    alpha: float
    gamma_g: float
    rho: float
    scale_p: float

    @classmethod
    def from_params(cls, params: GsParams):
        scale_p = float(params.sigma.inv_factor_upper[params.p - 1, params.p - 1])
        return cls(params.alpha, params.gamma_g, params.rho, scale_p)

    @cached_property
    def k_m(self):
        a = self.alpha
        return (
            a ** (a / 2.0)
            * self.scale_p
            * math.exp(math.lgamma((a + 1) / 2.0) - math.lgamma(a / 2.0))
            / (2.0 * math.gamma(1.5))
        )


def marginal_pdf(m: MarginalParams, n):
    """Univariate marginal density; n scalar or array."""
    x = np.asarray(n, dtype=np.float64)
    single = x.ndim == 0
    x = np.atleast_1d(x)
    a = m.alpha
    gauss = (
        m.rho
        / (2.0 * math.sqrt(math.pi) * m.gamma_g)
        * np.exp(-np.square(x) / (4.0 * m.gamma_g**2))
    )
    stud = (1.0 - m.rho) * m.k_m * (a + np.square(x * m.scale_p)) ** (-(a + 1) / 2.0)
    out = gauss + stud
    return float(out[0]) if single else out


def abs_moment(m: MarginalParams, r):
    """E|N|^r for 0 < r < alpha.

    Gaussian part: rho (2 gamma_g)^r Gamma((r+1)/2) / sqrt(pi).
    Student part:  (1-rho) alpha^{r/2} Gamma((r+3)/2) Gamma((alpha-r)/2)
                   / (Gamma(3/2) Gamma(alpha/2) (r+1) scale_p^r).
    The student part carries scale_p^{-r} (the moment grows with the marginal
    scale 1/scale_p); this is pinned by the Monte-Carlo oracle in the tests.
    """
    if not (isinstance(r, (int, float)) and math.isfinite(r)) or r <= 0:
        raise ValueError(f"moment order r must be positive and finite, got {r!r}")
    if r >= m.alpha:
        raise MomentDivergenceError(
            f"moment of order r={r} does not exist for alpha={m.alpha}"
        )
    a = m.alpha
    gauss = m.rho * (2.0 * m.gamma_g) ** r * math.gamma((r + 1) / 2.0) / math.sqrt(math.pi)
    log_stud = (
        (r / 2.0) * math.log(a)
        + math.lgamma((r + 3) / 2.0)
        + math.lgamma((a - r) / 2.0)
        - math.lgamma(1.5)
        - math.lgamma(a / 2.0)
        - math.log(r + 1.0)
        - r * math.log(m.scale_p)
    )
    return gauss + (1.0 - m.rho) * math.exp(log_stud)


def _student_cf_radial(s, alpha, tol):
    """CF of the student component as a function of s = t^T Sigma t.

    Uses the scale-mixture identity: for X ~ student(alpha, Sigma),
    E exp(i t.X) = E_V exp(-alpha s / (2 V)) with V ~ chi^2_alpha, a smooth
    positive one-dimensional integral.
    """
    if s == 0.0:
        return 1.0
    half_a = 0.5 * alpha
    log_norm = -half_a * math.log(2.0) - math.lgamma(half_a)

    def integrand(v):
        return math.exp(
            -0.5 * alpha * s / v + (half_a - 1.0) * math.log(v) - 0.5 * v + log_norm
        )

    val, err = quad(integrand, 0.0, np.inf, epsabs=tol, epsrel=1e-12, limit=400)
    if err > max(tol, 1e-12):
        raise AccuracyError(
            f"student CF quadrature error {err:g} exceeds tol {tol:g}",
            estimate=val,
            error=err,
        )
    return min(max(val, 0.0), 1.0)


def cf(params: GsParams, t, tol=1e-10):
    """Characteristic function at the p-vector t (real by symmetry).

    rho * exp(-gamma_g^2 ||t||^2) + (1-rho) * psi_alpha(t^T Sigma t), where
    psi_alpha is the student CF reduced to one radial quadrature.
    """
    tv = np.asarray(t, dtype=np.float64)
    if tv.shape != (params.p,):
        raise ValueError(f"t must be a vector of length p={params.p}")
    if not np.isfinite(tv).all():
        raise ValueError("t must be finite")
    norm_sq = float(tv @ tv)
    if norm_sq == 0.0:
        return 1.0
    gauss = math.exp(-params.gamma_g**2 * norm_sq)
    s = float(tv @ params.sigma.entries @ tv)
    stud = _student_cf_radial(s, params.alpha, tol)
    return params.rho * gauss + (1.0 - params.rho) * stud


def gsnr_db(params: GsParams, signal_power):
    """Generalized SNR: 10 log10(P_s / (2 (gamma_g^2 + gamma_s^alpha)))."""
    if not (isinstance(signal_power, (int, float)) and signal_power > 0):
        raise ValueError("signal power must be positive")
    denom = 2.0 * (params.gamma_g**2 + params.gamma_s**params.alpha)
    return 10.0 * math.log10(signal_power / denom)


def degrade(params: GsParams):
    """Classify the parameter tuple into its special case."""
    identity = np.abs(params.sigma_tilde.entries - np.eye(params.p)).max() <= 1e-12
    if params.rho == 1.0:
        return SpecialCase.WGN
    if params.p == 1:
        return SpecialCase.WHITE_IN if params.rho == 0.0 else SpecialCase.WHITE_MIXED
    if params.rho == 0.0 and not identity:
        return SpecialCase.BURSTY_IN
    return SpecialCase.GENERAL
