"""Numerical substrate: small dense SPD linear algebra, special functions,
adaptive quadrature over unbounded boxes, and reproducible random streams.

Everything here is deterministic and side-effect free; ``RandomStream`` is the
only stateful object and each instance is meant to be owned by a single
consumer.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import cubature


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix handed to SpdMatrix is not symmetric positive definite."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class AccuracyError(RuntimeError):
    """Quadrature could not reach the requested tolerance within budget.

    Carries the best available estimate and its error bound.
    """

    def __init__(self, message, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


class SpdMatrix:
    """Dense symmetric positive-definite matrix with cached factorizations.

    Construction symmetrizes the input exactly ((A + A^T)/2) and fails with
    :class:`NotPositiveDefiniteError` unless all eigenvalues are positive.
    Cached pieces:

    * ``chol_lower``          lower-triangular L with  M = L L^T
    * ``inv_factor_upper``    upper-triangular R with  M^{-1} = R^T R, so that
      ``||R x||^2 = x^T M^{-1} x`` and row p of R has its single nonzero at
      (p, p); hence ``R[p-1, p-1] == 1/sqrt(M[p-1, p-1])``.
    * ``eigenvalues`` (descending) and orthonormal ``eigen_basis`` P with
      M = P^T diag(eigenvalues) P  (rows of P are eigenvectors).

    Instances are immutable; all exposed arrays are read-only views.
    """

    __slots__ = ("_m", "_eigvals", "_basis", "_chol", "_inv_upper", "_logdet")

    def __init__(self, entries):
        m = np.asarray(entries, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"square matrix required, got shape {m.shape}")
        if not np.isfinite(m).all():
            raise ValueError("matrix entries must be finite")
        m = 0.5 * (m + m.T)
        w, v = np.linalg.eigh(m)
        if w[0] <= 0.0:
            raise NotPositiveDefiniteError(
                f"matrix is not positive definite (min eigenvalue {w[0]:.3e})",
                min_eigenvalue=float(w[0]),
            )
        order = np.argsort(w)[::-1]
        self._m = _readonly(m)
        self._eigvals = _readonly(w[order])
        self._basis = _readonly(v[:, order].T)
        self._chol = _readonly(np.linalg.cholesky(m))
        self._inv_upper = _readonly(self._reversed_cholesky_inverse(m))
        self._logdet = float(np.sum(np.log(self._eigvals)))

    @staticmethod
    def _reversed_cholesky_inverse(m):
        # M = U U^T with U upper triangular (Cholesky of the flipped matrix),
        # then R = U^{-1} gives M^{-1} = R^T R with R upper triangular.
        u = np.linalg.cholesky(m[::-1, ::-1])[::-1, ::-1]
        from scipy.linalg import solve_triangular

        return solve_triangular(u, np.eye(m.shape[0]), lower=False)

    @property
    def dim(self):
        return self._m.shape[0]

    @property
    def entries(self):
        return self._m

    @property
    def eigenvalues(self):
        return self._eigvals

    @property
    def eigen_basis(self):
        return self._basis

    @property
    def chol_lower(self):
        return self._chol

    @property
    def inv_factor_upper(self):
        return self._inv_upper

    @property
    def det(self):
        return math.exp(self._logdet)

    @property
    def logdet(self):
        return self._logdet

    def quad_form_inv(self, x):
        """x^T M^{-1} x, computed as ||R x||^2; x may be (dim,) or (n, dim)."""
        y = np.asarray(x, dtype=np.float64) @ self._inv_upper.T
        return np.square(y).sum(axis=-1)

    def scaled(self, factor):
        """SpdMatrix for ``factor * M`` (factor > 0)."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return SpdMatrix(factor * self._m)

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim})"


def ln_gamma(x):
    """Natural log of the Gamma function for x > 0."""
    if not (isinstance(x, (int, float)) and math.isfinite(x)) or x <= 0.0:
        raise ValueError(f"ln_gamma requires finite x > 0, got {x!r}")
    return math.lgamma(x)


def upsilon(p):
    """Iterated surface integral (p-1)*pi^(p/2) / (2*Gamma(3/2)*Gamma((p+1)/2)).

    Equals the surface area of the unit sphere in R^(p-1); defined for
    integer p >= 2.
    """
    if int(p) != p or p < 2:
        raise ValueError(f"upsilon requires an integer p >= 2, got {p!r}")
    p = int(p)
    # Gamma(3/2) = sqrt(pi)/2, so the expression collapses to
    # (p-1) * pi^((p-1)/2) / Gamma((p+1)/2).
    return (p - 1) * math.pi ** ((p - 1) / 2.0) / math.gamma((p + 1) / 2.0)


def eigen_sym(m):
    """Descending eigenvalues and orthonormal basis P with m = P^T diag(w) P."""
    if not isinstance(m, SpdMatrix):
        m = SpdMatrix(m)
    return m.eigenvalues, m.eigen_basis


def tri_factor_inverse(m):
    """Upper-triangular R with R^T R = m^{-1} (see SpdMatrix.inv_factor_upper)."""
    if not isinstance(m, SpdMatrix):
        m = SpdMatrix(m)
    return m.inv_factor_upper


def integrate_nd(f, d, bounds=None, tol=1e-8, max_subdivisions=20000):
    """Adaptive quadrature of a vectorized integrand over R^d or a box, d <= 3.

    ``f`` maps an (n, d) array of points to an (n,) array of values.  With
    ``bounds=None`` the integral runs over all of R^d via the coordinatewise
    tangent substitution; otherwise ``bounds`` is a sequence of d finite
    (lo, hi) pairs.  Returns ``(estimate, error_bound)`` and raises
    :class:`AccuracyError` if the requested absolute tolerance cannot be
    certified within the subdivision budget.
    """
    if d not in (1, 2, 3):
        raise ValueError("integrate_nd supports d in {1, 2, 3}")

    if bounds is None:
        half = math.pi / 2.0

        def transformed(u):
            u = np.atleast_2d(u)
            x = np.tan(u)
            jac = np.prod(1.0 / np.square(np.cos(u)), axis=1)
            vals = np.asarray(f(x), dtype=np.float64)
            return vals * jac

        lo = np.full(d, -half)
        hi = np.full(d, half)
        g = transformed
    else:
        if len(bounds) != d:
            raise ValueError("bounds must provide one (lo, hi) pair per axis")
        lo = np.array([b[0] for b in bounds], dtype=np.float64)
        hi = np.array([b[1] for b in bounds], dtype=np.float64)
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("bounds must be finite; use bounds=None for R^d")

        def g(u):
            return np.asarray(f(np.atleast_2d(u)), dtype=np.float64)

    res = cubature(g, lo, hi, rtol=0.0, atol=tol, max_subdivisions=max_subdivisions)
    estimate = float(res.estimate)
    error = float(res.error)
    if res.status != "converged" or not math.isfinite(estimate):
        raise AccuracyError(
            f"quadrature did not reach atol={tol:g} (error bound {error:g})",
            estimate=estimate,
            error=error,
        )
    return estimate, error


class RandomStream:
    """Counter-based random stream keyed by (seed, stream_id).

    The same key reproduces the identical variate sequence bit for bit;
    distinct stream ids under one seed give statistically independent
    streams.  ``substream(k)`` derives the stream with id ``stream_id + k``,
    which is how parallel consumers (benchmark rounds, worker shards)
    partition randomness deterministically.
    """

    __slots__ = ("seed", "stream_id", "generator")

    def __init__(self, seed, stream_id=0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def substream(self, k):
        return RandomStream(self.seed, (self.stream_id + int(k)) & 0xFFFFFFFFFFFFFFFF)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"
