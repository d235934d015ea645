"""Independent oracles used by the test suite.

Everything here is implemented from first principles (quadrature, direct
iterated integrals, rejection sampling, closed forms from standard special
functions) and deliberately avoids the package's own code paths wherever a
package result is under test.
"""

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, kv


def wallis_piecewise_upsilon(p):
    """Iterated sine-power integral via the Wallis branch structure.

    Branches for p >= 5 use the double-factorial form with the exponents that
    reproduce the direct integral (the two branch prefactors are 2^(p/2) and
    2^((p-1)/2)); anchors: 2, 2*pi, 4*pi for p = 2, 3, 4.
    """
    if p == 2:
        return 2.0
    if p == 3:
        return 2.0 * math.pi
    if p == 4:
        return 4.0 * math.pi

    def dfact(n):
        out = 1
        while n > 1:
            out *= n
            n -= 2
        return out

    if (p - 3) % 2 == 1:  # even p
        prod = 1.0
        for k in range(1, (p - 4) // 2 + 1):
            prod /= 2 * k + 1
        return 2.0 ** (p / 2.0) * math.pi ** ((p - 2) / 2.0) * prod
    prod = 1.0
    for k in range(1, (p - 5) // 2 + 1):
        prod /= 2 * k + 1
    return (
        2.0 ** ((p - 1) / 2.0)
        * math.pi ** ((p - 1) / 2.0)
        * dfact(p - 4)
        / dfact(p - 3)
        * prod
    )


def upsilon_direct_integral(p):
    """(p-2)-fold trigonometric integral evaluated as a product of 1-d quads."""
    if p == 2:
        return 2.0
    value = 2.0 * math.pi
    for k in range(1, p - 2):
        m = p - 2 - k
        part, _ = quad(lambda t, m=m: math.sin(t) ** m, 0.0, math.pi)
        value *= part
    return value


def student_cf_bessel(s, alpha):
    """Closed-form student CF via the Bessel-K representation."""
    if s == 0.0:
        return 1.0
    u = math.sqrt(alpha * s)
    return float(
        kv(alpha / 2.0, u) * u ** (alpha / 2.0)
        / (math.exp(gammaln(alpha / 2.0)) * 2.0 ** (alpha / 2.0 - 1.0))
    )


def student_logpdf(x, alpha, sigma):
    """Multivariate student log density, implemented independently."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    p = sigma.shape[0]
    q = np.einsum("ij,jk,ik->i", x, np.linalg.inv(sigma), x)
    log_norm = (
        gammaln((alpha + p) / 2.0)
        - gammaln(alpha / 2.0)
        - (p / 2.0) * math.log(alpha * math.pi)
        - 0.5 * np.linalg.slogdet(sigma)[1]
    )
    return log_norm - ((alpha + p) / 2.0) * np.log1p(q / alpha)


def tail_integral_identity_lhs(p, alpha, w):
    """Quadrature of int_0^inf r^(p-2) (1 + (r^2 + w^2)/alpha)^(-(alpha+p)/2) dr."""
    val, _ = quad(
        lambda r: r ** (p - 2) * (1.0 + (r * r + w * w) / alpha) ** (-(alpha + p) / 2.0),
        0.0,
        np.inf,
        epsabs=1e-12,
        limit=300,
    )
    return val


def tail_integral_identity_rhs(p, alpha, w):
    """Closed form of the same integral through the Beta function."""
    return (
        alpha ** ((alpha + p) / 2.0)
        * (alpha + w * w) ** (-(alpha + 1) / 2.0)
        * math.exp(
            gammaln((p - 1) / 2.0)
            + gammaln((alpha + 1) / 2.0)
            - gammaln((alpha + p) / 2.0)
        )
        / 2.0
    )


def rejection_conditional_sample(params, history, rng, size, grid_half_width=200.0):
    """Acceptance-rejection draws from the GS conditional law.

    Proposal: equal-weight mixture of a Gaussian at the origin (the WGN
    branch) and a Cauchy centered at the conditional location; the envelope
    constant is computed numerically on a dense grid and padded.  Used to
    cross-validate both the conditional density and the production rolled
    sampler.
    """
    from scipy.stats import cauchy, norm

    from gsnoise.model import conditional_pdf

    history = np.asarray(history, dtype=np.float64)
    sig = params.sigma.entries
    p = params.p
    s11 = sig[: p - 1, : p - 1]
    s12 = sig[: p - 1, p - 1]
    coeffs = np.linalg.solve(s11, s12)
    delta = float(coeffs @ history)
    schur = float(sig[p - 1, p - 1] - s12 @ coeffs)
    gauss_scale = math.sqrt(2.0) * params.gamma_g
    cauchy_scale = math.sqrt(schur)

    def proposal_pdf(x):
        return 0.5 * norm.pdf(x, 0.0, gauss_scale) + 0.5 * cauchy.pdf(x, delta, cauchy_scale)

    grid = np.linspace(delta - grid_half_width, delta + grid_half_width, 40001)
    envelope = 1.3 * float(np.max(conditional_pdf(params, history, grid) / proposal_pdf(grid)))

    out = np.empty(size)
    filled = 0
    while filled < size:
        n = 2 * (size - filled) + 16
        pick_gauss = rng.generator.uniform(size=n) < 0.5
        prop = np.where(
            pick_gauss,
            rng.generator.normal(0.0, gauss_scale, size=n),
            delta + cauchy_scale * rng.generator.standard_cauchy(n),
        )
        ratio = conditional_pdf(params, history, prop) / (envelope * proposal_pdf(prop))
        if ratio.max() > 1.0:
            raise AssertionError("rejection envelope violated; enlarge the constant")
        accept = rng.generator.uniform(size=n) < ratio
        take = prop[accept][: size - filled]
        out[filled : filled + take.size] = take
        filled += take.size
    return out


def histogram_density(samples, lo, hi, bins):
    """Midpoints and normalized histogram density over [lo, hi]."""
    counts, edges = np.histogram(samples, bins=bins, range=(lo, hi))
    width = edges[1] - edges[0]
    mids = 0.5 * (edges[:-1] + edges[1:])
    return mids, counts / (counts.sum() * width)


def charpoly_eigenvalues_5x5():
    """Toeplitz(1, .8, .6, .4, .2) eigenvalues frozen from a 30-digit
    characteristic-polynomial root solve (independent of any eigensolver)."""
    return np.array(
        [
            3.43555952234015776799236862942,
            1.04721359549995793928183473375,
            0.254754153585020388020707692147,
            0.152786404500042060718165266254,
            0.109686324074821843986923678433,
        ]
    )
