"""Closed-form AWGN quantities.

All rates are in nats. ``ch.noise_variance`` is N and ``ch.cost_threshold``
is the mean power Gamma; both are in power units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specfn import (
    _as_generator,
    log_bessel_i,
    log_gamma,
    sample_noncentral_chisq,
    std_normal_cdf,
)


@dataclass(frozen=True)
class ChannelSpec:
    noise_variance: float
    cost_threshold: float

    def __post_init__(self):
        if not (self.noise_variance > 0 and math.isfinite(self.noise_variance)):
            raise ValueError(f"noise_variance must be positive, got {self.noise_variance}")
        if not (self.cost_threshold > 0 and math.isfinite(self.cost_threshold)):
            raise ValueError(f"cost_threshold must be positive, got {self.cost_threshold}")

    @property
    def N(self) -> float:
        return self.noise_variance

    @property
    def gamma(self) -> float:
        return self.cost_threshold

    def with_cost(self, cost: float) -> "ChannelSpec":
        return ChannelSpec(self.noise_variance, cost)


@dataclass(frozen=True)
class ShellSpec:
    """Codewords uniform on the sphere of radius ``sqrt(blocklength * shell_cost)``."""

    blocklength: int
    shell_cost: float

    def __post_init__(self):
        if int(self.blocklength) != self.blocklength or self.blocklength < 1:
            raise ValueError("blocklength must be a positive integer")
        if not self.shell_cost > 0:
            raise ValueError("shell_cost must be positive")

    @property
    def radius(self) -> float:
        return math.sqrt(self.blocklength * self.shell_cost)


def capacity(ch: ChannelSpec) -> float:
    return 0.5 * math.log1p(ch.gamma / ch.N)


def capacity_derivative(ch: ChannelSpec) -> float:
    return 1.0 / (2.0 * (ch.gamma + ch.N))


def dispersion(ch: ChannelSpec) -> float:
    g, N = ch.gamma, ch.N
    return (g * g + 2.0 * g * N) / (2.0 * (N + g) ** 2)


def nu_x(ch: ChannelSpec, x):
    """Variance of the single-letter information density at input ``x``."""
    g, N = ch.gamma, ch.N
    x = np.asarray(x, dtype=float)
    out = (g * g + 2.0 * x * x * N) / (2.0 * (N + g) ** 2)
    return float(out) if out.ndim == 0 else out


def log_density_ratio_sample(ch: ChannelSpec, n: int, s, rng, size=None):
    r"""Draw :math:`\log W(Y|X)/q(Y)` for an input of per-block cost ``s``.

    Here :math:`q = \mathcal N(0, (\Gamma+N)I_n)`. By spherical symmetry the
    statistic depends on ``X`` only through :math:`s = \|X\|^2/n` and equals

    .. math::
        nC(\Gamma) + \frac{ns}{2\Gamma}
        - \frac{\Gamma}{2(N+\Gamma)}\,\chi^2_n\!\left(\frac{nNs}{\Gamma^2}\right).

    ``s`` may be an array (one cost per draw).
    """
    g, N = ch.gamma, ch.N
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("per-block cost s must be nonnegative")
    lam = n * N * s / (g * g)
    chi = sample_noncentral_chisq(n, lam, rng, size=size)
    out = n * capacity(ch) + n * s / (2.0 * g) - g / (2.0 * (N + g)) * chi
    return float(out) if np.ndim(out) == 0 else out


def direct_log_density_ratio_sample(ch: ChannelSpec, n: int, s: float, rng, size: int):
    """Same statistic as :func:`log_density_ratio_sample`, simulated from vectors.

    Draws ``X`` uniformly on the radius ``sqrt(n s)`` sphere, adds Gaussian
    noise and evaluates both densities in closed form. Costs O(n) per draw;
    kept as the independent check of the chi-square representation.
    """
    g, N = ch.gamma, ch.N
    gen = _as_generator(rng)
    out = np.empty(size)
    chunk = max(1, 2_000_000 // n)
    for start in range(0, size, chunk):
        m = min(chunk, size - start)
        x = sample_sphere(n, math.sqrt(n * s), gen, m)
        z = gen.standard_normal((m, n)) * math.sqrt(N)
        y = x + z
        out[start : start + m] = (
            0.5 * n * math.log1p(g / N)
            - np.einsum("ij,ij->i", z, z) / (2.0 * N)
            + np.einsum("ij,ij->i", y, y) / (2.0 * (N + g))
        )
    return out


def sample_sphere(n: int, radius: float, rng, size: int):
    """Uniform points on the radius-``radius`` sphere in R^n (normalized Gaussians)."""
    gen = _as_generator(rng)
    v = gen.standard_normal((size, n))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    return radius * v / norms


def phi_n_gamma(ch: ChannelSpec, n: int, gamma, s):
    r"""Gaussian approximation to the converse tail at threshold ``n * gamma``.

    .. math::
        \Phi\!\left(\frac{\sqrt{2n}(N+\Gamma)(\gamma - C(\Gamma))}{\sqrt{\Gamma^2+2Ns}}
        + \frac{\sqrt n(\Gamma - s)}{\sqrt 2\sqrt{\Gamma^2+2Ns}}\right)
    """
    g, N = ch.gamma, ch.N
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("phi_n_gamma is defined for s >= 0")
    root = np.sqrt(g * g + 2.0 * N * s)
    arg = math.sqrt(2.0 * n) * (N + g) * (gamma - capacity(ch)) / root + math.sqrt(n) * (g - s) / (
        math.sqrt(2.0) * root
    )
    out = std_normal_cdf(arg)
    return float(out) if np.ndim(out) == 0 else out


def qcc_log_density(shell: ShellSpec, ch: ChannelSpec, y_norm):
    r"""Log density of ``Y = X + Z`` with ``X`` uniform on the shell, as a function of ``||y||``.

    .. math::
        \log Q^{cc}(y) = \log\Gamma(n/2) - \log 2 - \tfrac n2\log(\pi N)
        - \frac{R^2+\|y\|^2}{2N} + (\tfrac n2 - 1)\log\frac{N}{R\|y\|}
        + \log I_{n/2-1}\!\left(\frac{R\|y\|}{N}\right)
    """
    n = shell.blocklength
    if n < 2:
        raise ValueError("shell output density needs n >= 2")
    N = ch.N
    R = shell.radius
    y = np.asarray(y_norm, dtype=float)
    if np.any(~(y > 0)):
        raise ValueError("y_norm must be positive")
    nu = n / 2.0 - 1.0
    x = R * y / N
    out = (
        log_gamma(n / 2.0)
        - math.log(2.0)
        - 0.5 * n * math.log(math.pi * N)
        - (R * R + y * y) / (2.0 * N)
        + nu * np.log(N / (R * y))
        + log_bessel_i(nu, x)
    )
    return float(out) if np.ndim(out) == 0 else out


def gaussian_log_density(variance: float, n: int, y_norm):
    """Log density of N(0, variance I_n) at any point of norm ``y_norm``."""
    y = np.asarray(y_norm, dtype=float)
    return -0.5 * n * math.log(2.0 * math.pi * variance) - y * y / (2.0 * variance)


def mu_s_eps(ch: ChannelSpec, s, eps: float):
    r"""Normalized exponent of :math:`\log Q^{cc}/Q^*` after substituting :math:`s=\sqrt{1+z^2}`."""
    g, N = ch.gamma, ch.N
    s = np.asarray(s, dtype=float)
    if np.any(s <= 1):
        raise ValueError("mu_s_eps requires s > 1")
    if not abs(eps) < g + N:
        raise ValueError("mu_s_eps requires |eps| < Gamma + N")
    out = (
        -(g + N) / N
        - N * (g + eps) / (4.0 * g * (g + N + eps)) * (s * s - 1.0)
        + s
        - np.log(0.5 + 0.5 * s)
        + math.log1p(g / N + eps / N)
    )
    return float(out) if out.ndim == 0 else out


def s_star(ch: ChannelSpec, eps: float) -> float:
    g, N = ch.gamma, ch.N
    if not g + eps > 0:
        raise ValueError("s_star requires Gamma + eps > 0")
    return (g * N + 2.0 * g * g + 2.0 * g * eps - N * eps) / (N * (g + eps))


def big_f(ch: ChannelSpec, eps: float) -> float:
    """Maximum over s of ``mu_s_eps``: ``-eps/(Gamma+eps) + log(1 + eps/Gamma)``."""
    g = ch.gamma
    if not g + eps > 0:
        raise ValueError("big_f requires eps > -Gamma")
    return -eps / (g + eps) + math.log1p(eps / g)


@dataclass(frozen=True)
class LogRatioReport:
    n: int
    eps: float
    delta: float
    leading_term: float  # (n/2) * F(eps)
    max_residual: float
    argmax_y_norm: float
    residuals: np.ndarray


def p_star_grid(ch: ChannelSpec, n: int, eps: float, delta: float, points: int = 201):
    """Evenly spaced ``||y||`` values covering the annulus where ``||y||^2/n`` is within ``delta`` of ``Gamma + eps + N``."""
    center = ch.gamma + eps + ch.N
    lo, hi = max(center - delta, 0.0), center + delta
    sq = np.linspace(lo, hi, points)
    sq = sq[sq > 0]
    return np.sqrt(n * sq)


def qcc_qstar_log_ratio_check(ch: ChannelSpec, n: int, eps: float, delta: float, grid) -> LogRatioReport:
    r"""Empirical check that :math:`\sup\log Q^{cc}/Q^* - \tfrac n2 F(\epsilon)` stays O(1).

    The shell has radius :math:`\sqrt{n\Gamma}` and :math:`Q^*=\mathcal N(0,(\Gamma+\epsilon+N)I_n)`.
    The returned residual is a diagnostic only; the constants are not certified.
    """
    g, N = ch.gamma, ch.N
    if not abs(eps) < g + N:
        raise ValueError("need |eps| < Gamma + N")
    if not 0 < delta < g + N - abs(eps):
        raise ValueError("need 0 < delta < Gamma + N - |eps|")
    y = np.asarray(grid, dtype=float)
    ratio_sq = y * y / n
    center = g + eps + N
    if np.any(np.abs(ratio_sq - center) > delta * (1 + 1e-12)):
        raise ValueError("grid points must satisfy | ||y||^2/n - (Gamma + eps + N) | <= delta")
    shell = ShellSpec(n, g)
    log_ratio = qcc_log_density(shell, ch, y) - gaussian_log_density(center, n, y)
    lead = 0.5 * n * big_f(ch, eps)
    res = np.atleast_1d(log_ratio - lead)
    i = int(np.argmax(res))
    return LogRatioReport(n, eps, delta, lead, float(res[i]), float(np.atleast_1d(y)[i]), res)
