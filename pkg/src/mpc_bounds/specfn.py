"""Special functions and random streams shared by the rest of the package.

Everything here works in the natural-log domain. Densities built from these
pieces (notably the shell output density) underflow long before n reaches
the blocklengths of interest, so callers should never exponentiate early.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

#: Below this order the large-order expansion is not trusted and
#: :func:`log_bessel_i` falls back to the scaled series evaluator.
BESSEL_UNIFORM_FLOOR = 25.0


class RegimeError(ValueError):
    """An asymptotic evaluator was called outside its validated range."""


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Streams are PCG64 generators seeded through :class:`numpy.random.SeedSequence`
    with ``spawn_key=(stream_id,)``. Distinct stream ids give the statistically
    independent child sequences that ``SeedSequence.spawn`` would produce, so
    workers never need to share a generator.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= int(v) < 2**64):
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngStream":
        """Derive a sub-stream; used to give each Monte Carlo batch its own id."""
        # Fold (stream_id, index) into one 64-bit id deterministically.
        mixed = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), int(index)))
        sid = int(mixed.generate_state(2, dtype=np.uint32).view(np.uint64)[0])
        return RngStream(self.seed, sid)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def std_normal_cdf(x):
    """Standard normal CDF, accurate in both tails (saturates to 0/1)."""
    return special.ndtr(x)


def std_normal_quantile(p):
    p_arr = np.asarray(p, dtype=float)
    if np.any(~((p_arr > 0) & (p_arr < 1))):
        raise ValueError("std_normal_quantile requires 0 < p < 1")
    out = special.ndtri(p_arr)
    return float(out) if np.ndim(out) == 0 else out


def log_gamma(x):
    x_arr = np.asarray(x, dtype=float)
    if np.any(~(x_arr > 0)):
        raise ValueError("log_gamma requires x > 0")
    out = special.gammaln(x_arr)
    return float(out) if np.ndim(out) == 0 else out


# Debye polynomials U_k(p) for the uniform expansion of I_nu(nu z).
def _debye_u(p):
    p2 = p * p
    u1 = p * (3.0 - 5.0 * p2) / 24.0
    u2 = p2 * (81.0 - 462.0 * p2 + 385.0 * p2 * p2) / 1152.0
    u3 = p * p2 * (30375.0 - 369603.0 * p2 + 765765.0 * p2**2 - 425425.0 * p2**3) / 414720.0
    u4 = (
        p2
        * p2
        * (
            4465125.0
            - 94121676.0 * p2
            + 349922430.0 * p2**2
            - 446185740.0 * p2**3
            + 185910725.0 * p2**4
        )
        / 39813120.0
    )
    return u1, u2, u3, u4


def log_bessel_i_uniform(nu, z, floor: float = BESSEL_UNIFORM_FLOOR, terms: int = 4):
    r"""Uniform large-order expansion of :math:`\log I_\nu(\nu z)`.

    .. math::
        \log I_\nu(\nu z) \approx \nu\eta - \tfrac12\log(2\pi\nu)
        - \tfrac14\log(1+z^2) + \log\Big(1 + \sum_{k=1}^{K} U_k(p)\,\nu^{-k}\Big)

    with :math:`\eta = \sqrt{1+z^2} + \log\big(z / (1+\sqrt{1+z^2})\big)` and
    :math:`p = (1+z^2)^{-1/2}`.

    Parameters
    ----------
    nu : float or array
        Order, must be at least ``floor``.
    z : float or array
        Scaled argument, strictly positive.
    floor : float
        Smallest order accepted. Raises :class:`RegimeError` below it.
    terms : int
        Number of Debye correction terms, 1 to 4. Four terms keep the
        relative error of the log below 1e-10 for ``nu >= 25``.
    """
    nu = np.asarray(nu, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(nu < floor):
        raise RegimeError(f"uniform Bessel expansion needs nu >= {floor}")
    if np.any(~(z > 0)):
        raise ValueError("log_bessel_i_uniform requires z > 0")
    if not 1 <= terms <= 4:
        raise ValueError("terms must be between 1 and 4")
    root = np.sqrt(1.0 + z * z)
    # log(z / (1 + root)) written to stay accurate for tiny and huge z
    eta = root + np.log(z) - np.log1p(root)
    p = 1.0 / root
    corr = 0.0
    for k, uk in enumerate(_debye_u(p)[:terms], start=1):
        corr = corr + uk / nu**k
    out = nu * eta - 0.5 * np.log(2.0 * np.pi * nu) - 0.25 * np.log1p(z * z) + np.log1p(corr)
    return float(out) if out.ndim == 0 else out


def log_bessel_i_reference(nu, x):
    """``log I_nu(x)`` from the exponentially scaled series evaluator.

    Falls back to the leading small-argument term when the scaled value
    underflows.
    """
    nu = np.asarray(nu, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(nu < 0) or np.any(~(x > 0)):
        raise ValueError("log_bessel_i_reference requires nu >= 0 and x > 0")
    with np.errstate(divide="ignore"):
        out = np.log(special.ive(nu, x)) + x
    bad = ~np.isfinite(out)
    if np.any(bad):
        nb, xb = np.broadcast_arrays(nu, x)
        out = np.where(bad, nb * np.log(xb / 2.0) - special.gammaln(nb + 1.0), out)
    return float(out) if out.ndim == 0 else out


def log_bessel_i(nu: float, x, floor: float = BESSEL_UNIFORM_FLOOR):
    """``log I_nu(x)`` choosing the evaluator by order."""
    if nu >= floor:
        return log_bessel_i_uniform(nu, np.asarray(x, dtype=float) / nu, floor=floor)
    return log_bessel_i_reference(nu, x)


def sample_noncentral_chisq(dof: int, lam, rng, size=None):
    r"""Draw from :math:`\chi^2_{dof}(\lambda)`.

    Uses the exact decomposition
    :math:`\chi^2_{dof-1}(0) + (Z + \sqrt{\lambda})^2`, which costs O(1) per
    draw regardless of ``dof``.

    ``lam`` may be an array, in which case it broadcasts against ``size``.
    """
    dof = int(dof)
    if dof < 1:
        raise ValueError("dof must be a positive integer")
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("noncentrality must be nonnegative")
    gen = _as_generator(rng)
    if size is None:
        size = lam.shape
    z = gen.standard_normal(size)
    out = (z + np.sqrt(lam)) ** 2
    if dof > 1:
        out = out + gen.chisquare(dof - 1, size)
    return float(out) if np.ndim(out) == 0 else out
