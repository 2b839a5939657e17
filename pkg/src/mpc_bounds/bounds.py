"""Finite-blocklength converse and achievability bounds plus their Monte Carlo estimators.

Converse: a finite-n optimization of the Gaussian-approximated tail, minus
the Berry-Esseen penalty and the threshold slack. Achievability: a mixture
of shell codes whose information-density tail is estimated by simulation,
plus the ``exp(-n theta)`` slack.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import channel as chn
from .constraints import ConstraintSet, DiscreteDistribution, UnboundedSupportError, check_membership_U
from .optimizer import OptimizerResult, SearchOptions, finite_n_converse_value, golden_section
from .specfn import RngStream, std_normal_cdf

log = logging.getLogger(__name__)

#: Berry-Esseen constant multiplying 1/sqrt(n) in the converse.
BERRY_ESSEEN_PENALTY = 15.0**0.75


def _clamp(x: float, what: str) -> float:
    if x < 0.0 or x > 1.0:
        log.info("clamped %s = %r to [0, 1]", what, x)
    return min(1.0, max(0.0, x))


@dataclass(frozen=True)
class MCConfig:
    samples: int
    seed: int
    batches: int = 100
    threads: int = 1

    def __post_init__(self):
        if self.samples < self.batches or self.batches < 2:
            raise ValueError("need samples >= batches >= 2")
        RngStream(self.seed)  # validates the seed range

    def batch_sizes(self):
        base, extra = divmod(self.samples, self.batches)
        return [base + (1 if b < extra else 0) for b in range(self.batches)]


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    samples: int
    seed: int


def _batch_means(cfg: MCConfig, draw) -> MCEstimate:
    """Run ``draw(generator, size) -> array of indicators/values`` per batch and combine.

    Batch ``b`` always uses stream ``RngStream(seed).child(b)``, so the
    result does not depend on the thread count.
    """
    root = RngStream(cfg.seed)
    sizes = cfg.batch_sizes()

    def one(b):
        vals = np.asarray(draw(root.child(b).generator(), sizes[b]), dtype=float)
        return math.fsum(vals)

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            sums = list(pool.map(one, range(cfg.batches)))
    else:
        sums = [one(b) for b in range(cfg.batches)]
    means = np.array([s / m for s, m in zip(sums, sizes)])
    mean = math.fsum(sums) / cfg.samples
    # batch means: the spread of batch averages estimates the error of the mean
    se = float(np.std(means, ddof=1) / math.sqrt(cfg.batches))
    return MCEstimate(mean, se, cfg.samples, cfg.seed)


@dataclass
class BoundResult:
    value: float
    bound_kind: str
    std_error: float = float("nan")
    status: str = ""
    details: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# converse


@dataclass(frozen=True)
class ConverseQuery:
    ch: chn.ChannelSpec
    cs: ConstraintSet
    n: int
    r: float
    r_prime: float | None = None  # None selects the automatic search

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.r_prime is not None and not self.r_prime < self.r:
            raise ValueError("r_prime must be smaller than r")


def _converse_at(q: ConverseQuery, r_prime: float, opts) -> tuple[float, OptimizerResult]:
    root_n = math.sqrt(q.n)
    gamma = chn.capacity(q.ch) + r_prime / root_n
    if not gamma > 0:
        return -math.inf, None
    res = finite_n_converse_value(q.ch, q.cs, q.n, gamma, opts)
    raw = res.value - BERRY_ESSEEN_PENALTY / root_n - math.exp((r_prime - q.r) * root_n)
    return raw, res


def converse_lower_bound(q: ConverseQuery, opts: SearchOptions | None = None, r_prime_tol: float = 1e-2) -> BoundResult:
    """Lower bound on the minimum average error probability at rate ``C + r/sqrt(n)``.

    ``max(0, min E[phi_{n,gamma}(S)] - 15^{3/4}/sqrt(n) - exp((r' - r) sqrt(n)))``
    with ``gamma = C + r'/sqrt(n)``. With ``q.r_prime`` None, ``r'`` is
    chosen by a coarse scan followed by golden-section search over
    ``r - r' in (0, (3 + log n)/sqrt(n)]``; ``r_prime_tol`` is in units of
    ``1/sqrt(n)``.
    """
    opts = opts or SearchOptions(restarts=2)
    root_n = math.sqrt(q.n)
    if q.r_prime is not None:
        raw, res = _converse_at(q, q.r_prime, opts)
        r_best = q.r_prime
    else:
        # x = (r - r') sqrt(n); the slack exp(-x) trades against the shift x/sqrt(n)
        width = 3.0 + math.log(q.n)
        cache: dict = {}
        search_opts = dataclasses.replace(opts, certify=False)

        def neg(x):
            if x not in cache:
                cache[x] = _converse_at(q, q.r - x / root_n, search_opts)
            return -cache[x][0]

        xs = np.linspace(width / 8.0, width, 8)
        vals = [neg(x) for x in xs]
        i = int(np.argmin(vals))
        a = xs[i - 1] if i > 0 else 1e-6
        b = xs[i + 1] if i + 1 < xs.size else width
        x_best, _ = golden_section(neg, a, b, r_prime_tol)
        x_best = min(cache, key=lambda x: (-cache[x][0], x))
        r_best = q.r - x_best / root_n
        raw, res = _converse_at(q, r_best, opts)
    value = _clamp(max(raw, 0.0), "converse bound")
    return BoundResult(
        value=value,
        bound_kind="LowerBound",
        status=res.status.value if res is not None else "Infeasible",
        details={
            "r_prime": r_best,
            "gamma_thresh": chn.capacity(q.ch) + r_best / root_n,
            "finite_n_value": res.value if res is not None else float("nan"),
            "penalty": BERRY_ESSEEN_PENALTY / root_n,
            "slack": math.exp((r_best - q.r) * root_n),
            "raw": raw,
            "optimizer": res,
        },
    )


def mc_converse_probability(ch: chn.ChannelSpec, P_S: DiscreteDistribution, n: int, gamma_thresh: float, mc: MCConfig) -> MCEstimate:
    """Estimate ``P(log W(Y|X)/q(Y) <= n gamma)`` with ``||X||^2/n ~ P_S``."""
    if np.any(P_S.atoms < 0):
        raise ValueError("P_S atoms must be nonnegative")
    atoms, weights = P_S.atoms, P_S.weights

    def draw(gen, size):
        s = atoms[gen.choice(atoms.size, size=size, p=weights)] if atoms.size > 1 else np.full(size, atoms[0])
        stat = chn.log_density_ratio_sample(ch, n, s, gen, size=size)
        return stat <= n * gamma_thresh

    return _batch_means(mc, draw)


# ---------------------------------------------------------------------------
# achievability


@dataclass(frozen=True)
class AchievabilityQuery:
    ch: chn.ChannelSpec
    cs: ConstraintSet
    n: int
    r: float
    mixture: DiscreteDistribution
    theta: float | str = "default"
    mc: MCConfig | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("n must be an integer >= 2")
        if np.any(self.shell_costs <= 0):
            raise ValueError("every shell cost Gamma + u_j/sqrt(n) must be positive; increase n")
        if not check_membership_U(self.mixture, self.cs, tol=1e-8):
            raise ValueError("mixture does not satisfy the cost constraints")
        t = self.theta_value
        if not (t > 0 and math.isfinite(t)):
            raise ValueError("theta must be positive")

    @property
    def shell_costs(self) -> np.ndarray:
        return self.ch.gamma + self.mixture.atoms / math.sqrt(self.n)

    @property
    def theta_value(self) -> float:
        """``n^{-3/4}`` by default; ``"auto"`` minimizes ``sqrt(n) theta / sqrt(2 pi V) + exp(-n theta)``."""
        if self.theta == "default":
            return self.n**-0.75
        if self.theta == "auto":
            return 0.5 * math.log(2.0 * math.pi * chn.dispersion(self.ch) * self.n) / self.n
        return float(self.theta)

    @property
    def rate(self) -> float:
        return chn.capacity(self.ch) + self.r / math.sqrt(self.n)


def mixture_log_output_density(ch: chn.ChannelSpec, q: AchievabilityQuery, y_norm):
    """``log sum_j p_j Q_j(y)`` for the shell mixture, as a function of ``||y||``."""
    y = np.asarray(y_norm, dtype=float)
    if np.any(~(y > 0)):
        raise ValueError("y_norm must be positive")
    terms = [
        math.log(p) + chn.qcc_log_density(chn.ShellSpec(q.n, g), ch, y)
        for p, g in zip(q.mixture.weights, q.shell_costs)
        if p > 0
    ]
    out = logsumexp(np.stack(np.broadcast_arrays(*terms)), axis=0)
    return float(out) if np.ndim(out) == 0 else out


def _info_density_reduced(ch, q, gen, size):
    """Information densities for ``size`` draws, using ``X = R e_1`` by rotation invariance."""
    n, N = q.n, ch.N
    p = q.mixture.weights
    comp = gen.choice(p.size, size=size, p=p) if p.size > 1 else np.zeros(size, dtype=int)
    R = np.sqrt(n * q.shell_costs[comp])
    z1 = gen.standard_normal(size) * math.sqrt(N)
    rest = N * gen.chisquare(n - 1, size)
    y_norm = np.sqrt((R + z1) ** 2 + rest)
    log_w = -0.5 * n * math.log(2.0 * math.pi * N) - (z1 * z1 + rest) / (2.0 * N)
    return log_w - mixture_log_output_density(ch, q, y_norm)


def _info_density_vectors(ch, q, gen, size):
    """Same statistic from full n-dimensional vectors; O(n) per draw."""
    n, N = q.n, ch.N
    p = q.mixture.weights
    comp = gen.choice(p.size, size=size, p=p) if p.size > 1 else np.zeros(size, dtype=int)
    R = np.sqrt(n * q.shell_costs[comp])
    x = chn.sample_sphere(n, 1.0, gen, size) * R[:, None]
    z = gen.standard_normal((size, n)) * math.sqrt(N)
    y_norm = np.linalg.norm(x + z, axis=1)
    log_w = -0.5 * n * math.log(2.0 * math.pi * N) - np.einsum("ij,ij->i", z, z) / (2.0 * N)
    return log_w - mixture_log_output_density(ch, q, y_norm)


_SAMPLERS = {"reduced": _info_density_reduced, "vectors": _info_density_vectors}


def information_density_samples(q: AchievabilityQuery, gen, size: int, sampler: str = "reduced"):
    return _SAMPLERS[sampler](q.ch, q, gen, size)


def mc_achievability_epsilon(q: AchievabilityQuery, sampler: str = "reduced") -> MCEstimate:
    """Estimate ``P((1/n) log W/PW <= R + theta) + exp(-n theta)`` for the shell mixture.

    ``sampler="vectors"`` draws full codeword and noise vectors instead of
    the rotation-reduced pair (radial offset, chi-square remainder).
    """
    if q.mc is None:
        raise ValueError("AchievabilityQuery.mc is required for the Monte Carlo estimate")
    if sampler not in _SAMPLERS:
        raise ValueError(f"sampler must be one of {sorted(_SAMPLERS)}")
    thresh = q.n * (q.rate + q.theta_value)

    def draw(gen, size):
        return _SAMPLERS[sampler](q.ch, q, gen, size) <= thresh

    est = _batch_means(q.mc, draw)
    mean = _clamp(est.mean + math.exp(-q.n * q.theta_value), "achievability estimate")
    return MCEstimate(mean, est.std_error, est.samples, est.seed)


def analytic_achievability_curve(ch: chn.ChannelSpec, q: AchievabilityQuery, kappa_prime: float = 0.0) -> float:
    """``sum_j p_j Phi(-C' u_j / sqrt(V_j) + r / sqrt(V_j) + kappa' / sqrt(n V_j))`` with ``V_j = V(Gamma_j)``.

    ``kappa_prime`` stands in for constants the Berry-Esseen step leaves
    unspecified; its default 0 gives the large-n curve.
    """
    cprime = chn.capacity_derivative(ch)
    vj = np.array([chn.dispersion(ch.with_cost(g)) for g in q.shell_costs])
    root = np.sqrt(vj)
    arg = -cprime * q.mixture.atoms / root + q.r / root + kappa_prime / np.sqrt(q.n * vj)
    return math.fsum(q.mixture.weights * std_normal_cdf(arg))


def delta_n_shell_tail(ch: chn.ChannelSpec, shell: chn.ShellSpec, delta: float) -> float:
    """Chebyshev bound on ``P(| ||Y||^2/n - Gamma_j - N | > delta)`` for a shell input."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    n, g, N = shell.blocklength, shell.shell_cost, ch.N
    return (4.0 * n * N * g + 2.0 * n * N * N) / (n * delta) ** 2


# ---------------------------------------------------------------------------
# tail concentration


@dataclass
class TailAuditReport:
    n_list: np.ndarray
    deviation: np.ndarray  # u = sqrt(n) a_n
    sup_mass: np.ndarray
    decreasing: bool
    passed: bool


def _two_atom_feasible(cs: ConstraintSet, u: float, m: float) -> bool:
    if m <= 0:
        return True
    v = -m * u / (1.0 - m)
    return all(m * f(u) + (1.0 - m) * f(v) <= b + 1e-12 for f, b in cs.items)


def tail_concentration_audit(cs: ConstraintSet, n_list, a_n=None, vanish_tol: float = 0.05) -> TailAuditReport:
    """Largest mass a mean-zero two-atom law can put at ``u = sqrt(n) a_n``.

    The compensating atom sits at ``-m u / (1 - m)``. With the default
    ``a_n = n^{-1/3}`` the audit passes when the supremum decreases along
    ``n_list`` and ends below ``vanish_tol``.
    """
    if not cs.condition2_holds:
        raise UnboundedSupportError("tail audit needs a constraint function that diverges")
    a_n = a_n or (lambda n: n ** (-1.0 / 3.0))
    ns = np.asarray(list(n_list), dtype=float)
    us = np.array([math.sqrt(n) * a_n(n) for n in ns])
    sups = []
    for u in us:
        lo, hi = 0.0, 1.0 - 1e-15
        if _two_atom_feasible(cs, u, hi):
            sups.append(hi)
            continue
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _two_atom_feasible(cs, u, mid):
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        sups.append(lo)
    sups = np.array(sups)
    decreasing = bool(np.all(np.diff(sups) <= 1e-15))
    return TailAuditReport(ns, us, sups, decreasing, decreasing and sups[-1] <= vanish_tol)
