"""Verification suite: closed-form special cases, cross-checks and audits.

Each check returns a :class:`CheckResult`. :func:`run_checks` runs a named
selection in a fixed order; the CLI ``verify`` command and the acceptance
tests both go through it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, stats

from . import bounds as bd
from . import channel as chn
from .constraints import ConstraintSet, DiscreteDistribution, PositivePart, SmoothedStep, Square
from .optimizer import asymptotic_limit, lipschitz_audit
from .specfn import RngStream, log_bessel_i_uniform, log_gamma, std_normal_cdf

CANONICAL = chn.ChannelSpec(1.0, 1.0)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    target: float
    detail: str = ""
    seconds: float = 0.0


def maximal_set(gamma: float = 1.0) -> ConstraintSet:
    return ConstraintSet(gamma, ((PositivePart(), 0.0),))


def mean_variance_set(budget: float = 1.0, gamma: float = 1.0) -> ConstraintSet:
    return ConstraintSet(gamma, ((Square(), budget),))


def excess_cost_set(alpha: float, delta: float = 0.1, threshold: float = 1.0, gamma: float = 1.0) -> ConstraintSet:
    return ConstraintSet(gamma, ((SmoothedStep(threshold, alpha), delta),))


def r_grid_default():
    return np.round(np.arange(-15, 16) * 0.1, 12)


# ---------------------------------------------------------------------------
# independent oracles


def mean_variance_reference(ch: chn.ChannelSpec, budget: float, r: float, starts: int = 40, seed: int = 11) -> float:
    """``min E[Phi(Pi)]`` over 3-atom laws with ``E[Pi] = r/sqrt(V)`` and ``Var(Pi) <= C'^2 budget / V``.

    Solved by multistart SLSQP directly on (atoms, weights); shares no code
    with the extreme-point search.
    """
    V = chn.dispersion(ch)
    m = r / math.sqrt(V)
    var = chn.capacity_derivative(ch) ** 2 * budget / V
    sd = math.sqrt(var)

    def unpack(z):
        a = z[:3]
        w = np.exp(z[3:] - z[3:].max())
        return a, w / w.sum()

    def obj(z):
        a, w = unpack(z)
        return float(w @ stats.norm.cdf(a))

    cons = [
        {"type": "eq", "fun": lambda z: float(unpack(z)[1] @ unpack(z)[0]) - m},
        {"type": "ineq", "fun": lambda z: var - float(unpack(z)[1] @ (unpack(z)[0] - m) ** 2)},
    ]
    gen = RngStream(seed).generator()
    best = float(stats.norm.cdf(m))
    for _ in range(starts):
        z0 = np.concatenate([m + sd * gen.normal(0.0, 3.0, 3), gen.normal(0.0, 2.0, 3)])
        res = optimize.minimize(obj, z0, method="SLSQP", constraints=cons, options={"maxiter": 500, "ftol": 1e-14})
        a, w = unpack(res.x)
        if abs(w @ a - m) < 1e-7 and w @ (a - m) ** 2 <= var + 1e-7:
            best = min(best, float(res.fun))
    return best


def qcc_radial_mass(shell: chn.ShellSpec, ch: chn.ChannelSpec) -> float:
    """Integral of the shell output density over R^n, done radially."""
    n = shell.blocklength
    log_area = math.log(2.0) + 0.5 * n * math.log(math.pi) - log_gamma(0.5 * n)
    center = math.sqrt(n * (shell.shell_cost + ch.N))
    spread = math.sqrt(ch.N) * 12.0

    def integrand(y):
        return math.exp(log_area + (n - 1) * math.log(y) + chn.qcc_log_density(shell, ch, y))

    lo = max(1e-9, center - spread)
    val, _ = integrate.quad(integrand, lo, center + spread, limit=200, epsabs=1e-13, epsrel=1e-12, points=[center])
    return val


def bessel_reference_mp(nu: float, z: float) -> float:
    """``log I_nu(nu z)`` at 30 digits."""
    import mpmath

    with mpmath.workdps(30):
        return float(mpmath.log(mpmath.besseli(nu, nu * z)))


# ---------------------------------------------------------------------------
# acceptance checks


def check_maximal_closed_form(opts=None) -> CheckResult:
    cs = maximal_set()
    V = chn.dispersion(CANONICAL)
    errs = []
    for r in r_grid_default():
        res = asymptotic_limit(CANONICAL, cs, float(r), opts)
        errs.append(abs(res.value - std_normal_cdf(r / math.sqrt(V))))
    worst = max(errs)
    return CheckResult("maximal_closed_form", worst <= 1e-3, worst, 1e-3, "max |limit - Phi(r/sqrt(V))| over 31 rates")


def excess_cost_target(delta=0.1, threshold=1.0, r=0.0, ch=CANONICAL) -> float:
    V = chn.dispersion(ch)
    return (1.0 - delta) * std_normal_cdf(r / math.sqrt(V) - chn.capacity_derivative(ch) * threshold / math.sqrt(V))


def check_excess_cost(opts=None) -> CheckResult:
    target = excess_cost_target()
    vals = [asymptotic_limit(CANONICAL, excess_cost_set(a), 0.0, opts).value for a in (1e-1, 1e-2, 1e-3)]
    gaps = [abs(v - target) for v in vals]
    monotone = gaps[0] > gaps[1] > gaps[2]
    ok = monotone and gaps[-1] <= 5e-3
    return CheckResult(
        "excess_cost_limit", ok, vals[-1], target, f"values {vals}; distance shrinking={monotone}"
    )


def check_mean_variance(opts=None) -> CheckResult:
    worst = 0.0
    parts = []
    for r in (-0.5, 0.0, 0.5):
        mine = asymptotic_limit(CANONICAL, mean_variance_set(1.0), r, opts).value
        ref = mean_variance_reference(CANONICAL, 1.0, r)
        worst = max(worst, abs(mine - ref))
        parts.append(f"r={r}: {mine:.8f} vs {ref:.8f}")
    return CheckResult("mean_variance_cross_check", worst <= 1e-4, worst, 1e-4, "; ".join(parts))


def check_expectation_only(opts=None) -> CheckResult:
    vals = [asymptotic_limit(CANONICAL, mean_variance_set(b), 0.0, opts).value for b in (10.0, 1e2, 1e3, 1e4)]
    dec = all(a > b for a, b in zip(vals, vals[1:]))
    return CheckResult("expectation_only_collapse", dec and vals[-1] <= 0.05, vals[-1], 0.05, f"values {vals}")


def check_lipschitz(opts=None) -> CheckResult:
    worst_margin = -math.inf
    parts = []
    ok = True
    for name, cs in (("maximal", maximal_set()), ("excess", excess_cost_set(1e-3)), ("mean_variance", mean_variance_set(1.0))):
        rep = lipschitz_audit(CANONICAL, cs, r_grid_default(), opts, slack=2e-3)
        ok &= rep.passed
        worst_margin = max(worst_margin, rep.max_ratio - rep.bound)
        parts.append(f"{name}: ratio {rep.max_ratio:.6f} <= {rep.bound:.6f}+0.002")
    return CheckResult("lipschitz_audit", ok, worst_margin, 2e-3, "; ".join(parts))


def check_density_ratio_ks(samples=100_000, seed=2024) -> CheckResult:
    ch = CANONICAL
    root = RngStream(seed)
    passes, cells = 0, []
    for i, n in enumerate((16, 64, 256)):
        for j, frac in enumerate((0.5, 1.0, 1.5)):
            s = frac * ch.gamma
            a = chn.log_density_ratio_sample(ch, n, s, root.child(2 * (3 * i + j)).generator(), size=samples)
            b = chn.direct_log_density_ratio_sample(ch, n, s, root.child(2 * (3 * i + j) + 1).generator(), samples)
            res = stats.ks_2samp(a, b)
            passes += res.pvalue >= 0.01
            cells.append(f"n={n},s={s:g}:D={res.statistic:.5f},p={res.pvalue:.3f}")
    return CheckResult("density_ratio_ks", passes >= 8, passes, 8, "; ".join(cells))


def random_converse_configs(count=20, seed=99):
    gen = RngStream(seed).generator()
    out = []
    for _ in range(count):
        m = int(gen.integers(1, 4))
        atoms = gen.uniform(0.2, 2.0, m)
        w = gen.dirichlet(np.ones(m))
        w = w / math.fsum(w)
        n = int(gen.integers(50, 2001))
        gamma = chn.capacity(CANONICAL) + gen.uniform(-1.0, 1.0) / math.sqrt(n)
        out.append((DiscreteDistribution(atoms, w), n, gamma))
    return out


def check_converse_tail_audit(samples=20_000, seed=5) -> CheckResult:
    worst = math.inf
    for i, (P, n, gamma) in enumerate(random_converse_configs()):
        est = bd.mc_converse_probability(CANONICAL, P, n, gamma, bd.MCConfig(samples, seed + i))
        rhs = P.expect(lambda s: chn.phi_n_gamma(CANONICAL, n, gamma, s)) - bd.BERRY_ESSEEN_PENALTY / math.sqrt(n)
        worst = min(worst, est.mean - (rhs - 3 * est.std_error))
    return CheckResult("converse_tail_inequality", worst >= 0, worst, 0.0, "min over 20 configs of MC - (E phi - penalty - 3se)")


def check_qcc_normalization() -> CheckResult:
    errs = [abs(qcc_radial_mass(chn.ShellSpec(n, 1.0), CANONICAL) - 1.0) for n in (10, 50, 200)]
    rel = 0.0
    for nu in np.arange(25.0, 401.0, 25.0):
        for z in np.linspace(0.5, 4.0, 50):
            ref = bessel_reference_mp(nu, float(z))
            rel = max(rel, abs(log_bessel_i_uniform(nu, float(z)) - ref) / abs(ref))
    ok = max(errs) <= 1e-4 and rel <= 1e-5
    return CheckResult("qcc_normalization_bessel", ok, max(errs), 1e-4, f"mass errors {errs}; bessel max rel {rel:.3e}")


def shell_log_ratio_residuals(ns=(50, 100, 200, 400), ch=CANONICAL):
    out = []
    for n in ns:
        eps = n**-0.5
        delta = (2.0 / 3.0) * (ch.gamma + ch.N - eps)
        grid = chn.p_star_grid(ch, n, eps, delta, points=401)
        out.append(chn.qcc_qstar_log_ratio_check(ch, n, eps, delta, grid).max_residual)
    return np.array(out)


def check_shell_log_ratio_bounded() -> CheckResult:
    ns = np.array([50, 100, 200, 400], dtype=float)
    res = shell_log_ratio_residuals(ns.astype(int))
    spread = float(res.max() - res.min())
    slope = float(np.polyfit(ns, res, 1)[0])
    drift = abs(slope) * (ns[-1] - ns[0])
    ok = spread <= 2.0 and drift <= 2.0
    return CheckResult(
        "shell_log_ratio_bounded", ok, spread, 2.0, f"residuals {res.tolist()}; fitted drift over grid {drift:.3e}"
    )


def check_sandwich(samples=1_000_000, seed=17, opts=None, ns=(400, 1600, 6400)) -> CheckResult:
    ch, cs = CANONICAL, mean_variance_set(1.0)
    lim = asymptotic_limit(ch, cs, 0.0, opts)
    ok = True
    parts = []
    last = None
    for i, n in enumerate(ns):
        conv = bd.converse_lower_bound(bd.ConverseQuery(ch, cs, n, 0.0))
        q = bd.AchievabilityQuery(ch, cs, n, 0.0, lim.distribution, "auto", bd.MCConfig(samples, seed + i))
        ach = bd.mc_achievability_epsilon(q)
        ok &= conv.value <= ach.mean + 3 * ach.std_error
        parts.append(f"n={n}: converse {conv.value:.4f} <= mc {ach.mean:.4f}+3*{ach.std_error:.1e}")
        last = (q, ach)
    q, ach = last
    qd = bd.AchievabilityQuery(ch, cs, q.n, 0.0, lim.distribution, "default", bd.MCConfig(samples, seed))
    default = bd.mc_achievability_epsilon(qd)
    gap = abs(ach.mean - lim.value)
    ok &= gap <= 0.05
    parts.append(f"|mc(auto theta) - limit| = {gap:.4f}; with theta=n^-0.75 it is {abs(default.mean - lim.value):.4f}")
    return CheckResult("sandwich_convergence", ok, gap, 0.05, "; ".join(parts))


# ---------------------------------------------------------------------------
# extra checks (not acceptance criteria)


def check_grid_oracle(opts=None) -> CheckResult:
    """Limit against a brute-force LP on 2001 evenly spaced atoms in [-100, 100]."""
    ch, cs = CANONICAL, mean_variance_set(1.0)
    mine = asymptotic_limit(ch, cs, 0.0, opts).value
    u = np.linspace(-100.0, 100.0, 2001)
    phi = std_normal_cdf(-chn.capacity_derivative(ch) * u / math.sqrt(chn.dispersion(ch)))
    res = optimize.linprog(
        phi, A_ub=np.vstack([u, u * u]), b_ub=[0.0, 1.0], A_eq=np.ones((1, u.size)), b_eq=[1.0], method="highs"
    )
    return CheckResult("grid_lp_oracle", abs(mine - res.fun) <= 1e-3, abs(mine - res.fun), 1e-3, f"{mine} vs {res.fun}")


def check_certificates(opts=None) -> CheckResult:
    worst = 0.0
    for cs in (maximal_set(), excess_cost_set(1e-2), mean_variance_set(1.0)):
        worst = max(worst, asymptotic_limit(CANONICAL, cs, 0.0, opts).certificate_gap)
    return CheckResult("certificate_gap", worst <= 5e-3, worst, 5e-3, "largest value - Lagrangian lower bound")


def check_tail_audit() -> CheckResult:
    rep = bd.tail_concentration_audit(mean_variance_set(1.0), [10**3, 10**4, 10**5, 10**6, 10**8])
    markov = 1.0 / rep.deviation**2
    ok = rep.passed and bool(np.all(rep.sup_mass <= markov + 1e-12))
    return CheckResult("tail_concentration", ok, float(rep.sup_mass[-1]), 0.05, f"sup mass {rep.sup_mass.tolist()}")


def check_shell_tail(samples=200_000, seed=3) -> CheckResult:
    ch, n, d = CANONICAL, 100, 1.0
    bound = bd.delta_n_shell_tail(ch, chn.ShellSpec(n, 1.0), d)
    gen = RngStream(seed).generator()
    y2 = (math.sqrt(n) + gen.standard_normal(samples)) ** 2 + gen.chisquare(n - 1, samples)
    freq = float(np.mean(np.abs(y2 / n - 2.0) > d))
    se = math.sqrt(max(freq * (1 - freq), 1e-12) / samples)
    return CheckResult("shell_tail_chebyshev", abs(bound - 0.06) < 1e-12 and freq <= bound + 3 * se, freq, bound)


def check_maximal_converse() -> CheckResult:
    """Maximal constraint at r=0: converse bound within 0.05 of 1/2 at n=1e5."""
    res = bd.converse_lower_bound(bd.ConverseQuery(CANONICAL, maximal_set(), 100_000, 0.0))
    return CheckResult("maximal_converse_1e5", abs(res.value - 0.5) <= 0.05, res.value, 0.5)


ACCEPTANCE = {
    1: check_maximal_closed_form,
    2: check_excess_cost,
    3: check_mean_variance,
    4: check_expectation_only,
    5: check_lipschitz,
    6: check_density_ratio_ks,
    7: check_converse_tail_audit,
    8: check_qcc_normalization,
    9: check_shell_log_ratio_bounded,
    10: check_sandwich,
}

EXTRA = {
    "grid_lp_oracle": check_grid_oracle,
    "certificate_gap": check_certificates,
    "tail_concentration": check_tail_audit,
    "shell_tail_chebyshev": check_shell_tail,
    "maximal_converse_1e5": check_maximal_converse,
}


def run_checks(names=None, quick: bool = False, seed: int = 0):
    """Run checks in a fixed order.

    ``names`` selects acceptance numbers (as ``"1"`` .. ``"10"``) and extra
    check names; default is everything. ``quick`` shrinks Monte Carlo sizes
    (the sandwich check then uses 1e5 samples). ``seed`` offsets every
    Monte Carlo seed.
    """
    plan = [(str(k), fn) for k, fn in ACCEPTANCE.items()] + list(EXTRA.items())
    if names is not None:
        wanted = [str(x) for x in names]
        unknown = set(wanted) - {k for k, _ in plan}
        if unknown:
            raise ValueError(f"unknown checks {sorted(unknown)}")
        plan = [(k, fn) for k, fn in plan if k in wanted]
    out = []
    for key, fn in plan:
        kwargs = {}
        if fn is check_density_ratio_ks:
            kwargs = {"samples": 20_000 if quick else 100_000, "seed": 2024 + seed}
        elif fn is check_converse_tail_audit:
            kwargs = {"samples": 5_000 if quick else 20_000, "seed": 5 + seed}
        elif fn is check_sandwich:
            kwargs = {"samples": 100_000 if quick else 1_000_000, "seed": 17 + seed}
        elif fn is check_shell_tail:
            kwargs = {"seed": 3 + seed}
        t0 = time.perf_counter()
        res = fn(**kwargs)
        res.seconds = time.perf_counter() - t0
        out.append((key, res))
    return out
