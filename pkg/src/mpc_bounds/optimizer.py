"""Minimization of E[phi(U)] over moment-constrained laws with at most k+2 atoms.

The search runs in the normalized-deviation coordinate ``u`` for both the
asymptotic problem and the finite-n one (where ``s = gamma + u / sqrt(n)``
and ``u >= -sqrt(n) * gamma``). Three layers:

1. a dense grid LP over an adaptive grid (HiGHS dual simplex, so the
   solution is a vertex with at most k+2 nonzero weights);
2. multistart coordinate descent on the atom locations, re-solving the
   weights exactly for every candidate support;
3. a Lagrangian lower bound built from the grid LP multipliers, which turns
   the result into an upper value plus a certified-on-grid gap.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations

import numpy as np
from scipy.optimize import linprog

from . import channel as chn
from .constraints import (
    ConstraintSet,
    DiscreteDistribution,
    UnboundedSupportError,
    check_membership_S,
    check_membership_U,
    left_support_bound,
    support_bound,
)
from .specfn import RngStream, std_normal_cdf

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_MAX_VERTEX_COMBOS = 20000


class InfeasibleError(RuntimeError):
    pass


class Status(str, Enum):
    CONVERGED = "Converged"
    ITERATION_CAP = "IterationCap"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class AsymptoticObjective:
    """``phi(u) = Phi(shift - kappa2 * u)`` where ``shift = kappa1 * r``."""

    shift: float
    kappa2: float

    lower_limit = None

    def __call__(self, u):
        return std_normal_cdf(self.shift - self.kappa2 * np.asarray(u, dtype=float))

    @classmethod
    def for_channel(cls, ch: chn.ChannelSpec, r: float) -> "AsymptoticObjective":
        root_v = math.sqrt(chn.dispersion(ch))
        return cls(r / root_v, chn.capacity_derivative(ch) / root_v)

    @property
    def lipschitz(self) -> float:
        return abs(self.kappa2) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class FiniteNObjective:
    """``phi(u) = phi_{n,gamma}(Gamma + u / sqrt(n))`` on ``u >= -sqrt(n) Gamma``."""

    ch: chn.ChannelSpec
    n: int
    gamma_thresh: float

    def __call__(self, u):
        s = self.ch.gamma + np.asarray(u, dtype=float) / math.sqrt(self.n)
        return chn.phi_n_gamma(self.ch, self.n, self.gamma_thresh, np.maximum(s, 0.0))

    @property
    def lower_limit(self) -> float:
        return -math.sqrt(self.n) * self.ch.gamma


@dataclass
class SearchOptions:
    restarts: int = 3
    seed: int = 0
    weight_floor: float = 1e-7
    far_left: float = 1e9
    core_points: int = 1201
    tail_points: int = 160
    max_sweeps: int = 80
    value_tol: float = 1e-12
    atom_tol: float = 1e-10
    tolerance: float = 1e-3
    feas_tol: float = 1e-9
    mean_equality: bool = False
    sentinel_weight: float = 1e-10
    certify: bool = True
    threads: int = 1

    def __post_init__(self):
        for name in ("restarts", "core_points", "tail_points", "max_sweeps", "threads"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        for name in ("weight_floor", "far_left", "value_tol", "atom_tol", "tolerance", "feas_tol", "sentinel_weight"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a positive number, got {v!r}")
        if not self.weight_floor < 1 or not self.sentinel_weight < 1:
            raise ValueError("weight_floor and sentinel_weight must be below 1")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


@dataclass
class OptimizerResult:
    distribution: DiscreteDistribution
    value: float
    status: Status
    restarts_used: int
    certificate_gap: float
    lower_bound: float = float("nan")
    grid_value: float = float("nan")
    sweeps: int = 0


# ---------------------------------------------------------------------------
# inner LP on a fixed support


def _constraint_rows(atoms, cs: ConstraintSet, mean: str = "le"):
    """Constraint matrix for weights on ``atoms``.

    ``mean`` is ``"le"`` (E[U] <= 0), ``"eq"`` (E[U] = 0, always row 0) or
    ``"off"`` (no mean row).
    """
    atoms = np.asarray(atoms, dtype=float)
    rows, rhs = [], []
    if mean != "off":
        rows.append(atoms)
        rhs.append(0.0)
    for f, b in cs.items:
        rows.append(np.asarray(f(atoms), dtype=float))
        rhs.append(b)
    if not rows:
        return np.zeros((0, atoms.size)), np.zeros(0)
    return np.vstack(rows), np.asarray(rhs)


def _scale_rows(A, b):
    # rows with small entries keep an absolute tolerance
    scale = np.maximum(np.maximum(np.abs(A).max(axis=1, initial=0.0), np.abs(b)), 1.0)
    return A / scale[:, None], b / scale, scale


@dataclass
class _LPSolution:
    weights: np.ndarray
    value: float


def _combo_table(n_ineq: int, n_free: int):
    combos = list(combinations(range(n_ineq), n_free))
    return np.array(combos, dtype=int).reshape(len(combos), n_free)


_COMBO_CACHE: dict = {}


def _vertex_lp(phi, A, b, mean_eq: bool, tol: float):
    """Minimize ``phi . p`` over the simplex intersected with ``A p <= b`` by vertex enumeration.

    With ``mean_eq`` the first row of ``A`` is an equality.
    """
    m = phi.size
    A, b, _ = _scale_rows(A, b)
    eq_rows = [np.ones(m)]
    eq_rhs = [1.0]
    ineq_A, ineq_b = A, b
    if mean_eq:
        eq_rows.append(A[0])
        eq_rhs.append(b[0])
        ineq_A, ineq_b = A[1:], b[1:]
    # candidate active set: p_j = 0 rows and constraint rows
    G = np.vstack([-np.eye(m), ineq_A])
    h = np.concatenate([np.zeros(m), ineq_b])
    n_free = m - len(eq_rows)
    if n_free < 0:
        return None
    key = (G.shape[0], n_free)
    combos = _COMBO_CACHE.get(key)
    if combos is None:
        combos = _COMBO_CACHE[key] = _combo_table(G.shape[0], n_free)
    E = np.vstack(eq_rows)
    e = np.asarray(eq_rhs)
    M = np.concatenate([np.broadcast_to(E, (len(combos),) + E.shape), G[combos]], axis=1)
    rhs = np.concatenate([np.broadcast_to(e, (len(combos), e.size)), h[combos]], axis=1)
    sv = np.linalg.svd(M, compute_uv=False)
    ok = sv[:, -1] > 1e-12 * sv[:, 0]
    if not np.any(ok):
        return None
    P = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
    feas = np.all(P >= -tol, axis=1) & np.all(P @ ineq_A.T <= ineq_b + tol, axis=1)
    if mean_eq:
        feas &= np.abs(P @ A[0] - b[0]) <= tol
    if not np.any(feas):
        return None
    P = P[feas]
    vals = P @ phi
    i = int(np.argmin(vals))
    w = np.clip(P[i], 0.0, None)
    w /= w.sum()
    return _LPSolution(w, float(w @ phi))


def _highs_lp(phi, A, b, mean_eq: bool):
    """Grid-scale LP by dual simplex; returns the result and multipliers ``y >= 0`` per row of ``A``."""
    scale = np.maximum(np.abs(b), 1.0)
    A_s, b_s = A / scale[:, None], b / scale
    m = phi.size
    if mean_eq:
        A_eq = np.vstack([np.ones(m), A_s[0]])
        b_eq = np.array([1.0, b_s[0]])
        A_ub, b_ub = A_s[1:], b_s[1:]
    else:
        A_eq, b_eq = np.ones((1, m)), np.array([1.0])
        A_ub, b_ub = A_s, b_s
    res = linprog(
        phi,
        A_ub=A_ub if A_ub.size else None,
        b_ub=b_ub if A_ub.size else None,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs-ds",
    )
    if res.status != 0:
        return None, None
    # multipliers for the unscaled rows, sign flipped so inequality ones are >= 0
    y = np.zeros(A.shape[0])
    if mean_eq:
        y[0] = -res.eqlin.marginals[1] / scale[0]
        if A.shape[0] > 1:
            y[1:] = -res.ineqlin.marginals / scale[1:]
    elif A.shape[0]:
        y = -res.ineqlin.marginals / scale
    return res, y


def _solve_weights(atoms, cs, phi_values, mean="le", tol=1e-12):
    atoms = np.asarray(atoms, dtype=float)
    phi_values = np.asarray(phi_values, dtype=float)
    A, b = _constraint_rows(atoms, cs, mean)
    m = atoms.size
    mean_eq = mean == "eq"
    n_ineq = m + A.shape[0] - (1 if mean_eq else 0)
    n_free = m - (2 if mean_eq else 1)
    if n_free >= 0 and math.comb(n_ineq, n_free) <= _MAX_VERTEX_COMBOS:
        return _vertex_lp(phi_values, A, b, mean_eq, tol)
    res, _ = _highs_lp(phi_values, A, b, mean_eq)
    if res is None:
        return None
    w = np.clip(res.x, 0.0, None)
    w /= w.sum()
    return _LPSolution(w, float(w @ phi_values))


def inner_weight_lp(atoms, cs: ConstraintSet, phi_values, mean_equality: bool = False):
    """Optimal weights for a fixed support.

    Returns ``(weights, value)``; raises :class:`InfeasibleError` when no
    weight vector meets the constraints.
    """
    sol = _solve_weights(atoms, cs, phi_values, "eq" if mean_equality else "le")
    if sol is None:
        raise InfeasibleError("no feasible weights on the given support")
    return sol.weights, sol.value


# ---------------------------------------------------------------------------
# search domain and grid


def _mean_mode(obj, cs: ConstraintSet, opts: SearchOptions) -> str:
    """How the mean constraint enters the search.

    When every constraint function is flat on the left and u is unbounded
    below, an atom of weight w at -L with wL fixed satisfies the mean
    constraint at objective cost at most w. The infimum then equals the
    problem without the mean row, and a final sentinel atom restores
    E[U] <= 0 exactly.
    """
    if opts.mean_equality:
        return "eq"
    if obj.lower_limit is None and left_support_bound(cs, opts.weight_floor) is None:
        return "off"
    return "le"


def _domain(obj, cs: ConstraintSet, opts: SearchOptions):
    hi = support_bound(cs, opts.weight_floor)
    left = left_support_bound(cs, opts.weight_floor)
    lo = left if left is not None else -opts.far_left
    if obj.lower_limit is not None:
        lo = max(lo, obj.lower_limit)
        hi = max(hi, obj.lower_limit)
    return lo, hi


def _core_interval(obj, lo, hi):
    """Range of u where phi is not saturated at 0 or 1, clipped to [lo, hi]."""
    mags = np.geomspace(1e-4, max(abs(lo), abs(hi), 1.0), 400)
    probe = np.unique(np.clip(np.concatenate([-mags, [0.0], mags]), lo, hi))
    vals = obj(probe)
    live = (vals > 1e-15) & (vals < 1.0 - 1e-15)
    if not np.any(live):
        c = float(np.clip(0.0, lo, hi))
        return c, c
    idx = np.nonzero(live)[0]
    a = probe[max(idx[0] - 1, 0)]
    b = probe[min(idx[-1] + 1, probe.size - 1)]
    return float(a), float(b)


def _geometric_tail(start, stop, count):
    """Points from ``start`` toward ``stop`` whose spacing grows geometrically."""
    if stop == start or count <= 0:
        return np.array([])
    span = abs(stop - start)
    steps = np.geomspace(min(span, 1e-2), span, count)
    return start + np.sign(stop - start) * steps


def build_grid(obj, cs: ConstraintSet, opts: SearchOptions, lo=None, hi=None):
    if lo is None or hi is None:
        lo, hi = _domain(obj, cs, opts)
    c_lo, c_hi = _core_interval(obj, lo, hi)
    pieces = [np.array([lo, hi, 0.0, c_lo, c_hi])]
    if c_hi > c_lo:
        pieces.append(np.linspace(c_lo, c_hi, opts.core_points))
    pieces.append(_geometric_tail(c_lo, lo, opts.tail_points))
    pieces.append(_geometric_tail(c_hi, hi, opts.tail_points))
    # also resolve the region near zero and near constraint breakpoints finely
    pieces.append(np.linspace(-1.0, 1.0, 201))
    for f, _ in cs.items:
        for t in f.breakpoints():
            pieces.append(t + np.array([0.0, -1e-9, 1e-9, -1e-3, 1e-3]))
    grid = np.unique(np.concatenate(pieces))
    return grid[(grid >= lo) & (grid <= hi)]


# ---------------------------------------------------------------------------
# outer search


def golden_section(fn, a, b, tol):
    """Minimize a scalar function on [a, b]; returns (x, f(x))."""
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = fn(x1), fn(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = fn(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = fn(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


@dataclass
class _State:
    atoms: np.ndarray
    weights: np.ndarray
    value: float
    status: Status = Status.CONVERGED
    sweeps: int = 0


def _evaluate(obj, cs, atoms, mean):
    sol = _solve_weights(atoms, cs, obj(atoms), mean)
    if sol is None:
        return math.inf, None
    return sol.value, sol.weights


def _coordinate_descent(obj, cs, atoms, windows, lo, hi, opts, mean) -> _State:
    atoms = np.array(atoms, dtype=float)
    windows = np.array(windows, dtype=float)
    value, weights = _evaluate(obj, cs, atoms, mean)
    if weights is None:
        return _State(atoms, np.full(atoms.size, np.nan), math.inf, Status.INFEASIBLE)
    status = Status.ITERATION_CAP
    sweep = 0
    for sweep in range(1, opts.max_sweeps + 1):
        start_value = value
        moved = 0.0
        for j in range(atoms.size):
            a = max(lo, atoms[j] - windows[j])
            b = min(hi, atoms[j] + windows[j])
            if b - a <= opts.atom_tol:
                continue
            trial = atoms.copy()

            def h(t):
                trial[j] = t
                return _evaluate(obj, cs, trial, mean)[0]

            tol = max(opts.atom_tol, 1e-13 * max(abs(a), abs(b)))
            t, ft = golden_section(h, a, b, tol)
            if ft < value - opts.value_tol:
                moved = max(moved, abs(t - atoms[j]))
                at_edge = abs(t - atoms[j]) > 0.8 * windows[j]
                atoms[j] = t
                value, weights = _evaluate(obj, cs, atoms, mean)
                windows[j] *= 2.0 if at_edge else 1.0
            else:
                windows[j] = max(windows[j] * 0.5, 1e3 * opts.atom_tol)
        if start_value - value <= opts.value_tol and moved <= opts.atom_tol * 1e3:
            status = Status.CONVERGED
            break
    return _State(atoms, weights, value, status, sweep)


def _canonical(state: _State, obj, cs, opts, mean) -> _State:
    """Merge coincident atoms, drop zero weights, re-solve, sort."""
    if not math.isfinite(state.value):
        return state
    order = np.argsort(state.atoms)
    atoms, weights = state.atoms[order], state.weights[order]
    keep = weights > 1e-14
    atoms, weights = atoms[keep], weights[keep]
    merged_a, merged_w = [atoms[0]], [weights[0]]
    for a, w in zip(atoms[1:], weights[1:]):
        if abs(a - merged_a[-1]) <= max(opts.atom_tol, 1e-12 * abs(a)):
            merged_w[-1] += w
        else:
            merged_a.append(a)
            merged_w.append(w)
    atoms = np.array(merged_a)
    value, w = _evaluate(obj, cs, atoms, mean)
    if w is None or value > state.value + 1e-12:
        return state
    keep = w > 0
    atoms, w = atoms[keep], w[keep] / w[keep].sum()
    value = float(w @ obj(atoms))
    # prefer fewer atoms when dropping one costs nothing
    changed = True
    while changed and atoms.size > 1:
        changed = False
        for j in np.argsort(w):
            trial = np.delete(atoms, j)
            v, tw = _evaluate(obj, cs, trial, mean)
            if tw is not None and v <= value + 1e-12:
                keep = tw > 0
                atoms, w, value = trial[keep], tw[keep] / tw[keep].sum(), v
                changed = True
                break
    # near-twins: replace a close pair by its weighted mean if that costs almost nothing
    j = 0
    while j < atoms.size - 1:
        if atoms[j + 1] - atoms[j] <= 1e-3 * max(1.0, abs(atoms[j])):
            mid = (w[j] * atoms[j] + w[j + 1] * atoms[j + 1]) / (w[j] + w[j + 1])
            trial = np.concatenate([atoms[:j], [mid], atoms[j + 2 :]])
            v, tw = _evaluate(obj, cs, trial, mean)
            if tw is not None and v <= value + 1e-9:
                keep = tw > 0
                atoms, w, value = trial[keep], tw[keep] / tw[keep].sum(), v
                continue
        j += 1
    return _State(atoms, w, value, state.status, state.sweeps)


def _better(a: _State, b: _State) -> bool:
    """Ordering used for deterministic reduction: value, then fewer atoms, then lexicographic atoms."""
    if a.value < b.value - 1e-13:
        return True
    if a.value > b.value + 1e-13:
        return False
    if a.atoms.size != b.atoms.size:
        return a.atoms.size < b.atoms.size
    return tuple(a.atoms) < tuple(b.atoms)


def _lagrangian_lower_bound(obj, cs, y, eval_points, mean):
    """min_u [phi(u) + y . a(u)] - y . b, minimized over ``eval_points`` and polished locally."""
    A, b = _constraint_rows(eval_points, cs, mean)
    L = obj(eval_points) + y @ A
    idx = np.argsort(L)[:8]
    best = float(L.min())
    for i in idx:
        a_ = eval_points[max(i - 1, 0)]
        b_ = eval_points[min(i + 1, eval_points.size - 1)]
        if b_ <= a_:
            continue

        def lag(t):
            At, _ = _constraint_rows(np.array([t]), cs, mean)
            return float(obj(np.array([t]))[0] + y @ At[:, 0])

        _, v = golden_section(lag, a_, b_, max(1e-12, 1e-10 * (b_ - a_)))
        best = min(best, v)
    return best - float(y @ b)


def minimize_over_distributions(obj, cs: ConstraintSet, opts: SearchOptions | None = None) -> OptimizerResult:
    """Minimize ``E[phi(U)]`` over feasible laws with at most ``k + 2`` atoms.

    The returned ``value`` is achieved by ``distribution`` (an upper value on
    the infimum). ``lower_bound`` is the Lagrangian bound from the grid LP
    multipliers, evaluated on a dense set of points, and
    ``certificate_gap = value - lower_bound``.

    Raises
    ------
    UnboundedSupportError
        if no constraint function diverges.
    InfeasibleError
        if even the grid LP has no feasible point.
    """
    opts = opts or SearchOptions()
    lo, hi = _domain(obj, cs, opts)
    mean = _mean_mode(obj, cs, opts)
    mean_eq = mean == "eq"
    grid = build_grid(obj, cs, opts, lo, hi)
    phi_grid = obj(grid)
    A, b = _constraint_rows(grid, cs, mean)
    res, _ = _highs_lp(phi_grid, A, b, mean_eq)
    if res is None:
        raise InfeasibleError("grid LP is infeasible for this constraint set")
    grid_value = float(res.fun)
    support = np.nonzero(res.x > 1e-12)[0]
    cap = cs.k + 2 - (1 if mean == "off" else 0)
    if support.size > cap:
        support = support[np.argsort(res.x[support])[::-1][:cap]]
        support.sort()
    seed_atoms = grid[support]
    gaps = np.diff(grid)
    left_gap = np.concatenate([[0.0], gaps])[support]
    right_gap = np.concatenate([gaps, [0.0]])[support]
    windows = 2.0 * np.maximum(np.maximum(left_gap, right_gap), 1e-6)

    def run(i):
        if i == 0:
            start = seed_atoms
        else:
            gen = RngStream(opts.seed, i).generator()
            start = np.clip(seed_atoms + gen.normal(0.0, windows / 2.0), lo, hi)
        st = _coordinate_descent(obj, cs, start, windows, lo, hi, opts, mean)
        if not math.isfinite(st.value):
            st = _coordinate_descent(obj, cs, seed_atoms, windows, lo, hi, opts, mean)
        return _canonical(st, obj, cs, opts, mean)

    n_runs = max(1, opts.restarts)
    if opts.threads > 1 and n_runs > 1:
        with ThreadPoolExecutor(opts.threads) as pool:
            states = list(pool.map(run, range(n_runs)))
    else:
        states = [run(i) for i in range(n_runs)]
    best = states[0]
    for st in states[1:]:
        if _better(st, best):
            best = st
    if not math.isfinite(best.value):
        raise InfeasibleError("no feasible support found")

    # certificate: LP on grid + final atoms, then the Lagrangian bound
    cert_grid = np.unique(np.concatenate([grid, best.atoms]))
    A2, b2 = _constraint_rows(cert_grid, cs, mean)
    res2, y = _highs_lp(obj(cert_grid), A2, b2, mean_eq) if opts.certify else (None, None)
    if res2 is None:
        lower = -math.inf
    else:
        mids = 0.5 * (cert_grid[1:] + cert_grid[:-1])
        dense = np.unique(
            np.concatenate([cert_grid, mids, 0.5 * (cert_grid[1:] + mids), 0.5 * (cert_grid[:-1] + mids)])
        )
        lower = _lagrangian_lower_bound(obj, cs, y, dense, mean)

    atoms, weights, value = best.atoms, best.weights, best.value
    if mean == "off":
        atoms, weights, value = _add_sentinel(obj, atoms, weights, value, opts.sentinel_weight)
    dist = DiscreteDistribution(atoms, weights, max_atoms=cs.k + 2)
    value = float(np.clip(value, 0.0, 1.0))
    return OptimizerResult(
        distribution=dist,
        value=value,
        status=best.status,
        restarts_used=n_runs,
        certificate_gap=value - lower,
        lower_bound=lower,
        grid_value=grid_value,
        sweeps=best.sweeps,
    )


def _add_sentinel(obj, atoms, weights, value, w):
    """Append a far-left atom of weight ``w`` that brings the mean to exactly 0 when it is positive."""
    m = math.fsum(weights * atoms)
    if m <= 0:
        return atoms, weights, value
    spot = -m * (1.0 - w) / w
    atoms = np.concatenate([[spot], atoms])
    weights = np.concatenate([[w], weights * (1.0 - w)])
    weights /= math.fsum(weights)
    return atoms, weights, math.fsum(weights * obj(atoms))


def _require_divergent(cs: ConstraintSet):
    if not cs.condition2_holds:
        raise UnboundedSupportError(
            "the limit needs a constraint function that diverges; step indicators can be "
            "approximated by SmoothedStep(threshold, slope) with a small slope"
        )


def asymptotic_limit(ch: chn.ChannelSpec, cs: ConstraintSet, r: float, opts: SearchOptions | None = None) -> OptimizerResult:
    """Limit of the minimum average error probability at second-order rate ``r``.

    Minimizes ``E[Phi(r/sqrt(V) - C' U / sqrt(V))]`` over the scalar feasible
    set with at most k+2 atoms.
    """
    if abs(ch.gamma - cs.gamma) > 1e-12 * max(1.0, ch.gamma):
        raise ValueError("channel cost_threshold and constraint-set gamma differ")
    _require_divergent(cs)
    return minimize_over_distributions(AsymptoticObjective.for_channel(ch, r), cs, opts)


def finite_n_converse_value(
    ch: chn.ChannelSpec, cs: ConstraintSet, n: int, gamma_thresh: float, opts: SearchOptions | None = None
) -> OptimizerResult:
    """``min E[phi_{n,gamma}(S)]`` over per-block cost laws meeting the constraints.

    The distribution in the result is over ``s = ||x||^2 / n`` (atoms >= 0).
    """
    if not gamma_thresh > 0:
        raise ValueError("gamma_thresh must be positive")
    _require_divergent(cs)
    obj = FiniteNObjective(ch, int(n), gamma_thresh)
    res = minimize_over_distributions(obj, cs, opts)
    root_n = math.sqrt(n)
    s_atoms = np.maximum(ch.gamma + res.distribution.atoms / root_n, 0.0)
    res.distribution = DiscreteDistribution(s_atoms, res.distribution.weights, max_atoms=cs.k + 2)
    return res


def result_is_feasible(res: OptimizerResult, cs: ConstraintSet, n: int | None = None, tol: float = 1e-8) -> bool:
    if n is None:
        return check_membership_U(res.distribution, cs, tol)
    return check_membership_S(res.distribution, cs, n, tol)


@dataclass
class LipschitzReport:
    r_grid: np.ndarray
    values: np.ndarray
    max_ratio: float
    bound: float
    passed: bool
    results: list = field(repr=False, default_factory=list)


def lipschitz_audit(ch: chn.ChannelSpec, cs: ConstraintSet, r_grid, opts: SearchOptions | None = None, slack: float | None = None) -> LipschitzReport:
    """Largest adjacent difference quotient of the limit over ``r_grid``.

    Passes when it does not exceed ``1 / (sqrt(V) sqrt(2 pi)) + slack``; the
    default slack is ``2 * opts.tolerance``.
    """
    opts = opts or SearchOptions()
    r = np.asarray(r_grid, dtype=float)
    if np.any(np.diff(r) <= 0):
        raise ValueError("r_grid must be strictly increasing")
    results = [asymptotic_limit(ch, cs, float(x), opts) for x in r]
    vals = np.array([res.value for res in results])
    ratios = np.abs(np.diff(vals)) / np.diff(r)
    bound = 1.0 / (math.sqrt(chn.dispersion(ch)) * math.sqrt(2.0 * math.pi))
    slack = 2.0 * opts.tolerance if slack is None else slack
    mr = float(ratios.max()) if ratios.size else 0.0
    return LipschitzReport(r, vals, mr, bound, mr <= bound + slack, results)
