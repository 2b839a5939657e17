"""Cost-moment constraint functions, constraint sets and feasibility checks.

A constraint set fixes the mean power ``gamma`` and a list of
``(function, budget)`` pairs. A scalar law P_U of the normalized cost
deviation is feasible when ``E[U] <= 0`` and ``E[f_i(U)] <= budget_i``.

The constraint functions form a closed family so that the regularity
conditions (nonnegativity, lower semicontinuity, eventual divergence) can
be decided per kind instead of per user callable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

DEFAULT_TOL = 1e-9


class UnboundedSupportError(ValueError):
    """No constraint forces the upper tail of the cost deviation to be light."""


class ConstraintFunction:
    """Base class. Subclasses are frozen dataclasses implementing ``__call__``."""

    kind: ClassVar[str] = ""
    #: eventually nondecreasing and divergent to +infinity
    diverges: ClassVar[bool] = True

    def __call__(self, u):
        raise NotImplementedError

    def right_tail_inverse(self, level: float) -> float:
        """Smallest ``t`` with ``f(u) > level`` for every ``u > t``."""
        raise NotImplementedError

    def left_tail_inverse(self, level: float) -> float | None:
        """Largest ``t`` with ``f(u) > level`` for every ``u < t``; None when f is bounded on the left."""
        return None

    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def to_dict(self) -> dict:
        return {"kind": self.kind}


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class PositivePart(ConstraintFunction):
    kind: ClassVar[str] = "positive_part"

    def __call__(self, u):
        return _out(np.maximum(np.asarray(u, dtype=float), 0.0))

    def right_tail_inverse(self, level):
        return max(level, 0.0)

    def breakpoints(self):
        return (0.0,)


@dataclass(frozen=True)
class Square(ConstraintFunction):
    kind: ClassVar[str] = "square"

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return _out(u * u)

    def right_tail_inverse(self, level):
        return math.sqrt(max(level, 0.0))

    def left_tail_inverse(self, level):
        return -math.sqrt(max(level, 0.0))


@dataclass(frozen=True)
class OneSidedSquare(ConstraintFunction):
    kind: ClassVar[str] = "one_sided_square"

    def __call__(self, u):
        u = np.maximum(np.asarray(u, dtype=float), 0.0)
        return _out(u * u)

    def right_tail_inverse(self, level):
        return math.sqrt(max(level, 0.0))

    def breakpoints(self):
        return (0.0,)


@dataclass(frozen=True)
class StepIndicator(ConstraintFunction):
    """``1{u > threshold}``; lower semicontinuous but bounded."""

    threshold: float = 0.0
    kind: ClassVar[str] = "step_indicator"
    diverges: ClassVar[bool] = False

    def __call__(self, u):
        return _out((np.asarray(u, dtype=float) > self.threshold).astype(float))

    def right_tail_inverse(self, level):
        raise UnboundedSupportError("step indicator is bounded and cannot confine the upper tail")

    def breakpoints(self):
        return (self.threshold,)

    def to_dict(self):
        return {"kind": self.kind, "threshold": self.threshold}


@dataclass(frozen=True)
class SmoothedStep(ConstraintFunction):
    """``1 + slope * (u - threshold)`` above the threshold, 0 at or below it."""

    threshold: float = 0.0
    slope: float = 1.0
    kind: ClassVar[str] = "smoothed_step"

    def __post_init__(self):
        if not self.slope > 0:
            raise ValueError("smoothed_step slope must be positive")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return _out(np.where(u > self.threshold, 1.0 + self.slope * (u - self.threshold), 0.0))

    def right_tail_inverse(self, level):
        if level < 1.0:
            return self.threshold
        return self.threshold + (level - 1.0) / self.slope

    def breakpoints(self):
        return (self.threshold,)

    def to_dict(self):
        return {"kind": self.kind, "threshold": self.threshold, "slope": self.slope}


@dataclass(frozen=True)
class PowerLaw(ConstraintFunction):
    """``|u| ** exponent`` with ``exponent >= 1``."""

    exponent: float = 2.0
    kind: ClassVar[str] = "power_law"

    def __post_init__(self):
        if not self.exponent >= 1:
            raise ValueError("power_law exponent must be >= 1")

    def __call__(self, u):
        return _out(np.abs(np.asarray(u, dtype=float)) ** self.exponent)

    def right_tail_inverse(self, level):
        return max(level, 0.0) ** (1.0 / self.exponent)

    def left_tail_inverse(self, level):
        return -(max(level, 0.0) ** (1.0 / self.exponent))

    def to_dict(self):
        return {"kind": self.kind, "exponent": self.exponent}


FUNCTION_KINDS = {
    cls.kind: cls for cls in (PositivePart, Square, OneSidedSquare, StepIndicator, SmoothedStep, PowerLaw)
}


def function_from_dict(d: dict) -> ConstraintFunction:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in FUNCTION_KINDS:
        raise ValueError(f"unknown constraint kind {kind!r}; expected one of {sorted(FUNCTION_KINDS)}")
    return FUNCTION_KINDS[kind](**d)


def evaluate(f: ConstraintFunction, u):
    return f(u)


@dataclass(frozen=True)
class ConstraintSet:
    gamma: float
    items: tuple = ()

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        items = tuple((f, float(b)) for f, b in self.items)
        for f, b in items:
            if not isinstance(f, ConstraintFunction):
                raise TypeError(f"expected ConstraintFunction, got {type(f).__name__}")
            if not (b >= 0 and math.isfinite(b)):
                raise ValueError(f"budget must lie in [0, inf), got {b}")
        object.__setattr__(self, "items", items)

    @property
    def k(self) -> int:
        return len(self.items)

    @property
    def condition2_holds(self) -> bool:
        return any(f.diverges for f, _ in self.items)

    def with_budget(self, index: int, budget: float) -> "ConstraintSet":
        items = list(self.items)
        items[index] = (items[index][0], budget)
        return ConstraintSet(self.gamma, tuple(items))

    def summary(self) -> str:
        parts = []
        for f, b in self.items:
            extra = ",".join(f"{k}={v:g}" for k, v in f.to_dict().items() if k != "kind")
            parts.append(f"{f.kind}({extra})<={b:g}" if extra else f"{f.kind}<={b:g}")
        return ";".join(parts) if parts else "mean_only"

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "items": [{**f.to_dict(), "budget": b} for f, b in self.items]}

    @classmethod
    def from_dict(cls, d: dict) -> "ConstraintSet":
        items = []
        for it in d.get("items", []):
            it = dict(it)
            budget = it.pop("budget")
            items.append((function_from_dict(it), budget))
        return cls(d["gamma"], tuple(items))


@dataclass(frozen=True)
class DiscreteDistribution:
    atoms: np.ndarray
    weights: np.ndarray
    max_atoms: int | None = field(default=None, compare=False)

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.atoms, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if a.shape != w.shape or a.ndim != 1 or a.size == 0:
            raise ValueError("atoms and weights must be equal-length nonempty 1-d sequences")
        if np.any(~np.isfinite(a)):
            raise ValueError("atoms must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (got {w.sum()!r})")
        if self.max_atoms is not None and a.size > self.max_atoms:
            raise ValueError(f"{a.size} atoms exceeds cap {self.max_atoms}")
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.atoms.size

    def expect(self, fn) -> float:
        return math.fsum(self.weights * np.asarray(fn(self.atoms), dtype=float))

    def mean(self) -> float:
        return math.fsum(self.weights * self.atoms)

    def map(self, fn) -> "DiscreteDistribution":
        return DiscreteDistribution(fn(self.atoms), self.weights, self.max_atoms)

    def to_dict(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}


def check_membership_U(P: DiscreteDistribution, cs: ConstraintSet, tol: float = DEFAULT_TOL) -> bool:
    if P.mean() > tol:
        return False
    return all(P.expect(f) <= b + tol for f, b in cs.items)


def check_membership_S(P: DiscreteDistribution, cs: ConstraintSet, n: int, tol: float = DEFAULT_TOL) -> bool:
    if np.any(P.atoms < 0):
        return False
    if P.mean() > cs.gamma + tol:
        return False
    root_n = math.sqrt(n)
    return all(P.expect(lambda s: f(root_n * (s - cs.gamma))) <= b + tol for f, b in cs.items)


def support_bound(cs: ConstraintSet, weight_floor: float) -> float:
    """Largest cost deviation an atom of weight ``>= weight_floor`` can sit at.

    Any atom above the returned value with at least that weight breaks the
    budget of some divergent constraint on its own.
    """
    if not weight_floor > 0:
        raise ValueError("weight_floor must be positive")
    if not cs.condition2_holds:
        raise UnboundedSupportError(
            "no constraint function diverges; replace step indicators by smoothed steps"
        )
    return min(f.right_tail_inverse(b / weight_floor) for f, b in cs.items if f.diverges)


def left_support_bound(cs: ConstraintSet, weight_floor: float) -> float | None:
    """Mirror image of :func:`support_bound` for functions that also grow on the left."""
    bounds = [f.left_tail_inverse(b / weight_floor) for f, b in cs.items]
    bounds = [b for b in bounds if b is not None]
    return max(bounds) if bounds else None
