"""Monomial algebra for exact generator expansions.

A monomial is a coefficient times a product of symbolic coupling
entries ``J_ij``, audit records of deterministic factors that were
already folded into the coefficient (drift matrix entries, constant
drifts, diffusion coefficients), and state factors ``x_i`` where the
index 0 stands for the constant 1.  Keeping placeholder ``x_0`` factors
makes the state degree ``r = |x_idx|`` invariant under the generator
letters, which is what the term-count bookkeeping relies on.

Expectations factorize over independent entries: each distinct coupling
pair contributes its raw moment scaled by ``N**(-mult/2)``, each state
coordinate its initial moment, both supplied by a :class:`MomentOracle`.
For symmetric ensembles the pairs ``(i, j)`` and ``(j, i)`` refer to
the same entry and are identified by a canonical ``(min, max)`` key in
every counting or moment computation; storage keeps pairs as generated.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .ensembles import EntryDistribution, InitialLaw, VarianceProfile, entry_moment

__all__ = [
    "Monomial",
    "Polynomial",
    "MomentOracle",
    "MultiplicityProfile",
    "canonical_pair",
    "multiplicity_profile",
    "expected_value",
    "difference_vanishes",
    "AlgebraError",
]


class AlgebraError(ValueError):
    """Malformed monomial, polynomial, or oracle input."""


def canonical_pair(pair: tuple, symmetric: bool) -> tuple:
    """Identify (i,j) with (j,i) under a symmetric ensemble."""
    if symmetric and pair[1] < pair[0]:
        return (pair[1], pair[0])
    return pair


def _sorted_pairs(pairs, low: int, what: str) -> tuple:
    out = []
    for p in pairs:
        i, j = int(p[0]), int(p[1])
        if i < low or j < 1:
            raise AlgebraError(f"{what} pair ({i},{j}) out of range")
        out.append((i, j))
    return tuple(sorted(out))


@dataclass(frozen=True)
class Monomial:
    """One term ``coeff * prod J_pairs * prod x_idx`` plus audit parts.

    ``lam_pairs``, ``h_idx``, and ``sig_pairs`` record which
    deterministic factors were folded into ``coeff``; they carry no
    numeric value of their own but keep the structural counts
    inspectable.
    """

    coeff: float = 1.0
    j_pairs: tuple = ()
    lam_pairs: tuple = ()
    h_idx: tuple = ()
    sig_pairs: tuple = ()
    x_idx: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeff", float(self.coeff))
        object.__setattr__(self, "j_pairs", _sorted_pairs(self.j_pairs, 1, "coupling"))
        object.__setattr__(self, "lam_pairs", _sorted_pairs(self.lam_pairs, 1, "drift"))
        object.__setattr__(self, "sig_pairs", _sorted_pairs(self.sig_pairs, 0, "diffusion"))
        h_idx = tuple(sorted(int(i) for i in self.h_idx))
        if h_idx and h_idx[0] < 1:
            raise AlgebraError("constant-drift indices must be >= 1")
        x_idx = tuple(sorted(int(i) for i in self.x_idx))
        if x_idx and x_idx[0] < 0:
            raise AlgebraError("state indices must be >= 0")
        object.__setattr__(self, "h_idx", h_idx)
        object.__setattr__(self, "x_idx", x_idx)

    @classmethod
    def from_x(cls, *indices: int, coeff: float = 1.0) -> "Monomial":
        return cls(coeff=coeff, x_idx=tuple(indices))

    @property
    def key(self) -> tuple:
        """Canonical identity ignoring the coefficient."""
        return (self.j_pairs, self.lam_pairs, self.h_idx, self.sig_pairs, self.x_idx)

    @property
    def degree(self) -> int:
        """State degree r = |x_idx| (placeholders included)."""
        return len(self.x_idx)

    def x_counts(self) -> Counter:
        """Multiplicities of the genuine state factors (index 0 excluded)."""
        return Counter(i for i in self.x_idx if i != 0)

    def with_coeff(self, coeff: float) -> "Monomial":
        return Monomial(coeff, self.j_pairs, self.lam_pairs, self.h_idx,
                        self.sig_pairs, self.x_idx)

    def __mul__(self, other: "Monomial") -> "Monomial":
        if not isinstance(other, Monomial):
            return NotImplemented
        return Monomial(self.coeff * other.coeff,
                        self.j_pairs + other.j_pairs,
                        self.lam_pairs + other.lam_pairs,
                        self.h_idx + other.h_idx,
                        self.sig_pairs + other.sig_pairs,
                        self.x_idx + other.x_idx)

    def evaluate(self, j: np.ndarray, x: np.ndarray) -> float:
        """Numeric value given coupling entries and a state (1-based).

        Audit parts contribute nothing; their values live in ``coeff``.
        """
        val = self.coeff
        for a, b in self.j_pairs:
            val *= j[a - 1, b - 1]
        for i in self.x_idx:
            if i != 0:
                val *= x[i - 1]
        return val

    def max_index(self) -> int:
        top = 0
        for a, b in self.j_pairs:
            top = max(top, a, b)
        for a, b in self.lam_pairs:
            top = max(top, a, b)
        for a, b in self.sig_pairs:
            top = max(top, a, b)
        for i in self.h_idx:
            top = max(top, i)
        for i in self.x_idx:
            top = max(top, i)
        return top


class Polynomial:
    """Immutable sum of monomials with like terms collected.

    Terms with exactly zero coefficient are dropped; no epsilon
    thresholding happens anywhere, so cancellation is only ever exact.
    """

    __slots__ = ("_terms",)

    def __init__(self, monomials: Iterable[Monomial] = ()):
        acc: dict = {}
        for m in monomials:
            if not isinstance(m, Monomial):
                raise AlgebraError(f"not a monomial: {m!r}")
            key = m.key
            prev = acc.get(key)
            if prev is None:
                acc[key] = m
            else:
                acc[key] = prev.with_coeff(prev.coeff + m.coeff)
        object.__setattr__(self, "_terms",
                           tuple(sorted((m for m in acc.values() if m.coeff != 0.0),
                                        key=lambda m: m.key)))

    @classmethod
    def from_x(cls, *indices: int, coeff: float = 1.0) -> "Polynomial":
        return cls([Monomial.from_x(*indices, coeff=coeff)])

    @classmethod
    def one(cls) -> "Polynomial":
        return cls([Monomial(coeff=1.0)])

    def terms(self) -> tuple:
        return self._terms

    def __iter__(self):
        return iter(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if not isinstance(other, Polynomial):
            return NotImplemented
        return Polynomial(self._terms + other._terms)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        if not isinstance(other, Polynomial):
            return NotImplemented
        return Polynomial(a * b for a in self._terms for b in other._terms)

    def scale(self, factor: float) -> "Polynomial":
        return Polynomial(m.with_coeff(m.coeff * factor) for m in self._terms)

    def coeff_of(self, key: tuple) -> float:
        for m in self._terms:
            if m.key == key:
                return m.coeff
        return 0.0

    def evaluate(self, j: np.ndarray, x: np.ndarray) -> float:
        return sum(m.evaluate(j, x) for m in self._terms)

    def __repr__(self) -> str:
        return f"Polynomial({len(self._terms)} terms)"


@dataclass(frozen=True)
class MomentOracle:
    """Exact moment tables for the coupling entries and the initial law.

    ``entry_moment(pair, ell)`` must return the raw ``ell``-th moment of
    the (variance-scaled) entry at a canonical pair; ``init_moment(i,
    ell)`` the ``ell``-th moment of coordinate ``i`` at time zero.
    """

    n: int
    entry_moment: Callable
    init_moment: Callable
    symmetric: bool = False

    def __post_init__(self) -> None:
        if self.n < 1:
            raise AlgebraError("oracle dimension must be positive")

    @classmethod
    def from_ensemble(cls, dist: EntryDistribution, profile: VarianceProfile,
                      init: InitialLaw, symmetric: bool = False) -> "MomentOracle":
        if profile.n != init.n:
            raise AlgebraError("profile and initial law dimensions differ")
        if symmetric and not profile.is_symmetric:
            raise AlgebraError("symmetric mode needs a symmetric variance profile")

        def em(pair, ell):
            m = profile.m[pair[0] - 1, pair[1] - 1]
            if m == 0.0 and ell > 0:
                return 0.0
            return m ** (ell / 2.0) * entry_moment(dist, ell)

        return cls(n=profile.n, entry_moment=em, init_moment=init.moment,
                   symmetric=symmetric)


@dataclass(frozen=True)
class MultiplicityProfile:
    """Distinct/singleton pair counts of a monomial's coupling factors.

    ``i_alpha``: distinct pairs in the designated alpha part.
    ``i_alpha_1``: alpha pairs of multiplicity exactly one.
    ``i_plus``: ``i_alpha_1`` plus one when no alpha pair exceeds
    multiplicity two.
    ``i_star``: distinct pairs of the full multiset not present in
    alpha.
    """

    i_alpha: int
    i_alpha_1: int
    i_plus: int
    i_star: int

    def __post_init__(self) -> None:
        if self.i_plus not in (self.i_alpha_1, self.i_alpha_1 + 1):
            raise AlgebraError("inconsistent singleton counts")
        if min(self.i_alpha, self.i_alpha_1, self.i_star) < 0:
            raise AlgebraError("counts must be non-negative")


def _canonical_counts(pairs, symmetric: bool) -> Counter:
    return Counter(canonical_pair(p, symmetric) for p in pairs)


def _check_alpha(mono: Monomial, alpha_part, symmetric: bool):
    alpha = _canonical_counts(alpha_part, symmetric)
    full = _canonical_counts(mono.j_pairs, symmetric)
    for pair, mult in alpha.items():
        if full[pair] < mult:
            raise AlgebraError(
                f"alpha part has {mult} copies of {pair}, monomial only {full[pair]}")
    return alpha, full


def multiplicity_profile(mono: Monomial, alpha_part: Iterable = (),
                         symmetric: bool = False) -> MultiplicityProfile:
    """Count distinct and singleton coupling pairs, alpha vs the rest."""
    alpha, full = _check_alpha(mono, alpha_part, symmetric)
    i_alpha = len(alpha)
    i_alpha_1 = sum(1 for mult in alpha.values() if mult == 1)
    i_plus = i_alpha_1 + (0 if any(mult > 2 for mult in alpha.values()) else 1)
    i_star = len(full) - i_alpha
    return MultiplicityProfile(i_alpha, i_alpha_1, i_plus, i_star)


def difference_vanishes(mono: Monomial, alpha_part: Iterable = (),
                        symmetric: bool = False) -> bool:
    """Whether the expectation is oracle-independent given matched variances.

    True when the full coupling multiset has a singleton pair (both
    expectations are zero) or consists entirely of doubled pairs (only
    the matched variances enter); equivalently, false exactly when
    every pair appears at least twice and some pair at least three
    times, in which case higher moments of the entry law can show up.
    """
    _, full = _check_alpha(mono, alpha_part, symmetric)
    mults = list(full.values())
    return not (all(m >= 2 for m in mults) and any(m >= 3 for m in mults))


def expected_value(mono: Monomial, oracle: MomentOracle) -> float:
    """Exact expectation over independent entries and the initial law."""
    val = mono.coeff
    if val == 0.0:
        return 0.0
    for pair, mult in _canonical_counts(mono.j_pairs, oracle.symmetric).items():
        moment = oracle.entry_moment(pair, mult)
        if moment == 0.0:
            return 0.0
        val *= moment * oracle.n ** (-mult / 2.0)
    for i, mult in mono.x_counts().items():
        moment = oracle.init_moment(i, mult)
        if moment == 0.0:
            return 0.0
        val *= moment
    return val
