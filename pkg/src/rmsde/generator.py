"""Generator letters, their polynomial action, and truncated series.

The generator of the diffusion splits into four letters: the symbolic
coupling part, the deterministic drift part, the constant drift part,
and the second-order diffusion part.  Each letter maps a monomial to a
controlled number of monomials (the product rule, grouped by distinct
coordinate), which gives exact polynomial expressions for ``L^k f`` and
hence truncated expansions of ``E[f(X_t)]``.

Deterministic parameter values (drift matrix, constant drift,
diffusion) fold into coefficients at application time; only coupling
entries stay symbolic so that expectations reduce to moment products.
A fully numeric variant substitutes the coupling values too and is much
faster; it is the right tool for fixed-coupling conditional means.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from typing import Iterable, NamedTuple

import numpy as np

from .algebra import AlgebraError, Monomial, MomentOracle, Polynomial, expected_value
from .dynamics import SystemParams

__all__ = [
    "Letter",
    "TaylorResult",
    "apply_letter",
    "apply_generator",
    "taylor_terms",
    "taylor_mean",
    "taylor_mean_numericJ",
    "taylor_mean_multitime",
    "count_bound_check",
    "DEFAULT_TRUNCATION_CAP",
    "SYMBOLIC_DIMENSION_CAP",
    "TruncationError",
]

DEFAULT_TRUNCATION_CAP = 16
SYMBOLIC_DIMENSION_CAP = 8


class TruncationError(ValueError):
    """Requested order or dimension beyond the configured caps."""


class Letter(enum.Enum):
    """The four summands of the generator."""

    COUPLING = "J"
    DRIFT = "lam"
    CONSTANT = "h"
    DIFFUSION = "delta"


def _replace_one(x_idx: tuple, j: int, i: int) -> tuple:
    out = list(x_idx)
    out.remove(j)
    out.append(i)
    return tuple(out)


def _replace_two(x_idx: tuple, j: int, i: int, i2: int) -> tuple:
    out = list(x_idx)
    out.remove(j)
    out.remove(j)
    out.extend((i, i2))
    return tuple(out)


def _letter_terms(mono: Monomial, letter: Letter, params: SystemParams):
    """Raw product-rule terms, one per (coordinate, target) choice.

    Zero-valued deterministic factors are skipped, so the yield count is
    the nonzero term count that the per-letter bounds refer to.
    """
    n = params.n
    counts = sorted(mono.x_counts().items())
    for j, c in counts:
        if letter is Letter.CONSTANT:
            hj = params.h[j - 1]
            if hj != 0.0:
                yield Monomial(mono.coeff * c * hj, mono.j_pairs, mono.lam_pairs,
                               mono.h_idx + (j,), mono.sig_pairs,
                               _replace_one(mono.x_idx, j, 0))
        elif letter is Letter.COUPLING:
            for i in range(1, n + 1):
                yield Monomial(mono.coeff * c, mono.j_pairs + ((i, j),),
                               mono.lam_pairs, mono.h_idx, mono.sig_pairs,
                               _replace_one(mono.x_idx, j, i))
        elif letter is Letter.DRIFT:
            col = params.lam[:, j - 1]
            for i in np.nonzero(col)[0]:
                yield Monomial(mono.coeff * c * col[i], mono.j_pairs,
                               mono.lam_pairs + ((int(i) + 1, j),), mono.h_idx,
                               mono.sig_pairs, _replace_one(mono.x_idx, j, int(i) + 1))
        elif letter is Letter.DIFFUSION:
            if c < 2:
                continue
            col = params.sigma[:, j - 1]
            nz = np.nonzero(col)[0]
            for i in nz:
                for i2 in nz:
                    yield Monomial(mono.coeff * c * (c - 1) * col[i] * col[i2],
                                   mono.j_pairs, mono.lam_pairs, mono.h_idx,
                                   mono.sig_pairs + ((int(i), j), (int(i2), j)),
                                   _replace_two(mono.x_idx, j, int(i), int(i2)))
        else:
            raise AlgebraError(f"unhandled letter {letter}")


def _check_indices(p: Polynomial, params: SystemParams) -> None:
    for mono in p:
        if mono.max_index() > params.n:
            raise AlgebraError(
                f"monomial touches coordinate {mono.max_index()} but the system has {params.n}")


def apply_letter(p: Polynomial, letter: Letter, params: SystemParams) -> Polynomial:
    """One letter applied to every monomial, like terms collected."""
    _check_indices(p, params)
    return Polynomial(t for m in p for t in _letter_terms(m, letter, params))


def apply_generator(p: Polynomial, params: SystemParams) -> Polynomial:
    """Full generator: sum of the four letter applications."""
    _check_indices(p, params)
    return Polynomial(t for m in p for letter in Letter
                      for t in _letter_terms(m, letter, params))


class TaylorResult(NamedTuple):
    """Truncated series value with a heuristic tail estimate.

    ``diverging`` is set when the partial terms were still growing at
    the truncation order, in which case ``tail_bound`` is infinite and
    the value should not be trusted.  The geometric tail estimate is a
    heuristic, not a proven bound.
    """

    value: float
    tail_bound: float
    diverging: bool


def _tail_estimate(terms: list) -> tuple:
    if len(terms) < 2:
        return math.inf, False
    last, prev = abs(terms[-1]), abs(terms[-2])
    if last == 0.0:
        return 0.0, False
    if prev == 0.0 or last >= prev:
        return math.inf, True
    ratio = last / prev
    return last * ratio / (1.0 - ratio), False


def _validate_caps(k: int, cap: int, params: SystemParams, symbolic: bool) -> None:
    if k < 0:
        raise TruncationError("truncation order must be non-negative")
    if k > cap:
        raise TruncationError(f"truncation order {k} exceeds the cap {cap}")
    if symbolic and params.n > SYMBOLIC_DIMENSION_CAP:
        raise TruncationError(
            f"symbolic expansion supports dimension <= {SYMBOLIC_DIMENSION_CAP}, got {params.n}")


def taylor_terms(f: Polynomial, params: SystemParams, oracle: MomentOracle,
                 t: float, k: int, cap: int = DEFAULT_TRUNCATION_CAP) -> list:
    """Per-order contributions ``t^k'/k'! * E[L^k' f(X_0)]`` for k' = 0..k."""
    _validate_caps(k, cap, params, symbolic=True)
    if oracle.n != params.n:
        raise AlgebraError("oracle and system dimensions differ")
    poly = f
    terms = []
    for order in range(k + 1):
        if order > 0:
            poly = apply_generator(poly, params)
            if not len(poly):
                terms.extend(0.0 for _ in range(order, k + 1))
                break
        s = sum(expected_value(m, oracle) for m in poly)
        terms.append(t ** order / math.factorial(order) * s)
    return terms


def taylor_mean(f: Polynomial, params: SystemParams, oracle: MomentOracle,
                t: float, k: int, cap: int = DEFAULT_TRUNCATION_CAP) -> TaylorResult:
    """Truncated expansion of ``E[f(X_t)]`` over coupling and initial law.

    Computes ``sum_{k'=0..k} t^k'/k'! * E[L^k' f(X_0)]`` with the
    expectation taken through the moment oracle.  Intended for small
    dimension; the coupling stays symbolic.
    """
    if t == 0.0:
        _validate_caps(k, cap, params, symbolic=True)
        value = sum(expected_value(m, oracle) for m in f)
        return TaylorResult(value, 0.0, False)
    terms = taylor_terms(f, params, oracle, t, k, cap)
    tail, diverging = _tail_estimate(terms)
    return TaylorResult(sum(terms), tail, diverging)


# ---------------------------------------------------------------------------
# numeric-coupling fast path: polynomials in x only, keyed by sorted index
# tuples (0 = constant placeholder)

def _fold_coupling(f: Polynomial, j: np.ndarray) -> dict:
    out: dict = {}
    for mono in f:
        coeff = mono.coeff
        for a, b in mono.j_pairs:
            coeff *= j[a - 1, b - 1]
        if coeff != 0.0:
            key = mono.x_idx
            out[key] = out.get(key, 0.0) + coeff
    return {k: v for k, v in out.items() if v != 0.0}


def _numeric_generator(xpoly: dict, params: SystemParams) -> dict:
    drift = params.coupling + params.lam
    out: dict = {}

    def add(key, value):
        if value != 0.0:
            key = tuple(sorted(key))
            out[key] = out.get(key, 0.0) + value

    for key, coeff in xpoly.items():
        counts = Counter(i for i in key if i != 0)
        for j, c in counts.items():
            col = drift[:, j - 1]
            for i in np.nonzero(col)[0]:
                add(_replace_one(key, j, int(i) + 1), coeff * c * col[i])
            hj = params.h[j - 1]
            if hj != 0.0:
                add(_replace_one(key, j, 0), coeff * c * hj)
            if c >= 2:
                scol = params.sigma[:, j - 1]
                nz = np.nonzero(scol)[0]
                for i in nz:
                    for i2 in nz:
                        add(_replace_two(key, j, int(i), int(i2)),
                            coeff * c * (c - 1) * scol[i] * scol[i2])
    return {k: v for k, v in out.items() if v != 0.0}


def _eval_xpoly(xpoly: dict, x_full: np.ndarray) -> float:
    total = 0.0
    for key, coeff in xpoly.items():
        val = coeff
        for i in key:
            if i != 0:
                val *= x_full[i]
        total += val
    return total


def taylor_mean_numericJ(f: Polynomial, params: SystemParams, x, t: float,
                         k: int, cap: int = DEFAULT_TRUNCATION_CAP) -> float:
    """Truncated conditional mean ``E[f(X_t) | X_0 = x]`` at fixed coupling.

    All parameters, coupling included, are substituted numerically, so
    this scales to higher truncation orders than the symbolic path.
    """
    _validate_caps(k, cap, params, symbolic=False)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.n,):
        raise AlgebraError(f"state must have shape ({params.n},), got {x.shape}")
    _check_indices(f, params)
    x_full = np.concatenate(([1.0], x))
    xpoly = _fold_coupling(f, params.coupling)
    total = 0.0
    for order in range(k + 1):
        if order > 0:
            xpoly = _numeric_generator(xpoly, params)
            if not xpoly:
                break
        total += t ** order / math.factorial(order) * _eval_xpoly(xpoly, x_full)
    return total


def _compositions(total: int, parts: int):
    """All tuples of `parts` non-negative ints summing to <= total."""
    if parts == 0:
        yield ()
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def taylor_mean_multitime(fs: Iterable, ts, params: SystemParams,
                          oracle: MomentOracle, k: int,
                          cap: int = DEFAULT_TRUNCATION_CAP) -> float:
    """Truncated multi-time moment ``E[f1(X_{t1}) f2(X_{t2}) ...]``.

    Expands each semigroup gap to a truncated series with total order at
    most ``k``: the inner-most factor sits at the largest time, and each
    gap ``t_i - t_{i-1}`` contributes its own truncation index.
    """
    fs = list(fs)
    times = [float(t) for t in np.atleast_1d(np.asarray(ts, dtype=np.float64))]
    if len(fs) != len(times) or not fs:
        raise AlgebraError("need one polynomial per time")
    if any(b < a for a, b in zip(times, times[1:])):
        raise AlgebraError("times must be non-decreasing")
    if any(t < 0 for t in times):
        raise AlgebraError("times must be non-negative")
    _validate_caps(k, cap, params, symbolic=True)
    if oracle.n != params.n:
        raise AlgebraError("oracle and system dimensions differ")
    levels = len(fs)
    gaps = [times[0]] + [b - a for a, b in zip(times, times[1:])]

    # memoized suffix expansions: poly(level, ks) = L^{ks[0]} (f_level * poly(level+1, ks[1:]))
    memo: dict = {(levels, ()): Polynomial.one()}

    def suffix(level: int, ks: tuple) -> Polynomial:
        key = (level, ks)
        got = memo.get(key)
        if got is not None:
            return got
        if ks[0] == 0:
            poly = fs[level] * suffix(level + 1, ks[1:])
        else:
            poly = apply_generator(suffix(level, (ks[0] - 1,) + ks[1:]), params)
        memo[key] = poly
        return poly

    total = 0.0
    for ks in _compositions(k, levels):
        weight = 1.0
        for gap, order in zip(gaps, ks):
            weight *= gap ** order / math.factorial(order)
        if weight == 0.0:
            continue
        poly = suffix(0, ks)
        total += weight * sum(expected_value(m, oracle) for m in poly)
    return total


def count_bound_check(word: Iterable, f0: Monomial, params: SystemParams,
                      cap: int = DEFAULT_TRUNCATION_CAP) -> tuple:
    """Raw term count of a letter word against the a-priori product bound.

    Expands ``word`` applied to ``f0`` without collecting like terms and
    returns ``(actual, bound)`` where the bound multiplies the
    per-letter factors r, rN, r*n_lam, r*n_sigma**2 (r is the state
    degree, invariant along the word).  The grouped product rule never
    generates more terms than the ungrouped sums the bound counts, and
    a violation raises.
    """
    word = list(word)
    if len(word) > cap:
        raise TruncationError(f"word length {len(word)} exceeds the cap {cap}")
    _check_indices(Polynomial([f0]), params)
    r = f0.degree
    factors = {Letter.CONSTANT: r, Letter.COUPLING: r * params.n,
               Letter.DRIFT: r * params.n_lam,
               Letter.DIFFUSION: r * params.n_sigma ** 2}
    bound = 1
    leaves = [f0] if f0.coeff != 0.0 else []
    for letter in word:
        if not isinstance(letter, Letter):
            raise AlgebraError(f"not a generator letter: {letter!r}")
        bound *= factors[letter]
        leaves = [t for m in leaves for t in _letter_terms(m, letter, params)]
    actual = len(leaves)
    if actual > bound:
        raise AssertionError(
            f"term count {actual} exceeded the proven bound {bound}; this is a bug")
    return actual, bound
