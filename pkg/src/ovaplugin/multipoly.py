"""Multi-indices and the monomial basis used by the local polynomial fits."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np


@dataclass(frozen=True)
class MultiIndex:
    """Exponent vector in N^d indexing one monomial ``u^s``."""

    exponents: tuple[int, ...]

    def __post_init__(self):
        exps = tuple(int(e) for e in self.exponents)
        if any(e < 0 for e in exps):
            raise ValueError(f"exponents must be non-negative, got {exps}")
        object.__setattr__(self, "exponents", exps)

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    @property
    def dimension(self) -> int:
        return len(self.exponents)

    def __add__(self, other: MultiIndex) -> MultiIndex:
        if self.dimension != other.dimension:
            raise ValueError("cannot add multi-indices of different dimension")
        return MultiIndex(tuple(a + b for a, b in zip(self.exponents, other.exponents)))


@dataclass(frozen=True)
class PolyBasis:
    """All multi-indices of degree <= ``max_degree`` in graded lexicographic order.

    The zero index always comes first, so coefficient 0 of any fit in this
    basis is the intercept.
    """

    dimension: int
    max_degree: int
    indices: tuple[MultiIndex, ...]

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def exponent_matrix(self) -> np.ndarray:
        """``(M, d)`` integer array of exponents, one row per basis element."""
        return np.array([s.exponents for s in self.indices], dtype=int).reshape(
            self.size, self.dimension
        )

    def design(self, U: np.ndarray) -> np.ndarray:
        """Evaluate every monomial at each row of ``U``; returns ``(..., M)``."""
        U = np.asarray(U, dtype=float)
        out = np.ones(U.shape[:-1] + (self.size,))
        for col, s in enumerate(self.indices):
            for axis, e in enumerate(s.exponents):
                if e:
                    out[..., col] *= U[..., axis] ** e
        return out


def enumerate_basis(d: int, k: int) -> PolyBasis:
    """Return the canonical basis of monomials in ``d`` variables up to degree ``k``.

    Ordering is degree-major, then lexicographic on the exponent tuple, e.g.
    ``(0,0), (0,1), (1,0), (0,2), (1,1), (2,0)`` for ``d=2, k=2``.
    """
    if int(d) != d or d < 1:
        raise ValueError(f"invalid dimension d={d}; need d >= 1")
    if int(k) != k or k < 0:
        raise ValueError(f"invalid degree k={k}; need k >= 0")
    d, k = int(d), int(k)
    exps = [e for e in itertools.product(range(k + 1), repeat=d) if sum(e) <= k]
    exps.sort(key=lambda e: (sum(e), e))
    basis = PolyBasis(d, k, tuple(MultiIndex(e) for e in exps))
    assert basis.size == comb(d + k, d)
    return basis


def eval_monomial(u, s: MultiIndex) -> float:
    """``prod_i u_i ** s_i`` with the convention ``0 ** 0 == 1``."""
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] != s.dimension:
        raise ValueError(
            f"dimension mismatch: point has {u.shape[0]} coordinates, "
            f"multi-index has {s.dimension}"
        )
    return float(np.prod(u ** np.asarray(s.exponents, dtype=float)))


def eval_poly(coeffs, basis: PolyBasis, u) -> float:
    coeffs = np.asarray(coeffs, dtype=float).ravel()
    if coeffs.shape[0] != basis.size:
        raise ValueError(
            f"expected {basis.size} coefficients for this basis, got {coeffs.shape[0]}"
        )
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] != basis.dimension:
        raise ValueError(
            f"dimension mismatch: point has {u.shape[0]} coordinates, basis has {basis.dimension}"
        )
    return float(coeffs @ basis.design(u))
