"""
Sparse multivariate polynomials of total degree at most 4 over the unit cube.
"""
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from cdsclear import get_logger, PolynomialDegreeError

logger = get_logger(__name__)

MAX_DEGREE = 4

Monomial = Tuple[Tuple[int, ...], float]


class SparsePolynomial:
    """
    A sum of monomials c * x_0^e_0 * ... * x_{n-1}^e_{n-1}. Monomials with equal exponents are merged,
    zero coefficients are dropped and the rest is kept sorted by exponent vector.
    """

    def __init__(self, var_count: int, monomials: Iterable[Tuple[Sequence[int], float]] = (),
                 max_degree: int = MAX_DEGREE):
        if var_count < 0:
            raise ValueError(f"var_count must be nonnegative, got {var_count}")
        self.var_count = int(var_count)
        merged: Dict[Tuple[int, ...], float] = {}
        for exponents, coefficient in monomials:
            exponents = tuple(int(e) for e in exponents)
            if len(exponents) != self.var_count:
                raise ValueError(f"Exponent vector {exponents} does not have {self.var_count} entries")
            if any(e < 0 for e in exponents):
                raise ValueError(f"Negative exponent in {exponents}")
            if sum(exponents) > max_degree:
                raise PolynomialDegreeError(f"Monomial {exponents} has degree {sum(exponents)} > {max_degree}")
            merged[exponents] = merged.get(exponents, 0.0) + float(coefficient)
        self.monomials: Tuple[Monomial, ...] = tuple(sorted((e, c) for e, c in merged.items() if c != 0.0))

    def __repr__(self):
        return f"<SparsePolynomial n={self.var_count}: {self.to_sympy()}>"

    def __eq__(self, other):
        return isinstance(other, SparsePolynomial) and self.var_count == other.var_count \
            and self.monomials == other.monomials

    def __hash__(self):
        return hash((self.var_count, self.monomials))

    @property
    def size(self) -> int:
        """ Number of monomials s. """
        return len(self.monomials)

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self.monomials), default=0)

    @property
    def is_zero(self) -> bool:
        return not self.monomials

    @property
    def max_coefficient(self) -> float:
        return max((abs(c) for _, c in self.monomials), default=0.0)

    def is_normalized(self, tol: float = 1e-15) -> bool:
        return not self.is_zero and self.max_coefficient <= 1.0 / self.size + tol

    def scaled(self, factor: float) -> "SparsePolynomial":
        return SparsePolynomial(self.var_count, [(e, factor * c) for e, c in self.monomials])

    def evaluate(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.var_count,):
            raise ValueError(f"Expected a point with {self.var_count} coordinates, got shape {x.shape}")
        return float(sum(c * np.prod(np.power(x, e)) for e, c in self.monomials))

    __call__ = evaluate

    # sympy

    def symbols(self) -> List[sp.Symbol]:
        return list(sp.symbols(f"x0:{self.var_count}")) if self.var_count else []

    def to_sympy(self, symbols: Optional[Sequence[sp.Symbol]] = None) -> sp.Expr:
        """ Expression with exact rational coefficients (the binary value of each float). """
        symbols = symbols or self.symbols()
        expr = sp.S.Zero
        for exponents, coefficient in self.monomials:
            term = sp.Rational(coefficient)
            for symbol, e in zip(symbols, exponents):
                term *= symbol ** e
            expr += term
        return expr

    @classmethod
    def from_sympy(cls, expr: sp.Expr, symbols: Sequence[sp.Symbol], max_degree: int = MAX_DEGREE) -> "SparsePolynomial":
        if not symbols:
            value = float(expr)
            return cls(0, [((), value)])
        poly = sp.Poly(sp.expand(expr), *symbols)
        return cls(len(symbols), [(e, float(c)) for e, c in poly.terms()], max_degree=max_degree)


def normalize_poly(p: SparsePolynomial) -> SparsePolynomial:
    """
    Scales p so that every coefficient is at most 1/s in magnitude; already normalized input is returned unchanged.
    """
    if p.is_zero:
        raise ValueError("Cannot normalize the zero polynomial")
    if p.is_normalized(tol=0.0):
        return p
    factor = 1.0 / (p.size * p.max_coefficient)
    normalized = p.scaled(factor)
    logger.debug("Normalized polynomial by factor %.6g", factor)
    return normalized


def split_poly(p: SparsePolynomial) -> Tuple[SparsePolynomial, SparsePolynomial]:
    """ p = p_plus - p_minus with nonnegative coefficients on both sides. """
    plus = SparsePolynomial(p.var_count, [(e, c) for e, c in p.monomials if c > 0])
    minus = SparsePolynomial(p.var_count, [(e, -c) for e, c in p.monomials if c < 0])
    return plus, minus


def quad_to_quartic(system: Sequence[SparsePolynomial]) -> SparsePolynomial:
    """
    Sum of squares of a quadratic system; it vanishes exactly at the common roots of the system.
    """
    if not system:
        return SparsePolynomial(0, [])
    var_count = system[0].var_count
    for idx, p in enumerate(system):
        if p.var_count != var_count:
            raise ValueError(f"Polynomial {idx} has {p.var_count} variables, expected {var_count}")
        if p.degree > 2:
            raise PolynomialDegreeError(f"Polynomial {idx} has degree {p.degree} > 2")
    symbols = system[0].symbols()
    expr = sp.expand(sum((p.to_sympy(symbols) ** 2 for p in system), sp.S.Zero))
    if expr == 0:
        return SparsePolynomial(var_count, [])
    return SparsePolynomial.from_sympy(expr, symbols)
