"""Formal linearization of the equation's left-hand side.

For F depending on u-jets up to order k, the linearization is the linear
differential operator

    sum over jets u_alpha present in F of  (dF/du_alpha) * D_alpha

whose application to a perturbation replaces D_alpha by the alpha-jet of
the perturbation.  Works for any k; nothing here is tied to order 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import sympy as sp

from . import kernel
from .jets import JetSpace
from .kernel import Expr, normalize


class WrongUnknownError(ValueError):
    """F must be an expression in u-jets and independent variables only."""


@dataclass(frozen=True)
class LinearDifferentialOperator:
    """Coefficient map from sorted derivative multi-index to coefficient.

    The empty index is the zeroth-order term; applying the operator to
    the constant 1 returns exactly that coefficient.
    """
    coeffs: tuple[tuple[tuple[str, ...], Expr], ...]

    def coeff(self, index: tuple[str, ...]) -> Expr:
        for idx, c in self.coeffs:
            if idx == index:
                return c
        return sp.S.Zero

    def apply_to(self, unknown: str, space: JetSpace) -> Expr:
        """Apply to the zeroth jet of an unknown: D_alpha becomes the
        alpha-jet.  Result is linear in the target's jets."""
        return normalize(sum(c * space.jet(unknown, idx) for idx, c in self.coeffs))

    @property
    def order(self) -> int:
        return max((len(idx) for idx, _ in self.coeffs), default=0)


def linearize(F, space: JetSpace) -> LinearDifferentialOperator:
    """Linearization operator of F; coefficients are the partial
    derivatives of F with respect to each jet variable present."""
    F = sp.sympify(F)
    coeffs = []
    for s in sorted(F.free_symbols, key=str):
        jv = space.jet_var(s)
        if jv is None:
            continue
        if jv.unknown != "u":
            raise WrongUnknownError(f"F depends on {s}, not a u-jet")
        c = kernel.partial_diff(F, s)
        if c != 0:
            coeffs.append((jv.index, c))
    coeffs.sort(key=lambda pair: (len(pair[0]), pair[0]))
    return LinearDifferentialOperator(tuple(coeffs))


def first_variation_defect(F, space: JetSpace, seed: str = "U") -> Expr:
    """Defect of the first-variation identity through order one in a
    nilpotent perturbation size:

        F[u -> u + eps*seed] - F - eps * (linearization applied to seed)

    with eps^2 treated as zero.  Identically zero for every F; serves as
    the independent check of linearize()."""
    F = sp.sympify(F)
    eps = sp.Symbol("_eps")
    shift = {}
    for s in F.free_symbols:
        jv = space.jet_var(s)
        if jv is not None and jv.unknown == "u":
            shift[s] = s + eps * space.jet(seed, jv.index)
    shifted = F.xreplace(shift)
    lin = linearize(F, space).apply_to(seed, space)
    defect = sp.cancel(sp.together(shifted - F - eps * lin))
    num, den = defect.as_numer_denom()
    if den.subs(eps, 0) == 0:
        raise kernel.DegenerateExpressionError("denominator singular at eps = 0")
    p = sp.Poly(num, eps)
    return normalize(p.nth(0) + eps * p.nth(1))
