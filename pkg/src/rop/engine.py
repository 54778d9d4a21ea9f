"""Twisted recursion relations: building, residuals, determining system, solving.

The recursion relations couple a seed symmetry U to its image Ut through
the split Lax operators, corrected by four zeroth-order twist functions
f_i^s.  Two requirements make the relations a recursion operator:

  a) the pair of relations, read as a system for Ut, is cross-derivative
     compatible whenever U satisfies the linearized equation;
  b) Ut then satisfies the linearized equation itself.

Both are computed as exact residuals reduced modulo the equation, the
linearized equation, the relations, and differential consequences of all
three.  With the twist functions expanded over an ansatz with unknown
constants, the vanishing of every residual coefficient yields the
determining system, solved exactly by linear elimination plus bounded
branching on factored quadratics.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import sympy as sp

from . import kernel
from .jets import (JetSpace, RewriteRule, RewriteSystem, solve_for_leading,
                   total_derivative)
from .kernel import Expr, normalize
from .lax import LAMBDA, DegeneratePairError, FirstOrderOperator, LaxPair
from .linearize import linearize

ORIENTATIONS = ("forward", "swapped")
SLOTS = ((1, 0), (1, 1), (2, 0), (2, 1))


class InvalidTwistError(ValueError):
    """Twist functions must be free of the spectral parameter and of
    U/Ut jets."""


class PartialResultError(RuntimeError):
    """Branch bound exhausted; carries the solutions found so far."""

    def __init__(self, msg, solutions, unresolved):
        super().__init__(msg)
        self.solutions = solutions
        self.unresolved = unresolved


@dataclass(frozen=True)
class TwistRelations:
    """The four twist functions plus the orientation flag.

    forward:  X1_i(Ut) + f_i^1 Ut = f_i^0 U + X0_i(U)
    swapped:  the roles of (X1, X0) exchanged between Ut and U.
    """
    f: dict
    orientation: str = "forward"

    def __post_init__(self):
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}")
        for slot in SLOTS:
            if slot not in self.f:
                raise InvalidTwistError(f"missing twist slot f{slot[0]}_{slot[1]}")

    def validate(self, space: JetSpace) -> None:
        for slot, e in self.f.items():
            e = sp.sympify(e)
            if e.has(LAMBDA):
                raise InvalidTwistError(f"f{slot} depends on the spectral parameter")
            for s in space.jets_in(e):
                if space.jet_var(s).unknown != "u":
                    raise InvalidTwistError(f"f{slot} depends on {s}")

    def with_orientation(self, orientation: str) -> "TwistRelations":
        return TwistRelations(dict(self.f), orientation)

    def substituted(self, bindings: dict) -> "TwistRelations":
        return TwistRelations(
            {slot: normalize(sp.sympify(e).xreplace(bindings))
             for slot, e in self.f.items()},
            self.orientation)

    def free_constants(self, space: JetSpace) -> set:
        out = set()
        for e in self.f.values():
            out |= sp.sympify(e).free_symbols & set(space.constants)
        return out

    @staticmethod
    def zero(orientation: str = "forward") -> "TwistRelations":
        return TwistRelations({slot: sp.S.Zero for slot in SLOTS}, orientation)


@dataclass(frozen=True)
class RelationSet:
    """The two relations moved to one side, plus their solved forms."""
    relations: tuple[Expr, Expr]
    rules: tuple[RewriteRule, RewriteRule]
    directions: tuple[str, str]
    assumptions: tuple[Expr, ...]
    orientation: str


def build_relations(pair: LaxPair, twist: TwistRelations,
                    space: JetSpace) -> RelationSet:
    """Form E_i = (Ut-side operator)(Ut) + f_i^1 Ut - f_i^0 U - (U-side
    operator)(U) and solve each for its leading Ut-jet."""
    twist.validate(space)
    relations, rules, dirs, assumptions = [], [], [], []
    for i in (0, 1):
        ut_op = pair.x1[i] if twist.orientation == "forward" else pair.x0[i]
        u_op = pair.x0[i] if twist.orientation == "forward" else pair.x1[i]
        e = normalize(ut_op.apply_to_unknown("Ut", space)
                      + twist.f[(i + 1, 1)] * space.jet("Ut")
                      - twist.f[(i + 1, 0)] * space.jet("U")
                      - u_op.apply_to_unknown("U", space))
        rule, lead = solve_for_leading(e, "Ut", space)
        jv = space.jet_var(rule.lhs)
        if jv.order != 1:
            raise DegeneratePairError(
                f"leading Ut-jet {rule.lhs} of relation {i + 1} is not first order")
        relations.append(e)
        rules.append(rule)
        dirs.append(jv.index[0])
        if not lead.is_Number:
            assumptions.append(lead)
    if rules[0].lhs == rules[1].lhs:
        raise DegeneratePairError(
            f"both relations solve for the same leading Ut-jet {rules[0].lhs}")
    return RelationSet(tuple(relations), tuple(rules), tuple(dirs),
                       tuple(assumptions), twist.orientation)


def full_system(F, relset: RelationSet, space: JetSpace) -> RewriteSystem:
    """Three-layer rewrite system: F = 0, the linearized equation for U,
    and the recursion relations for Ut, each solved and reduced against
    the layers below."""
    f_rule, f_lead = solve_for_leading(F, "u", space)
    sys_u = RewriteSystem(space, [f_rule],
                          [f_lead] if not f_lead.is_Number else [])
    lin_u = sys_u.reduce(linearize(F, space).apply_to("U", space))
    u_rule, u_lead = solve_for_leading(lin_u, "U", space)
    sys_uu = sys_u.extended([u_rule],
                            [u_lead] if not u_lead.is_Number else [])
    ut_rules = [RewriteRule(r.lhs, sys_uu.reduce(r.rhs)) for r in relset.rules]
    return sys_uu.extended(ut_rules, relset.assumptions)


def compatibility_residual(relset: RelationSet, F, space: JetSpace,
                           sys: RewriteSystem | None = None) -> Expr:
    """Condition a): the cross-derivative of the two solved relations,
    reduced; zero means the system for Ut is compatible whenever U is a
    symmetry."""
    sys = sys or full_system(F, relset, space)
    (r1, r2), (d1, d2) = relset.rules, relset.directions
    cross = (total_derivative(sys.rules[r1.lhs].rhs, d2, space)
             - total_derivative(sys.rules[r2.lhs].rhs, d1, space))
    return sys.reduce(cross)


def symmetry_residual(relset: RelationSet, F, space: JetSpace,
                      sys: RewriteSystem | None = None) -> Expr:
    """Condition b): the linearized equation applied to Ut, reduced; zero
    means Ut is a symmetry whenever U is."""
    sys = sys or full_system(F, relset, space)
    return sys.reduce(linearize(F, space).apply_to("Ut", space))


@dataclass
class VerifyReport:
    passed: bool
    orientation: str
    compatibility: Expr
    symmetry: Expr
    assumptions: tuple[Expr, ...]
    timings: dict = field(default_factory=dict)
    retried: bool = False


def verify(F, pair: LaxPair, twist: TwistRelations, space: JetSpace) -> VerifyReport:
    """PASS iff both residuals are exactly zero.

    A nonzero residual triggers one retry with the jet-order bound raised
    by one, guarding against false positives of the non-completed
    reduction strategy.
    """
    if twist.free_constants(space):
        raise InvalidTwistError("verify requires a twist without unknown constants")
    retried = False
    for attempt, sp_ in enumerate((space, space.with_max_order(space.max_order + 1))):
        t0 = time.monotonic()
        relset = build_relations(pair, twist, sp_)
        sys = full_system(F, relset, sp_)
        t1 = time.monotonic()
        compat = compatibility_residual(relset, F, sp_, sys)
        t2 = time.monotonic()
        symm = symmetry_residual(relset, F, sp_, sys)
        t3 = time.monotonic()
        timings = {"build": t1 - t0, "compatibility": t2 - t1, "symmetry": t3 - t2}
        if compat == 0 and symm == 0:
            break
        retried = True
    return VerifyReport(compat == 0 and symm == 0, twist.orientation,
                        compat, symm, sys.assumptions, timings, retried)


# -- ansatz and determining system ------------------------------------


@dataclass(frozen=True)
class AnsatzBasis:
    """Per twist slot, the candidate terms the twist function is a
    constant linear combination of."""
    slots: dict
    fallback: bool = False

    def size(self) -> int:
        return sum(len(v) for v in self.slots.values())


def default_ansatz(F, pair: LaxPair, space: JetSpace) -> AnsatzBasis:
    """Ratios (second derivative)/(first derivative): u_pq/u_r with p, q
    over the variables occurring in F or the Lax coefficients and u_r
    over first derivatives found in Lax-coefficient denominators."""
    coeffs = [sp.sympify(F)]
    for op in pair.x1 + pair.x0:
        coeffs.append(sp.sympify(op.free))
        coeffs.extend(sp.sympify(c) for _, c in op.dirs)
    used = set()
    denom_firsts = set()
    for c in coeffs:
        for s in c.free_symbols:
            jv = space.jet_var(s)
            if jv is not None:
                used.update(jv.index)
            elif s.name in space.var_syms:
                used.add(s.name)
    for c in coeffs[1:]:
        _num, den = normalize(c).as_numer_denom()
        for factor, _mult in sp.factor_list(den)[1]:
            jv = space.jet_var(factor) if factor.is_Symbol else None
            if jv is not None and jv.unknown == "u" and jv.order == 1:
                denom_firsts.add(jv.index[0])
    used_vars = [v for v in space.variables if v in used]
    fallback = not denom_firsts
    rs = used_vars if fallback else [v for v in space.variables if v in denom_firsts]
    terms = []
    for p, q in itertools.combinations_with_replacement(used_vars, 2):
        for r in rs:
            t = normalize(space.jet("u", (p, q)) / space.jet("u", (r,)))
            if t not in terms:
                terms.append(t)
    return AnsatzBasis({slot: list(terms) for slot in SLOTS}, fallback)


@dataclass
class DeterminingSystem:
    equations: list
    unknowns: list
    slot_terms: dict  # slot -> list of (constant, basis term)
    orientation: str


def ansatz_twist(basis: AnsatzBasis, orientation: str,
                 space: JetSpace) -> tuple[TwistRelations, dict]:
    """Expand each slot over its basis with fresh unknown constants."""
    f, slot_terms, consts = {}, {}, []
    for (i, s) in SLOTS:
        pairs = []
        acc = sp.S.Zero
        for k, term in enumerate(basis.slots[(i, s)]):
            c = sp.Symbol(f"c{i}{s}_{k}")
            consts.append(str(c))
            pairs.append((c, term))
            acc += c * term
        f[(i, s)] = acc
        slot_terms[(i, s)] = pairs
    space.constants = tuple(sp.Symbol(c) for c in consts)  # register
    return TwistRelations(f, orientation), slot_terms


def derive_determining_system(F, pair: LaxPair, basis: AnsatzBasis,
                              orientation: str, space: JetSpace) -> DeterminingSystem:
    """Residual coefficients over every monomial in the parametric jets
    (and the spectral parameter, if present) as equations for the ansatz
    constants."""
    for slot, terms in basis.slots.items():
        for t in terms:
            for s in space.jets_in(t):
                if space.jet_var(s).unknown != "u":
                    raise InvalidTwistError(f"basis term {t} depends on {s}")
    twist, slot_terms = ansatz_twist(basis, orientation, space)
    equations = determining_equations_for_twist(F, pair, twist, space)
    unknowns = sorted(set(space.constants), key=str)
    return DeterminingSystem(equations, unknowns, slot_terms, orientation)


def determining_equations_for_twist(F, pair: LaxPair, twist: TwistRelations,
                                    space: JetSpace) -> list:
    """Coefficient of every monomial in the parametric jets (and the
    spectral parameter, if present) across both residuals.  Empty iff the
    twist satisfies both conditions; with an ansatz twist these are the
    determining equations for its constants."""
    relset = build_relations(pair, twist, space)
    sys = full_system(F, relset, space)
    equations, seen = [], set()
    for resid in (compatibility_residual(relset, F, space, sys),
                  symmetry_residual(relset, F, space, sys)):
        if resid == 0:
            continue
        num, _den = normalize(resid).as_numer_denom()
        gens = [s for s in num.free_symbols
                if space.jet_var(s) is not None or s == LAMBDA]
        if not gens:
            gens = [sp.Symbol("_one")]
        for coeff in sp.Poly(num, *sorted(gens, key=str)).coeffs():
            eq = normalize(coeff)
            if eq == 0:
                continue
            key = sp.sstr(eq)
            if key not in seen:
                seen.add(key)
                equations.append(eq)
    return equations


@dataclass
class Solution:
    assignment: dict  # constant -> Expr in parameters
    free: tuple = ()

    def twist_functions(self, ds: DeterminingSystem) -> dict:
        out = {}
        for slot, pairs in ds.slot_terms.items():
            out[slot] = normalize(sum(self.assignment.get(c, sp.S.Zero) * t
                                      for c, t in pairs))
        return out


def solve_determining(ds: DeterminingSystem, branch_bound: int = 64) -> list[Solution]:
    """Exact solving: linear elimination first, then bounded branching on
    factors of the remaining (at most quadratic) equations.

    Every branch that closes yields one Solution; remaining unconstrained
    constants are reported free and set to zero.  Exceeding the branch
    bound raises PartialResultError carrying the solutions found.
    """
    unknowns = list(ds.unknowns)
    solutions, seen = [], set()
    unresolved = []
    budget = [branch_bound]

    def emit(solved: dict):
        assignment = _back_substitute(solved, unknowns)
        free = tuple(c for c in unknowns if c not in assignment)
        for c in free:
            assignment[c] = sp.S.Zero
        assignment = {c: normalize(v.xreplace({f: sp.S.Zero for f in free}))
                      for c, v in assignment.items()}
        key = tuple(sp.sstr(assignment[c]) for c in unknowns)
        if key not in seen:
            seen.add(key)
            solutions.append(Solution(assignment, free))

    def descend(eqs: list, solved: dict):
        eqs = [e for e in (normalize(e) for e in eqs) if e != 0]
        changed = True
        while changed:
            changed = False
            for idx, eq in enumerate(eqs):
                pivot = _linear_pivot(eq, unknowns)
                if pivot is None:
                    continue
                c, val = pivot
                solved = {k: normalize(v.xreplace({c: val})) for k, v in solved.items()}
                solved[c] = val
                sub = {c: val}
                eqs = [e for e in
                       (normalize(sp.sympify(x).xreplace(sub)) for j, x in enumerate(eqs) if j != idx)
                       if e != 0]
                changed = True
                break
        if not eqs:
            emit(solved)
            return
        eq = min(eqs, key=sp.count_ops)
        factors = [f for f, _m in sp.factor_list(eq)[1]
                   if sp.sympify(f).free_symbols & set(unknowns)]
        if not factors:
            return  # inconsistent: constant nonzero equation
        for f in factors:
            if budget[0] <= 0:
                unresolved.append(eqs)
                return
            budget[0] -= 1
            descend([f] + [e for e in eqs if e is not eq], dict(solved))

    descend(list(ds.equations), {})
    if unresolved:
        raise PartialResultError(
            f"branch bound exhausted with {len(unresolved)} unresolved branches",
            solutions, unresolved)
    return solutions


def _linear_pivot(eq, unknowns):
    present = [c for c in unknowns if eq.has(c)]
    for c in present:
        try:
            p = sp.Poly(eq, c)
        except sp.PolynomialError:
            continue
        if p.degree() != 1:
            continue
        a = p.nth(1)
        if a.free_symbols & set(unknowns):
            continue
        if kernel.is_zero(a):
            continue
        return c, normalize(-p.nth(0) / a)
    return None


def _back_substitute(solved: dict, unknowns) -> dict:
    out = dict(solved)
    for _ in range(len(out) + 1):
        changed = False
        for c, v in out.items():
            if v.free_symbols & set(unknowns):
                nv = normalize(v.xreplace(out))
                if nv != v:
                    out[c] = nv
                    changed = True
        if not changed:
            break
    return out


# -- hierarchy ---------------------------------------------------------


@dataclass(frozen=True)
class HierarchyLevel:
    level: int
    relations: RelationSet
    source: str  # label of the seed function
    target: str  # label of the produced function


def hierarchy_relations(pair: LaxPair, k: int, space: JetSpace) -> list[HierarchyLevel]:
    """The k untwisted relation sets chaining psi_0 -> psi_1 -> ... ->
    psi_k; each level is the zero-twist instance with the seed in the U
    role and the image in the Ut role.  No solving is attempted."""
    if k < 1:
        raise ValueError("k must be >= 1")
    base = build_relations(pair, TwistRelations.zero(), space)
    return [HierarchyLevel(j, base, f"psi_{j}", f"psi_{j + 1}") for j in range(k)]
