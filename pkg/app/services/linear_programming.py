"""Exact linear programming over the rationals.

A two-phase tableau simplex on ``Fraction`` entries with Bland's pivoting rule, so it
always terminates. Constraints are linear forms ``(coefficients, constant)`` read as
``sum(c * x) + constant`` compared against zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

LinearForm = Tuple[Dict[str, Fraction], Fraction]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LPResult:
    status: str
    value: Optional[Fraction] = None
    point: Dict[str, Fraction] = field(default_factory=dict)


class _Tableau:
    def __init__(self, rows: List[List[Fraction]], rhs: List[Fraction], basis: List[int], width: int):
        self.rows = rows
        self.width = width
        self.rhs = rhs
        self.basis = basis

    def pivot(self, r: int, c: int) -> None:
        row = self.rows[r]
        p = row[c]
        self.rows[r] = [v / p for v in row]
        self.rhs[r] = self.rhs[r] / p
        for i, other in enumerate(self.rows):
            if i == r or other[c] == 0:
                continue
            factor = other[c]
            self.rows[i] = [a - factor * b for a, b in zip(other, self.rows[r])]
            self.rhs[i] = self.rhs[i] - factor * self.rhs[r]
        self.basis[r] = c

    def reduced_costs(self, cost: Sequence[Fraction]) -> List[Fraction]:
        out = list(cost)
        for i, b in enumerate(self.basis):
            cb = cost[b]
            if cb:
                out = [o - cb * a for o, a in zip(out, self.rows[i])]
        return out

    def objective(self, cost: Sequence[Fraction]) -> Fraction:
        return sum((cost[b] * self.rhs[i] for i, b in enumerate(self.basis)), Fraction(0))

    def run(self, cost: Sequence[Fraction], allowed: Sequence[bool]) -> str:
        while True:
            reduced = self.reduced_costs(cost)
            entering = next((j for j in range(self.width) if allowed[j] and reduced[j] < 0), None)
            if entering is None:
                return OPTIMAL
            best = None
            for i, row in enumerate(self.rows):
                if row[entering] > 0:
                    ratio = self.rhs[i] / row[entering]
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return UNBOUNDED
            self.pivot(best[1], entering)


def _variables(forms: Iterable[Dict[str, Fraction]]) -> List[str]:
    names = set()
    for coeffs in forms:
        names.update(coeffs)
    return sorted(names)


def solve_lp(
    objective: Dict[str, Fraction],
    eqs: Sequence[LinearForm] = (),
    les: Sequence[LinearForm] = (),
    *,
    minimize: bool = True,
    nonneg: Iterable[str] = (),
) -> LPResult:
    """Optimize ``objective`` subject to ``form = 0`` for ``eqs`` and ``form <= 0`` for ``les``.

    Variables not listed in ``nonneg`` are free.
    """
    nonneg = set(nonneg)
    names = _variables([objective] + [c for c, _ in eqs] + [c for c, _ in les])
    columns: List[Tuple[str, int]] = []
    for name in names:
        columns.append((name, 1))
        if name not in nonneg:
            columns.append((name, -1))
    n_struct = len(columns)
    n_slack = len(les)
    m = len(eqs) + len(les)

    rows: List[List[Fraction]] = []
    rhs: List[Fraction] = []
    for k, (coeffs, constant) in enumerate(list(eqs) + list(les)):
        row = [Fraction(coeffs.get(name, 0)) * sign for name, sign in columns]
        slack = [Fraction(0)] * n_slack
        if k >= len(eqs):
            slack[k - len(eqs)] = Fraction(1)
        row += slack
        b = -Fraction(constant)
        if b < 0:
            row = [-v for v in row]
            b = -b
        rows.append(row)
        rhs.append(b)

    width = n_struct + n_slack
    for i, row in enumerate(rows):
        row.extend(Fraction(1) if j == i else Fraction(0) for j in range(m))
    tableau = _Tableau(rows, rhs, [width + i for i in range(m)], width + m)

    phase1 = [Fraction(0)] * width + [Fraction(1)] * m
    tableau.run(phase1, [True] * (width + m))
    if tableau.objective(phase1) > 0:
        return LPResult(INFEASIBLE)

    # drive artificial variables out of the basis, dropping redundant rows
    i = 0
    while i < len(tableau.rows):
        if tableau.basis[i] >= width:
            col = next((j for j in range(width) if tableau.rows[i][j] != 0), None)
            if col is None:
                del tableau.rows[i], tableau.rhs[i], tableau.basis[i]
                continue
            tableau.pivot(i, col)
        i += 1

    sign = Fraction(1) if minimize else Fraction(-1)
    cost = [sign * Fraction(objective.get(name, 0)) * s for name, s in columns]
    cost += [Fraction(0)] * (n_slack + m)
    allowed = [True] * width + [False] * m
    if tableau.run(cost, allowed) == UNBOUNDED:
        return LPResult(UNBOUNDED)

    values = [Fraction(0)] * (width + m)
    for i, b in enumerate(tableau.basis):
        values[b] = tableau.rhs[i]
    point = {name: Fraction(0) for name in names}
    for j, (name, s) in enumerate(columns):
        point[name] += s * values[j]
    value = sum((Fraction(objective.get(n, 0)) * v for n, v in point.items()), Fraction(0))
    return LPResult(OPTIMAL, value, point)


def feasible_point(
    eqs: Sequence[LinearForm] = (),
    les: Sequence[LinearForm] = (),
    lts: Sequence[LinearForm] = (),
) -> Optional[Dict[str, Fraction]]:
    """A rational point satisfying ``= 0``, ``<= 0`` and strict ``< 0`` constraints, or None."""
    if not lts:
        result = solve_lp({}, eqs, les)
        return result.point if result.status == OPTIMAL else None
    slack = "__slack"
    names = _variables([c for c, _ in list(eqs) + list(les) + list(lts)])
    while slack in names:
        slack += "_"
    strict = [({**coeffs, slack: Fraction(1)}, constant) for coeffs, constant in lts]
    cap = ({slack: Fraction(1)}, Fraction(-1))
    result = solve_lp({slack: Fraction(1)}, eqs, list(les) + strict + [cap], minimize=False)
    if result.status != OPTIMAL or result.value <= 0:
        return None
    point = dict(result.point)
    point.pop(slack, None)
    return point


def evaluate_form(point: Dict[str, Fraction], form: LinearForm) -> Fraction:
    """Value of a linear form at ``point``; missing variables count as zero."""
    coeffs, constant = form
    return sum((Fraction(c) * point.get(n, Fraction(0)) for n, c in coeffs.items()), Fraction(constant))
