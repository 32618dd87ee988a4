"""Exact LP feasibility over rationals.

Thin wrapper around the simplex kernel: converts weak linear systems to
standard form (variable splitting, slacks, artificials), runs phase 1,
and optionally decides a single strict inequality through a phase-2
positivity check.

The kernel is selected at import time: the Cython-compiled module when
available, the identical pure-Python source otherwise.  Set
REAXPLAIN_PURE_KERNEL=1 to force the pure kernel (used by the
benchmark).
"""
from __future__ import annotations

import os
from fractions import Fraction
from math import lcm

if os.environ.get("REAXPLAIN_PURE_KERNEL") == "1":
    from . import _simplex_core as _core

    KERNEL = "pure"
else:
    try:
        from . import _simplex_core_c as _core  # type: ignore

        KERNEL = "compiled"
    except ImportError:
        from . import _simplex_core as _core

        KERNEL = "pure"


LE, EQ, GE = "<=", "=", ">="


def _scale_row(coeffs, const):
    """Clear denominators; return (int coeff dict, int const)."""
    denom = const.denominator
    for _, c in coeffs:
        denom = lcm(denom, c.denominator)
    out = {}
    for j, c in coeffs:
        v = int(c * denom)
        if v:
            out[j] = out.get(j, 0) + v
    return out, int(const * denom)


class _Tableau:
    """Standard-form construction shared by feasibility and strict checks."""

    def __init__(self, n_vars, rows):
        # columns: 2j (positive part) and 2j+1 (negative part) per
        # variable, then one slack per inequality, then artificials
        self.n_vars = n_vars
        ineq = sum(1 for _, op, _ in rows if op != EQ)
        self.slack_start = 2 * n_vars
        self.art_start = self.slack_start + ineq

        tab_rows, dens, basis = [], [], []
        art_cols = 0
        slack_idx = 0
        packed = []
        for coeffs, op, const in rows:
            if op not in (LE, EQ, GE):
                raise ValueError(f"weak comparator expected, got {op!r}")
            icoeffs, iconst = _scale_row(list(coeffs), const)
            if op == GE:
                icoeffs = {j: -c for j, c in icoeffs.items()}
                iconst = -iconst
                op = LE
            packed.append((icoeffs, op, iconst))

        # first pass done; now lay out columns (art count known only
        # after sign normalization, so collect rows and assign
        # artificials afterwards)
        pending = []
        for icoeffs, op, iconst in packed:
            cols = {}
            for j, c in icoeffs.items():
                cols[2 * j] = c
                cols[2 * j + 1] = -c
            slack = -1
            if op == LE:
                slack = self.slack_start + slack_idx
                slack_idx += 1
                cols[slack] = 1
            if iconst < 0:
                cols = {j: -c for j, c in cols.items()}
                iconst = -iconst
            pending.append((cols, iconst, slack))

        for cols, iconst, slack in pending:
            if slack >= 0 and cols.get(slack, 0) == 1:
                basic = slack
            else:
                basic = self.art_start + art_cols
                art_cols += 1
                cols[basic] = 1
            tab_rows.append((cols, iconst, basic))

        self.ncols = self.art_start + art_cols
        self.rows = []
        self.dens = []
        self.basis = []
        for cols, iconst, basic in tab_rows:
            row = [0] * (self.ncols + 1)
            for j, c in cols.items():
                row[j] = c
            row[self.ncols] = iconst
            self.rows.append(row)
            self.dens.append(1)
            self.basis.append(basic)

    def run_phase1(self):
        # objective identity for w = sum of artificials: coefficient -1
        # on each artificial column, then fold the initial basis in
        wrow = [0] * (self.ncols + 1)
        wden = 1
        for j in range(self.art_start, self.ncols):
            wrow[j] = -1
        for i, b in enumerate(self.basis):
            if b >= self.art_start:
                row, d = self.rows[i], self.dens[i]
                for j in range(self.ncols + 1):
                    wrow[j] = wrow[j] * d + row[j] * wden
                wden *= d
        box = [wden]
        feasible = _core.phase1(
            self.ncols, self.art_start, self.rows, self.dens, self.basis, wrow, box
        )
        return bool(feasible)

    def basic_point(self):
        vals = {}
        for i, b in enumerate(self.basis):
            vals[b] = Fraction(self.rows[i][self.ncols], self.dens[i])
        out = []
        for j in range(self.n_vars):
            out.append(vals.get(2 * j, Fraction(0)) - vals.get(2 * j + 1, Fraction(0)))
        return out

    def ray_point(self, col, zrow, zden):
        """Point along an unbounded improving ray with objective value > 0."""
        # current value and slope, from the objective identity
        value = Fraction(zrow[self.ncols], zden)
        slope = -Fraction(zrow[col], zden)
        assert slope > 0
        t = (Fraction(1) - value) / slope
        if t < 0:
            t = Fraction(0)
        vals = {col: t}
        for i, b in enumerate(self.basis):
            base = Fraction(self.rows[i][self.ncols], self.dens[i])
            vals[b] = base - Fraction(self.rows[i][col], self.dens[i]) * t
        out = []
        for j in range(self.n_vars):
            out.append(vals.get(2 * j, Fraction(0)) - vals.get(2 * j + 1, Fraction(0)))
        return out


def check(n_vars, rows, strict=None):
    """Decide a conjunction of weak linear constraints exactly.

    rows: iterable of (coeffs, op, const) with coeffs a list of
    (var_index, Fraction), op in {'<=', '=', '>='}.
    strict: optional (coeffs, const) demanding coeffs . x > const on top
    of the weak system.

    Returns (True, point) with an exact rational witness, or
    (False, None).
    """
    tab = _Tableau(n_vars, list(rows))
    if not tab.run_phase1():
        return False, None
    if strict is None:
        return True, tab.basic_point()

    _core.drive_out_artificials(
        tab.ncols, tab.art_start, tab.rows, tab.dens, tab.basis
    )
    coeffs, const = strict
    icoeffs, iconst = _scale_row(list(coeffs), const)
    zrow = [0] * (tab.ncols + 1)
    for j, c in icoeffs.items():
        zrow[2 * j] = -c
        zrow[2 * j + 1] = c
    zrow[tab.ncols] = -iconst
    zden = 1
    # fold the current basis into the objective identity
    for i, b in enumerate(tab.basis):
        if zrow[b]:
            row, d = tab.rows[i], tab.dens[i]
            f = zrow[b]
            for j in range(tab.ncols + 1):
                zrow[j] = zrow[j] * d - f * row[j]
            zden *= d
    box = [zden]
    status, col = _core.maximize_positive(
        tab.ncols, tab.art_start, tab.rows, tab.dens, tab.basis, zrow, box
    )
    if status == 0:
        return False, None
    if status == 1:
        return True, tab.basic_point()
    return True, tab.ray_point(col, zrow, box[0])
