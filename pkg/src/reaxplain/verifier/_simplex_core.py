"""Exact rational simplex kernel (phase 1 feasibility + positivity check).

This module is deliberately plain Python: it is compiled as-is with
Cython into ``_simplex_core_c`` when the extension builds, and imported
directly otherwise.  Keep it free of imports beyond ``math.gcd`` and
free of Python features Cython cannot compile.

Tableau representation: ``rows[i]`` is a list of ints of length
``ncols + 1`` (last slot is the right-hand side) and ``dens[i]`` is a
positive int, so the exact entry is ``rows[i][j] / dens[i]``.  Pivoting
is integer-only; every row is gcd-reduced after each operation to keep
the numbers small.

Objective rows use the same layout and encode the identity
``value = rhs_slot - sum(coef[j] * x[j])`` which is preserved by the
uniform row update.  For phase 1 the value is the sum of artificial
variables; entering columns are those with a positive coefficient.
Bland's rule (lowest eligible column; ties on the leaving row by lowest
basic variable) guarantees termination.
"""

from math import gcd


def _reduce(nums, den, width):
    """Divide a row by the gcd of all entries; return the new denominator."""
    g = den
    i = 0
    while i <= width and g != 1:
        v = nums[i]
        if v:
            g = gcd(g, v)
        i += 1
    if g > 1:
        i = 0
        while i <= width:
            nums[i] //= g
            i += 1
        den //= g
    return den


def _apply_pivot(rows, dens, objs, objdens, r, c, ncols):
    """Gauss-Jordan pivot on (r, c); keeps all denominators positive."""
    prow = rows[r]
    piv = prow[c]
    nrows = len(rows)
    i = 0
    while i < nrows:
        if i != r:
            row = rows[i]
            f = row[c]
            if f:
                j = 0
                while j <= ncols:
                    row[j] = row[j] * piv - f * prow[j]
                    j += 1
                d = dens[i] * piv
                if d < 0:
                    d = -d
                    j = 0
                    while j <= ncols:
                        row[j] = -row[j]
                        j += 1
                dens[i] = _reduce(row, d, ncols)
        i += 1
    i = 0
    while i < len(objs):
        row = objs[i]
        f = row[c]
        if f:
            j = 0
            while j <= ncols:
                row[j] = row[j] * piv - f * prow[j]
                j += 1
            d = objdens[i] * piv
            if d < 0:
                d = -d
                j = 0
                while j <= ncols:
                    row[j] = -row[j]
                    j += 1
            objdens[i] = _reduce(row, d, ncols)
        i += 1
    # the pivot row itself: entry at c becomes 1
    d = piv
    if d < 0:
        d = -d
        j = 0
        while j <= ncols:
            prow[j] = -prow[j]
            j += 1
    dens[r] = _reduce(prow, d, ncols)


def _choose_leaving(rows, basis, c, ncols):
    """Min-ratio row for entering column c; -1 if the column is
    nonpositive everywhere.  Ties break toward the lowest basic
    variable (Bland)."""
    best = -1
    bn = 0
    bd = 0
    i = 0
    nrows = len(rows)
    while i < nrows:
        a = rows[i][c]
        if a > 0:
            rn = rows[i][ncols]
            # ratio rn/a ; denominators of the row cancel
            if best < 0:
                best, bn, bd = i, rn, a
            else:
                lhs = rn * bd
                rhs = bn * a
                if lhs < rhs or (lhs == rhs and basis[i] < basis[best]):
                    best, bn, bd = i, rn, a
        i += 1
    return best


def phase1(ncols, art_start, rows, dens, basis, wrow, wden_box):
    """Minimize the artificial sum; return 1 if it reaches exactly 0.

    All structures are mutated in place.  ``wrow``/``wden_box[0]`` hold
    the phase-1 objective in the identity form described above; columns
    at or beyond ``art_start`` are artificial and never re-enter.
    """
    while True:
        c = -1
        j = 0
        while j < art_start:
            if wrow[j] > 0:
                c = j
                break
            j += 1
        if c < 0:
            return 1 if wrow[ncols] == 0 else 0
        r = _choose_leaving(rows, basis, c, ncols)
        if r < 0:
            # w is bounded below by 0, so an unbounded improving ray
            # cannot exist on consistent input
            raise AssertionError("phase 1 found an unbounded direction")
        _apply_pivot(rows, dens, [wrow], wden_box, r, c, ncols)
        basis[r] = c


def drive_out_artificials(ncols, art_start, rows, dens, basis):
    """After a feasible phase 1, pivot artificial variables out of the
    basis; drop rows that turn out redundant.  Returns the surviving
    row count."""
    i = 0
    while i < len(rows):
        if basis[i] >= art_start:
            row = rows[i]
            c = -1
            j = 0
            while j < art_start:
                if row[j]:
                    c = j
                    break
                j += 1
            if c < 0:
                del rows[i]
                del dens[i]
                del basis[i]
                continue
            _apply_pivot(rows, dens, [], [], i, c, ncols)
            basis[i] = c
        i += 1
    return len(rows)


def maximize_positive(ncols, art_start, rows, dens, basis, zrow, zden_box):
    """Maximize the objective encoded in ``zrow`` over the current
    feasible tableau, stopping as soon as its value is positive.

    Returns (status, col): status 1 when a basic point with value > 0
    was reached, 2 when an unbounded improving direction on column
    ``col`` proves positivity, 0 when the maximum is <= 0.
    """
    while True:
        if zrow[ncols] > 0:
            return 1, -1
        c = -1
        j = 0
        while j < art_start:
            if zrow[j] < 0:
                c = j
                break
            j += 1
        if c < 0:
            return 0, -1
        r = _choose_leaving(rows, basis, c, ncols)
        if r < 0:
            return 2, c
        _apply_pivot(rows, dens, [zrow], zden_box, r, c, ncols)
        basis[r] = c
