"""Complete decision procedure for queries.

Search structure: first commit to one branch per disjunction group
(depth-first, declaration order), which fixes the active atom set and
the network copies that matter.  Then either

* enumerate exhaustively, when every constrained non-output variable
  has a finite domain and the candidate product stays under
  ``enum_limit``; or
* run DPLL-style splitting on membership atoms and ReLU phases, with an
  exact rational LP deciding feasibility of each node's relaxation.

Every SAT answer carries a witness that is re-checked, exactly, against
all atoms, domains, groups and network semantics before being returned.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from ..model import (
    FeatureDomain,
    LinearAtom,
    MembershipAtom,
    Verdict,
    forward,
)
from . import lp
from .query import Query, QueryError


@dataclass
class SolveStats:
    lp_calls: int = 0
    relu_splits: int = 0
    member_branches: int = 0
    group_branches: int = 0
    enum_nodes: int = 0
    wall: float = 0.0
    mode: str = ""

    def to_dict(self):
        return {
            "lp_calls": self.lp_calls,
            "relu_splits": self.relu_splits,
            "member_branches": self.member_branches,
            "group_branches": self.group_branches,
            "enum_nodes": self.enum_nodes,
            "wall": self.wall,
            "mode": self.mode,
        }


class SolveTimeout(Exception):
    """Budget exhausted; distinct from SAT/UNSAT."""

    def __init__(self, stats: SolveStats):
        super().__init__("solve budget exhausted")
        self.stats = stats


@dataclass
class Budget:
    max_seconds: Optional[float] = None
    max_splits: Optional[int] = None


class SoundnessError(AssertionError):
    """A produced witness failed its exact re-check (internal bug)."""


def solve(query: Query, enum_limit: int = 4096, budget: Optional[Budget] = None):
    """Decide the query; returns (Verdict, SolveStats).

    Complete when the budget is unlimited; a budget overrun raises
    SolveTimeout.
    """
    solver = _Solver(query, enum_limit, budget)
    return solver.run()


class _Solver:
    def __init__(self, query, enum_limit, budget):
        query.validate()
        self.q = query
        self.enum_limit = enum_limit
        self.budget = budget
        self.stats = SolveStats()
        self.t0 = time.monotonic()
        self.var_order = list(query.variables)
        self.out_to_copy = {}
        for ci, copy in enumerate(query.net_copies):
            for name in copy.outputs:
                if name in self.out_to_copy:
                    raise QueryError(f"output variable {name!r} written twice")
                self.out_to_copy[name] = ci
        self._fwd_cache = {}

    # -- plumbing ------------------------------------------------------------

    def _tick(self, splits=0):
        if self.budget is None:
            return
        if (
            self.budget.max_seconds is not None
            and time.monotonic() - self.t0 > self.budget.max_seconds
        ):
            self.stats.wall = time.monotonic() - self.t0
            raise SolveTimeout(self.stats)
        if self.budget.max_splits is not None:
            total = (
                self.stats.relu_splits
                + self.stats.member_branches
                + self.stats.group_branches
            )
            if total > self.budget.max_splits:
                self.stats.wall = time.monotonic() - self.t0
                raise SolveTimeout(self.stats)

    def _forward(self, net, ins):
        key = (id(net), ins)
        out = self._fwd_cache.get(key)
        if out is None:
            out = forward(net, ins)
            self._fwd_cache[key] = out
        return out

    def run(self):
        verdict = self._choose_group(0, [])
        self.stats.wall = time.monotonic() - self.t0
        return verdict, self.stats

    def _choose_group(self, gi, chosen):
        if gi == len(self.q.groups):
            return self._attack(chosen)
        for branch in self.q.groups[gi]:
            self.stats.group_branches += 1
            self._tick()
            verdict = self._choose_group(gi + 1, chosen + list(branch))
            if verdict.is_sat:
                return verdict
        return Verdict("UNSAT")

    # -- one conjunction (all groups committed) -------------------------------

    def _attack(self, extra):
        atoms = list(self.q.atoms) + list(extra)
        support = []
        seen = set()
        relevant = set()
        for atom in atoms:
            for v in atom.variables:
                if v in self.out_to_copy:
                    relevant.add(self.out_to_copy[v])
                elif v not in seen:
                    seen.add(v)
                    support.append(v)
        for ci in sorted(relevant):
            for v in self.q.net_copies[ci].inputs:
                if v not in seen:
                    seen.add(v)
                    support.append(v)
        support.sort(key=self.var_order.index)
        relevant = sorted(relevant)

        strict = [a for a in atoms if isinstance(a, LinearAtom) and a.op in ("<", ">")]
        weak = [a for a in atoms if a not in strict]
        if len(strict) > 1:
            raise QueryError("at most one strict atom per conjunction is supported")

        plan = self._enum_plan(support, atoms)
        if plan is not None:
            self.stats.mode = "enum" if self.stats.mode in ("", "enum") else "mixed"
            return self._enumerate(plan, support, atoms, relevant)
        self.stats.mode = "lp" if self.stats.mode in ("", "lp") else "mixed"
        return self._dpll(weak, strict[0] if strict else None, support, relevant)

    # -- exhaustive enumeration ------------------------------------------------

    def _enum_plan(self, support, atoms):
        """Candidate lists per support var, or None when not enumerable."""
        pins = {}
        for atom in atoms:
            if (
                isinstance(atom, LinearAtom)
                and atom.op == "="
                and len(atom.coeffs) == 1
            ):
                v, c = atom.coeffs[0]
                if v not in self.out_to_copy:
                    val = atom.const / c
                    if v in pins and pins[v] != val:
                        return {s: [] for s in support} if support else {}
                    pins[v] = val
        plan = {}
        product = 1
        for v in support:
            dom = self.q.variables[v]
            if v in pins:
                if dom is not None and not dom.contains(pins[v]):
                    plan[v] = []
                    continue
                plan[v] = [pins[v]]
                continue
            if dom is None or not dom.is_finite:
                return None
            plan[v] = list(dom.values)
            product *= len(plan[v])
            if product > self.enum_limit:
                return None
        return plan

    def _enumerate(self, plan, support, atoms, relevant):
        order = support
        pos = {v: i for i, v in enumerate(order)}
        n = len(order)

        # when is each copy's input block complete / each atom checkable
        copy_ready = {}
        for ci in relevant:
            copy = self.q.net_copies[ci]
            copy_ready[ci] = max((pos[v] for v in copy.inputs), default=-1)
        out_ready = {}
        for ci in relevant:
            for name in self.q.net_copies[ci].outputs:
                out_ready[name] = copy_ready[ci]
        copies_at = {}
        for ci, p in copy_ready.items():
            copies_at.setdefault(p, []).append(ci)

        atoms_at = {}
        for atom in atoms:
            ready = -1
            for v in atom.variables:
                ready = max(ready, out_ready[v] if v in out_ready else pos[v])
            atoms_at.setdefault(ready, []).append(atom)

        assign = {}

        def fire(p):
            """Returns False if some newly-decidable constraint fails."""
            for ci in copies_at.get(p, ()):
                copy = self.q.net_copies[ci]
                outs = self._forward(copy.net, tuple(assign[v] for v in copy.inputs))
                for name, val in zip(copy.outputs, outs):
                    assign[name] = val
            for atom in atoms_at.get(p, ()):
                if not atom.holds(assign):
                    return False
            return True

        def rec(p):
            self.stats.enum_nodes += 1
            if self.stats.enum_nodes % 4096 == 0:
                self._tick()
            if p == n:
                return True
            for val in plan[order[p]]:
                assign[order[p]] = val
                if fire(p) and rec(p + 1):
                    return True
            assign.pop(order[p], None)
            return False

        # constant atoms (ready == -1) decided up front
        for atom in atoms_at.get(-1, ()):
            if not atom.holds({}):
                return Verdict("UNSAT")
        if n == 0:
            return self._finish(dict(assign), atoms)
        if rec(0):
            return self._finish(dict(assign), atoms)
        return Verdict("UNSAT")

    # -- LP-backed search -------------------------------------------------------

    def _dpll(self, weak_atoms, strict_atom, support, relevant):
        lpvars = {}

        def col(key):
            if key not in lpvars:
                lpvars[key] = len(lpvars)
            return lpvars[key]

        for v in support:
            col(v)

        base_rows = []
        linear_atoms = []
        memberships = []
        for atom in weak_atoms:
            if isinstance(atom, MembershipAtom):
                memberships.append(atom)
                form = [(col(v), c) for v, c in atom.coeffs]
                base_rows.append((form, ">=", atom.values[0]))
                base_rows.append((form, "<=", atom.values[-1]))
            else:
                linear_atoms.append(atom)
                base_rows.append(
                    ([(col(v), c) for v, c in atom.coeffs], atom.op, atom.const)
                )

        # initial interval bounds: domain hulls sharpened by single-var atoms
        bounds0 = {}
        for v in support:
            dom = self.q.variables[v]
            if dom is None:
                bounds0[col(v)] = (None, None)
                continue
            lo, hi = dom.hull()
            bounds0[col(v)] = (lo, hi)
            base_rows.append(([(col(v), Fraction(1))], ">=", lo))
            base_rows.append(([(col(v), Fraction(1))], "<=", hi))
            if dom.is_finite and len(dom.values) > 1:
                memberships.append(MembershipAtom({v: Fraction(1)}, dom.values))
        for atom in linear_atoms:
            if len(atom.coeffs) != 1:
                continue
            v, c = atom.coeffs[0]
            x = atom.const / c
            op = atom.op if c > 0 else {"<=": ">=", ">=": "<=", "=": "="}[atom.op]
            lo, hi = bounds0.get(col(v), (None, None))
            if op in ("=", ">="):
                lo = x if lo is None else max(lo, x)
            if op in ("=", "<="):
                hi = x if hi is None else min(hi, x)
            bounds0[col(v)] = (lo, hi)

        # network copies: affine equalities plus a ReLU list to split on
        relus = []  # (ci, layer, unit, z_col, h_col)
        copy_layers = []  # (prev_cols, layer, unit_cols) for propagation
        for ci in relevant:
            copy = self.q.net_copies[ci]
            prev = [col(v) for v in copy.inputs]
            for li, layer in enumerate(copy.net.layers):
                last = li == len(copy.net.layers) - 1
                cur = []
                units = []
                for u in range(layer.out_width):
                    zc = col(copy.outputs[u]) if last else col((ci, li, u, "z"))
                    coeffs = [(zc, Fraction(-1))]
                    coeffs += [(p, w) for p, w in zip(prev, layer.weights[u]) if w]
                    base_rows.append((coeffs, "=", -layer.bias[u]))
                    if layer.relu:
                        hc = col((ci, li, u, "h"))
                        relus.append((ci, li, u, zc, hc))
                        cur.append(hc)
                        units.append((zc, hc))
                    else:
                        cur.append(zc)
                        units.append((zc, None))
                copy_layers.append((list(prev), layer, units))
                prev = cur

        member_order = sorted(
            range(len(memberships)), key=lambda i: (len(memberships[i].values), i)
        )
        strict_form = None
        if strict_atom is not None:
            coeffs = [(col(v), c) for v, c in strict_atom.coeffs]
            if strict_atom.op == ">":
                strict_form = (coeffs, strict_atom.const)
            else:
                strict_form = ([(j, -c) for j, c in coeffs], -strict_atom.const)

        nlp = len(lpvars)
        member_fix = {}
        relu_fix = {}
        ZERO = Fraction(0)

        def propagate():
            """Exact interval bounds per LP column under current pins;
            returns (bounds, forced relu phases) or None when the pins
            alone are contradictory."""
            b = dict(bounds0)
            for mi, val in member_fix.items():
                atom = memberships[mi]
                if len(atom.coeffs) != 1:
                    continue
                v, c = atom.coeffs[0]
                x = val / c
                lo, hi = b.get(col(v), (None, None))
                lo = x if lo is None else max(lo, x)
                hi = x if hi is None else min(hi, x)
                b[col(v)] = (lo, hi)
            for lo, hi in b.values():
                if lo is not None and hi is not None and lo > hi:
                    return None
            forced = {}
            for (prev, layer, units) in copy_layers:
                for u, (zc, hc) in enumerate(units):
                    zlo = zhi = layer.bias[u]
                    for p, w in zip(prev, layer.weights[u]):
                        if not w:
                            continue
                        plo, phi = b[p]
                        a = w * plo if plo is not None else None
                        c = w * phi if phi is not None else None
                        if w < 0:
                            a, c = c, a
                        zlo = None if (zlo is None or a is None) else zlo + a
                        zhi = None if (zhi is None or c is None) else zhi + c
                    b[zc] = (zlo, zhi)
                    if hc is not None:
                        if zlo is not None and zlo >= 0:
                            forced[zc] = "active"
                            b[hc] = (zlo, zhi)
                        elif zhi is not None and zhi <= 0:
                            forced[zc] = "inactive"
                            b[hc] = (ZERO, ZERO)
                        else:
                            b[hc] = (
                                ZERO if zlo is None else max(ZERO, zlo),
                                None if zhi is None else max(ZERO, zhi),
                            )
            return b, forced

        def form_bounds(b, col_coeffs):
            lo = hi = Fraction(0)
            for j, c in col_coeffs:
                vlo, vhi = b[j]
                a = c * vlo if vlo is not None else None
                d = c * vhi if vhi is not None else None
                if c < 0:
                    a, d = d, a
                lo = None if (lo is None or a is None) else lo + a
                hi = None if (hi is None or d is None) else hi + d
            return lo, hi

        def bound_refutes(b):
            for atom in linear_atoms:
                lo, hi = form_bounds(b, [(col(v), c) for v, c in atom.coeffs])
                if atom.op in ("<=", "=") and lo is not None and lo > atom.const:
                    return True
                if atom.op in (">=", "=") and hi is not None and hi < atom.const:
                    return True
            for mi, atom in enumerate(memberships):
                if mi in member_fix:
                    continue
                lo, hi = form_bounds(b, [(col(v), c) for v, c in atom.coeffs])
                if not any(
                    (lo is None or lo <= val) and (hi is None or val <= hi)
                    for val in atom.values
                ):
                    return True
            if strict_form is not None:
                _, hi = form_bounds(b, strict_form[0])
                if hi is not None and hi <= strict_form[1]:
                    return True
            return False

        def rows_now(b, forced):
            rows = list(base_rows)
            for mi, val in member_fix.items():
                atom = memberships[mi]
                rows.append(([(col(v), c) for v, c in atom.coeffs], "=", val))
            for (ci, li, u, zc, hc) in relus:
                state = relu_fix.get((ci, li, u)) or forced.get(zc)
                if state == "active":
                    rows.append(
                        ([(hc, Fraction(1)), (zc, Fraction(-1))], "=", ZERO)
                    )
                    rows.append(([(zc, Fraction(1))], ">=", ZERO))
                elif state == "inactive":
                    rows.append(([(hc, Fraction(1))], "=", ZERO))
                    rows.append(([(zc, Fraction(1))], "<=", ZERO))
                else:
                    rows.append(([(hc, Fraction(1))], ">=", ZERO))
                    rows.append(
                        ([(hc, Fraction(1)), (zc, Fraction(-1))], ">=", ZERO)
                    )
                    zlo, zhi = b[zc]
                    if zhi is not None:
                        rows.append(([(hc, Fraction(1))], "<=", max(ZERO, zhi)))
                        if zlo is not None and zlo < 0 < zhi:
                            # chord of the ReLU graph over [zlo, zhi]
                            rows.append(
                                (
                                    [(hc, zhi - zlo), (zc, -zhi)],
                                    "<=",
                                    -zhi * zlo,
                                )
                            )
            return rows

        def search():
            self._tick()
            prop = propagate()
            if prop is None:
                return None
            b, forced = prop
            if bound_refutes(b):
                return None
            self.stats.lp_calls += 1
            ok, pt = lp.check(nlp, rows_now(b, forced), strict=strict_form)
            if not ok:
                return None
            for mi in member_order:
                if mi in member_fix:
                    continue
                atom = memberships[mi]
                got = sum(c * pt[col(v)] for v, c in atom.coeffs)
                if got not in atom.values:
                    for val in atom.values:
                        self.stats.member_branches += 1
                        member_fix[mi] = val
                        res = search()
                        if res is not None:
                            return res
                    del member_fix[mi]
                    return None
            for (ci, li, u, zc, hc) in relus:
                if (ci, li, u) in relu_fix or zc in forced:
                    continue
                z, h = pt[zc], pt[hc]
                if h == (z if z > 0 else ZERO):
                    continue
                self.stats.relu_splits += 1
                for state in ("active", "inactive"):
                    relu_fix[(ci, li, u)] = state
                    res = search()
                    if res is not None:
                        return res
                del relu_fix[(ci, li, u)]
                return None
            return pt

        pt = search()
        if pt is None:
            return Verdict("UNSAT")
        assign = {}
        for v in support:
            assign[v] = pt[lpvars[v]]
        for ci in relevant:
            copy = self.q.net_copies[ci]
            for name in copy.outputs:
                assign[name] = pt[lpvars[name]]
        all_atoms = weak_atoms + ([strict_atom] if strict_atom else [])
        return self._finish(assign, all_atoms)

    # -- witness completion and exact re-check ----------------------------------

    def _finish(self, assign, active_atoms):
        witness = dict(assign)
        for v, dom in self.q.variables.items():
            if v in witness or v in self.out_to_copy:
                continue
            if v in self.q.defaults:
                witness[v] = self.q.defaults[v]
            elif dom is not None:
                witness[v] = dom.values[0] if dom.is_finite else dom.lo
            else:
                witness[v] = Fraction(0)
        for copy in self.q.net_copies:
            ins = tuple(witness[v] for v in copy.inputs)
            outs = self._forward(copy.net, ins)
            for name, val in zip(copy.outputs, outs):
                if name in witness and witness[name] != val:
                    raise SoundnessError(
                        f"copy {copy.tag or '<net>'} output {name} disagrees "
                        f"with exact forward evaluation"
                    )
                witness[name] = val
        self._check_witness(witness, active_atoms)
        return Verdict("SAT", witness)

    def _check_witness(self, witness, active_atoms):
        for v, dom in self.q.variables.items():
            if dom is not None and not dom.contains(witness[v]):
                raise SoundnessError(f"witness leaves the domain of {v}")
        for atom in list(self.q.atoms) + list(active_atoms):
            if not atom.holds(witness):
                raise SoundnessError(f"witness violates {atom.describe()}")
        for gi, group in enumerate(self.q.groups):
            if not any(
                all(a.holds(witness) for a in branch) for branch in group
            ):
                raise SoundnessError(f"witness satisfies no branch of group {gi}")
