"""Explanation engines: the four computation strategies, reverse
incremental enumeration of contrastive examples, and an exact minimum
hitting set solver.

Strategy tags used in results and the CLI:

* ``unrolled``     one query per candidate over all k chained copies
* ``per-step``     independent single-step explanations, concatenated
                   (sound, but with no minimality guarantee)
* ``incremental``  step-by-step prefix checks, one network copy per query
* ``cxp-mhs``      reverse enumeration of minimal contrastive examples,
                   then a minimum hitting set

Candidate subsets are always enumerated by ascending cardinality and
lexicographically within a cardinality, so "first found" is
deterministic and superset skipping is sound when collecting minimal
contrastive examples.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .model import Execution, ModelError, Network, ReactiveSystem, StepMask
from .queries import (
    contrastive_query_multi,
    contrastive_query_single,
    contrastive_query_window,
    explanation_query_multi,
    explanation_query_prefix,
    explanation_query_single,
)
from .verifier import Budget, SolveTimeout, block_var, solve


# ---------------------------------------------------------------------------
# dispatch plumbing


class Engine:
    """Query dispatcher: budgets, counters, and the structural
    network-copy assertion on every dispatched query."""

    def __init__(
        self,
        strict_flip: bool = False,
        enum_limit: int = 4096,
        per_query_seconds: Optional[float] = 60.0,
    ):
        self.strict_flip = strict_flip
        self.enum_limit = enum_limit
        self.per_query_seconds = per_query_seconds
        self.queries = 0
        self.copy_log = []  # (query tag, number of network copies)

    def is_sat(self, query):
        if query.expected_copies is None:
            raise ModelError(f"query {query.tag!r} does not declare its copy count")
        if len(query.net_copies) != query.expected_copies:
            raise ModelError(
                f"query {query.tag!r} carries {len(query.net_copies)} copies, "
                f"expected {query.expected_copies}"
            )
        self.copy_log.append((query.tag, len(query.net_copies)))
        self.queries += 1
        budget = (
            Budget(max_seconds=self.per_query_seconds)
            if self.per_query_seconds
            else None
        )
        verdict, _ = solve(query, enum_limit=self.enum_limit, budget=budget)
        return verdict


@dataclass
class ExplainResult:
    mask: StepMask
    guarantee: str  # "Minimal" | "Minimum" | "None"
    method: str
    queries: int
    wall: float
    solved: bool = True

    @property
    def size(self) -> int:
        return self.mask.size

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "guarantee": self.guarantee,
            "solved": self.solved,
            "size": self.size,
            "mask": [sorted(s) for s in self.mask.sets],
            "queries": self.queries,
            "wall_seconds": self.wall,
        }


class CxpCatalog:
    """Antichain of minimal multi-step contrastive masks."""

    def __init__(self, k: int):
        self.k = k
        self.members: list = []

    def covered(self, mask: StepMask) -> bool:
        """True when the mask stepwise-contains a known member (so any
        completion of it cannot be minimal)."""
        return any(mask.contains(c) for c in self.members)

    def add(self, mask: StepMask) -> bool:
        mask = StepMask(mask.sets, "Contrastive")
        if self.covered(mask):
            return False
        self.members = [c for c in self.members if not c.contains(mask)]
        self.members.append(mask)
        return True

    def __len__(self):
        return len(self.members)

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "cxps": [[sorted(s) for s in c.sets] for c in self.members],
        }


def _subsets(features, skip_empty=False):
    """Subsets by ascending cardinality, lexicographic within."""
    feats = sorted(features)
    for size in range(0 if not skip_empty else 1, len(feats) + 1):
        yield from (frozenset(c) for c in itertools.combinations(feats, size))


def _pad(window_sets, j: int, k: int) -> StepMask:
    """Zero-pad window sets covering steps j..j+len-1 (1-based) to k."""
    sets = [frozenset()] * (j - 1) + [frozenset(s) for s in window_sets]
    sets += [frozenset()] * (k - len(sets))
    return StepMask(tuple(sets), "Contrastive")


# ---------------------------------------------------------------------------
# single-instance ("one-shot") explanation algorithms


def greedy_minimal_single(net, domains, v, c, engine: Engine) -> frozenset:
    """Greedy deletion sweep: drop a feature whenever the remaining
    pins still force class c."""
    keep = set(range(net.input_width))
    for f in range(net.input_width):
        cand = keep - {f}
        verdict = engine.is_sat(
            explanation_query_single(net, domains, v, c, cand, engine.strict_flip)
        )
        if not verdict.is_sat:
            keep = cand
    return frozenset(keep)


def _shrink_single_cxp(net, domains, v, c, diff, engine) -> frozenset:
    cxp = set(diff)
    for f in sorted(diff):
        cand = cxp - {f}
        if not cand:
            break
        verdict = engine.is_sat(
            contrastive_query_single(net, domains, v, c, cand, engine.strict_flip)
        )
        if verdict.is_sat:
            cxp = cand
    return frozenset(cxp)


def minimum_single(net, domains, v, c, engine: Engine) -> frozenset:
    """Minimum explanation via the implicit hitting set loop: propose
    the minimum hitting set of the contrastive examples found so far,
    and grow the family from counterexample witnesses until the
    proposal verifies."""
    family: list = []
    m = net.input_width
    while True:
        h = minimum_hitting_set(family, universe=range(m))
        verdict = engine.is_sat(
            explanation_query_single(net, domains, v, c, h, engine.strict_flip)
        )
        if not verdict.is_sat:
            return frozenset(h)
        w = verdict.witness
        diff = {j for j in range(m) if w[block_var(1, j)] != v[j]}
        family.append(_shrink_single_cxp(net, domains, v, c, diff, engine))


# ---------------------------------------------------------------------------
# multi-step strategies


def _multi_is_explanation(sys, net, exec_, mask, engine) -> bool:
    verdict = engine.is_sat(
        explanation_query_multi(sys, net, exec_, mask, engine.strict_flip)
    )
    return not verdict.is_sat


def _witness_diff_mask(sys, exec_, witness) -> StepMask:
    sets = []
    for i in range(exec_.k):
        sets.append(
            frozenset(
                j
                for j in range(sys.m)
                if witness[block_var(i + 1, j)] != exec_.states[i][j]
            )
        )
    return StepMask(tuple(sets), "Contrastive")


def _shrink_multi_cxp(sys, net, exec_, mask, engine) -> StepMask:
    pairs = list(mask.pairs())
    cur = set(pairs)
    for p in pairs:
        cand = cur - {p}
        if not cand:
            break
        cand_mask = StepMask.from_pairs(cand, exec_.k, "Contrastive")
        verdict = engine.is_sat(
            contrastive_query_multi(sys, net, exec_, cand_mask, engine.strict_flip)
        )
        if verdict.is_sat:
            cur = cand
    return StepMask.from_pairs(cur, exec_.k, "Contrastive")


def explain_unrolled(sys, net, exec_, target="Minimal", engine=None):
    """Whole-execution k-copy queries; greedy deletion for a minimal
    explanation or the implicit hitting set loop for a minimum one."""
    engine = engine or Engine()
    t0 = time.monotonic()
    if target == "Minimal":
        mask = StepMask.full(exec_.k, sys.m)
        for i in range(exec_.k):
            for f in range(sys.m):
                cand = mask.with_step(i, mask.sets[i] - {f})
                if _multi_is_explanation(sys, net, exec_, cand, engine):
                    mask = cand
        guarantee = "Minimal"
    elif target == "Minimum":
        catalog = CxpCatalog(exec_.k)
        while True:
            pairs = minimum_hitting_set(
                [set(c.pairs()) for c in catalog.members],
                universe=[(i, f) for i in range(exec_.k) for f in range(sys.m)],
            )
            mask = StepMask.from_pairs(pairs, exec_.k)
            verdict = engine.is_sat(
                explanation_query_multi(sys, net, exec_, mask, engine.strict_flip)
            )
            if not verdict.is_sat:
                break
            diff = _witness_diff_mask(sys, exec_, verdict.witness)
            catalog.add(_shrink_multi_cxp(sys, net, exec_, diff, engine))
        guarantee = "Minimum"
    else:
        raise ModelError(f"unknown target {target!r}")
    return ExplainResult(
        mask, guarantee, f"unrolled-{target.lower()}", engine.queries,
        time.monotonic() - t0,
    )


def explain_per_step(sys, net, exec_, target="Minimal", engine=None):
    """Explain every step in isolation and concatenate.  Sound (fixing
    each step's pins forces its action outright) but carries no
    minimality guarantee."""
    engine = engine or Engine()
    t0 = time.monotonic()
    sets = []
    for i in range(exec_.k):
        v, c = exec_.states[i], exec_.actions[i]
        if target == "Minimal":
            sets.append(greedy_minimal_single(net, sys.domains, v, c, engine))
        elif target == "Minimum":
            sets.append(minimum_single(net, sys.domains, v, c, engine))
        else:
            raise ModelError(f"unknown target {target!r}")
    return ExplainResult(
        StepMask(tuple(sets)), "None", f"per-step-{target.lower()}",
        engine.queries, time.monotonic() - t0,
    )


def explain_incremental(sys, net, exec_, engine=None):
    """Minimal explanation by per-step greedy deletion over prefix
    queries (a single network copy each): when the suffix is fully
    pinned, forcing a_i with the prefix pins is equivalent to the full
    check."""
    engine = engine or Engine()
    t0 = time.monotonic()
    sets = [set(range(sys.m)) for _ in range(exec_.k)]
    for i in range(exec_.k):
        for f in range(sys.m):
            cand = sets[i] - {f}
            prefix = [frozenset(s) for s in sets[:i]] + [frozenset(cand)]
            verdict = engine.is_sat(
                explanation_query_prefix(
                    sys, net, exec_, prefix, i + 1, engine.strict_flip
                )
            )
            if not verdict.is_sat:
                sets[i] = cand
    return ExplainResult(
        StepMask(tuple(frozenset(s) for s in sets)), "Minimal", "incremental",
        engine.queries, time.monotonic() - t0,
    )


def explain_incremental_minimum(sys, net, exec_, engine=None):
    """Minimum explanation by depth-first search over per-step feature
    subsets, each validated with a prefix query; branch-and-bound on the
    running cardinality."""
    engine = engine or Engine()
    t0 = time.monotonic()
    k, m = exec_.k, sys.m
    best = {"size": m * k + 1, "sets": None}

    def rec(i, chosen, used):
        for cand in _subsets(range(m)):
            if used + len(cand) >= best["size"]:
                return  # candidates only grow from here
            prefix = chosen + [cand]
            verdict = engine.is_sat(
                explanation_query_prefix(
                    sys, net, exec_, prefix, i + 1, engine.strict_flip
                )
            )
            if verdict.is_sat:
                continue
            if i + 1 == k:
                best["size"] = used + len(cand)
                best["sets"] = tuple(prefix)
            else:
                rec(i + 1, prefix, used + len(cand))

    rec(0, [], 0)
    if best["sets"] is None:
        # the all-features mask always verifies, so the bound only
        # excludes it when a strictly smaller mask was found first
        best["sets"] = tuple(frozenset(range(m)) for _ in range(k))
    return ExplainResult(
        StepMask(best["sets"]), "Minimum", "incremental-minimum",
        engine.queries, time.monotonic() - t0,
    )


# ---------------------------------------------------------------------------
# reverse incremental enumeration (contrastive side)


def enumerate_cxps_single(sys, net, exec_, i, engine=None):
    """All minimal single-step contrastive examples of step i viewed in
    isolation, ascending by size; candidates containing a found example
    are never dispatched."""
    engine = engine or Engine()
    found: list = []
    for cand in _subsets(range(sys.m), skip_empty=True):
        if any(c <= cand for c in found):
            continue
        verdict = engine.is_sat(
            contrastive_query_window(
                sys, net, exec_, [cand], i, i, engine.strict_flip
            )
        )
        if verdict.is_sat:
            found.append(cand)
    return found


def rie(sys, net, exec_, window_sets, i, j, engine=None, catalog=None):
    """Reverse incremental enumeration: classify the window contrastive
    candidate C_j..C_i as independent (prepend nothing), dependent
    (recurse over nonempty predecessor sets, ascending), or spurious
    (return nothing), collecting all full-length minimal contrastive
    masks that extend it."""
    engine = engine or Engine()
    catalog = catalog if catalog is not None else CxpCatalog(exec_.k)
    window_sets = [frozenset(s) for s in window_sets]
    if j == 1:
        return [_pad(window_sets, 1, exec_.k)]
    verdict = engine.is_sat(
        contrastive_query_window(
            sys, net, exec_,
            [frozenset()] + window_sets, j - 1, i, engine.strict_flip,
        )
    )
    if verdict.is_sat:
        return [_pad(window_sets, j, exec_.k)]
    out = []
    for pred in _subsets(range(sys.m), skip_empty=True):
        extended = [pred] + window_sets
        if catalog.covered(_pad(extended, j - 1, exec_.k)):
            continue
        verdict = engine.is_sat(
            contrastive_query_window(
                sys, net, exec_, extended, j - 1, i, engine.strict_flip
            )
        )
        if verdict.is_sat:
            out += rie(sys, net, exec_, extended, i, j - 1, engine, catalog)
    return out  # empty: the candidate is spurious


def explain_via_cxps(sys, net, exec_, engine=None):
    """Minimum explanation from the contrastive side: enumerate minimal
    contrastive examples per step, extend each backwards with reverse
    incremental enumeration, then take a minimum hitting set of the
    catalog (hitting elements are (step, feature) pairs).

    The hitting set is verified before being returned; in the rare case
    the windowed enumeration missed a contrastive shape, the verifying
    witness supplies it and the loop continues, preserving the minimum
    guarantee unconditionally.
    """
    engine = engine or Engine()
    t0 = time.monotonic()
    k = exec_.k
    catalog = CxpCatalog(k)
    for i in range(1, k + 1):
        for cand in enumerate_cxps_single(sys, net, exec_, i, engine):
            if catalog.covered(_pad([cand], i, k)):
                continue
            for full in rie(sys, net, exec_, [cand], i, i, engine, catalog):
                catalog.add(full)
    while True:
        pairs = minimum_hitting_set(
            [set(c.pairs()) for c in catalog.members],
            universe=[(i, f) for i in range(k) for f in range(sys.m)],
        )
        mask = StepMask.from_pairs(pairs, k)
        verdict = engine.is_sat(
            explanation_query_multi(sys, net, exec_, mask, engine.strict_flip)
        )
        if not verdict.is_sat:
            result = ExplainResult(
                mask, "Minimum", "cxp-mhs", engine.queries, time.monotonic() - t0
            )
            return result, catalog
        diff = _witness_diff_mask(sys, exec_, verdict.witness)
        catalog.add(_shrink_multi_cxp(sys, net, exec_, diff, engine))


def validate_candidate(sys, net, exec_, mask, engine=None, catalog=None):
    """Audit an externally produced candidate explanation.

    With a catalog: valid iff it is a hitting set of the recorded
    contrastive examples (returns the first missed one otherwise).
    Without: direct verification; returns the deviating witness
    otherwise.
    """
    engine = engine or Engine()
    mask.check_against(sys.m, exec_.k)
    if catalog is not None:
        for member in catalog.members:
            if not any(
                mask.sets[i] & member.sets[i] for i in range(exec_.k)
            ):
                return False, {"missed_cxp": [sorted(s) for s in member.sets]}
        return True, None
    verdict = engine.is_sat(
        explanation_query_multi(sys, net, exec_, mask, engine.strict_flip)
    )
    if verdict.is_sat:
        witness = {
            f"step{i+1}": [str(verdict.witness[block_var(i + 1, j)]) for j in range(sys.m)]
            for i in range(exec_.k)
        }
        return False, {"witness": witness}
    return True, None


# ---------------------------------------------------------------------------
# minimum hitting set


def minimum_hitting_set(family, universe=None) -> frozenset:
    """Exact minimum hitting set by branch and bound.

    Branches on the elements of the first unhit set, most-frequent
    element first (ties by element order); the greedy hitting set
    provides the initial upper bound, and pairwise-disjoint unhit sets
    a lower bound.  Members must be nonempty.
    """
    sets = []
    for s in family:
        fs = frozenset(s)
        if not fs:
            raise ModelError("hitting set family contains an empty member")
        sets.append(fs)
    if not sets:
        return frozenset()
    elements = sorted(set().union(*sets))
    order = {e: i for i, e in enumerate(elements)}

    def freq(unhit):
        counts = {}
        for s in unhit:
            for e in s:
                counts[e] = counts.get(e, 0) + 1
        return counts

    # greedy upper bound
    unhit = list(sets)
    greedy = set()
    while unhit:
        counts = freq(unhit)
        e = min(counts, key=lambda x: (-counts[x], order[x]))
        greedy.add(e)
        unhit = [s for s in unhit if e not in s]
    best = {"set": frozenset(greedy), "size": len(greedy)}

    def lower_bound(unhit):
        taken = []
        for s in unhit:
            if all(s.isdisjoint(t) for t in taken):
                taken.append(s)
        return len(taken)

    def rec(unhit, chosen):
        if not unhit:
            if len(chosen) < best["size"]:
                best["set"] = frozenset(chosen)
                best["size"] = len(chosen)
            return
        if len(chosen) + lower_bound(unhit) >= best["size"]:
            return
        target = unhit[0]
        counts = freq(unhit)
        for e in sorted(target, key=lambda x: (-counts[x], order[x])):
            rec([s for s in unhit if e not in s], chosen | {e})

    rec(sets, set())
    return best["set"]
