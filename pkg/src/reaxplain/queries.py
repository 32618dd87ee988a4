"""Builders translating explanation and contrastive candidates into
verifier queries.

Semantics implemented everywhere (single-step, prefix, window, and full
multi-step): a mask fails to explain an execution iff, for some step i,
there are states x_1..x_i that follow the executed actions' transition
constraints, agree with the execution on every pinned feature up to
step i, and make the network select an action other than a_i at step i.
Transition constraints are always instantiated with the executed
actions: before the first deviating step the controller's choices
coincide with the recorded ones, and deviations at later steps are
captured by their own disjunct (or, for windows, by the enclosing
recursion).

This per-step-deviation reading is what makes the prefix check of the
incremental method equivalent to the full check under a fully fixed
suffix, makes minimal contrastive masks end at their deviation step,
and keeps the explanation/contrastive duality exact on systems whose
transition relations are not serial (e.g. a bounded grid).

The "action differs" disjuncts use weak inequalities by default: an
UNSAT explanation verdict then certifies a strictly unique argmax.
Strict mode is selectable via ``strict_flip``.
"""
from __future__ import annotations

from fractions import Fraction

from .model import Execution, LinearAtom, ModelError, Network, ReactiveSystem, StepMask
from .verifier import Query, block_var, declare_block, declare_copy, out_var, transition_atoms


def _pin_atoms(step: int, features, state):
    return [
        LinearAtom({block_var(step, j): Fraction(1)}, "=", state[j])
        for j in sorted(features)
    ]


def _rival_atoms(step: int, net: Network, action: int, strict: bool):
    """One atom per rival action c': output[c'] >= output[action]."""
    op = ">" if strict else ">="
    out = []
    for c in range(net.output_width):
        if c != action:
            out.append(
                LinearAtom(
                    {out_var(step, c): Fraction(1), out_var(step, action): Fraction(-1)},
                    op,
                    Fraction(0),
                )
            )
    return out


def _set_block_defaults(q: Query, sys: ReactiveSystem, step: int, state):
    for j in range(sys.m):
        q.set_default(block_var(step, j), state[j])


def _domains_system(net: Network, domains) -> ReactiveSystem:
    """Wrap bare domains in a transition-free system so single-step
    builders can reuse the block helpers."""
    from .model import ConstraintSet

    return ReactiveSystem(
        m=net.input_width,
        domains=tuple(domains),
        actions=tuple(str(c) for c in range(net.output_width)),
        initial=ConstraintSet(),
        transitions=tuple(ConstraintSet() for _ in range(net.output_width)),
    )


# ---------------------------------------------------------------------------
# single-step queries


def explanation_query_single(net, domains, v, c, features, strict_flip=False) -> Query:
    """SAT iff pinning `features` of input v fails to force class c."""
    sys = _domains_system(net, domains)
    features = frozenset(features)
    for f in features:
        if not 0 <= f < sys.m:
            raise ModelError(f"feature index {f} out of range")
    q = Query(tag=f"xp-single[c={c}]")
    declare_block(q, sys, 1)
    declare_copy(q, sys, net, 1)
    q.add_atoms(_pin_atoms(1, features, v))
    q.add_group([[a] for a in _rival_atoms(1, net, c, strict_flip)])
    _set_block_defaults(q, sys, 1, v)
    q.expected_copies = 1
    return q


def contrastive_query_single(net, domains, v, c, features, strict_flip=False) -> Query:
    """SAT iff freeing `features` of input v can change the class."""
    sys = _domains_system(net, domains)
    features = frozenset(features)
    complement = frozenset(range(sys.m)) - features
    return explanation_query_single(net, domains, v, c, complement, strict_flip)


# ---------------------------------------------------------------------------
# multi-step queries


def _check_exec(sys: ReactiveSystem, net: Network, exec_: Execution):
    sys.check_network(net)
    if exec_.k < 1:
        raise ModelError("empty execution")


def explanation_query_multi(
    sys: ReactiveSystem, net: Network, exec_: Execution, mask: StepMask, strict_flip=False
) -> Query:
    """SAT iff the mask is NOT a k-step explanation of the execution.

    One network copy per step; one disjunct per (deviation step, rival
    action) carrying the transition chain up to that step and the pins
    of the mask's first i step sets.
    """
    _check_exec(sys, net, exec_)
    mask.check_against(sys.m, exec_.k)
    k = exec_.k
    q = Query(tag=f"xp-multi[k={k}]")
    for i in range(1, k + 1):
        declare_block(q, sys, i)
    for i in range(1, k + 1):
        declare_copy(q, sys, net, i)
        _set_block_defaults(q, sys, i, exec_.states[i - 1])
    branches = []
    for i in range(1, k + 1):
        shared = []
        for l in range(1, i):
            shared += transition_atoms(sys, exec_.actions[l - 1], l)
        for l in range(1, i + 1):
            shared += _pin_atoms(l, mask.sets[l - 1], exec_.states[l - 1])
        for rival in _rival_atoms(i, net, exec_.actions[i - 1], strict_flip):
            branches.append(shared + [rival])
    q.add_group(branches)
    q.expected_copies = k
    return q


def contrastive_query_multi(
    sys: ReactiveSystem, net: Network, exec_: Execution, mask: StepMask, strict_flip=False
) -> Query:
    """SAT iff the mask is a k-step contrastive example: freeing its
    features (complement pinned) admits a deviation at some step."""
    mask.check_against(sys.m, exec_.k)
    return explanation_query_multi(
        sys, net, exec_, mask.complement(sys.m), strict_flip
    )


def explanation_query_prefix(
    sys: ReactiveSystem,
    net: Network,
    exec_: Execution,
    prefix_sets,
    i: int,
    strict_flip=False,
) -> Query:
    """SAT iff pinning (E_1..E_i) fails to force action a_i at step i.

    Exactly one network copy (step i); earlier steps contribute only
    transition atoms instantiated with the known actions.  Sound as a
    stand-in for the full check when the steps after i are fully fixed
    (the incremental methods maintain that discipline).
    """
    _check_exec(sys, net, exec_)
    prefix_sets = [frozenset(s) for s in prefix_sets]
    if not 1 <= i <= exec_.k:
        raise ModelError(f"step index {i} outside 1..{exec_.k}")
    if len(prefix_sets) != i:
        raise ModelError(f"prefix of length {len(prefix_sets)} for step {i}")
    q = Query(tag=f"xp-prefix[i={i}]")
    for l in range(1, i + 1):
        declare_block(q, sys, l)
        _set_block_defaults(q, sys, l, exec_.states[l - 1])
    declare_copy(q, sys, net, i)
    for l in range(1, i):
        q.add_atoms(transition_atoms(sys, exec_.actions[l - 1], l))
    for l in range(1, i + 1):
        q.add_atoms(_pin_atoms(l, prefix_sets[l - 1], exec_.states[l - 1]))
    q.add_group(
        [[a] for a in _rival_atoms(i, net, exec_.actions[i - 1], strict_flip)]
    )
    q.expected_copies = 1
    return q


def contrastive_query_window(
    sys: ReactiveSystem,
    net: Network,
    exec_: Execution,
    window_sets,
    j: int,
    i: int,
    strict_flip=False,
) -> Query:
    """SAT iff freeing C_j..C_i (complement pinned, transition atoms
    inside the window only, known actions) can flip action a_i.

    A window of a single step is the single-step contrastive check of
    that step.
    """
    _check_exec(sys, net, exec_)
    if not 1 <= j <= i <= exec_.k:
        raise ModelError(f"bad window {j}..{i} for k={exec_.k}")
    window_sets = [frozenset(s) for s in window_sets]
    if len(window_sets) != i - j + 1:
        raise ModelError("window mask length != window length")
    allf = frozenset(range(sys.m))
    q = Query(tag=f"cxp-window[{j}..{i}]")
    for l in range(j, i + 1):
        declare_block(q, sys, l)
        _set_block_defaults(q, sys, l, exec_.states[l - 1])
    declare_copy(q, sys, net, i)
    for l in range(j, i):
        q.add_atoms(transition_atoms(sys, exec_.actions[l - 1], l))
    for l in range(j, i + 1):
        pinned = allf - window_sets[l - j]
        q.add_atoms(_pin_atoms(l, pinned, exec_.states[l - 1]))
    q.add_group(
        [[a] for a in _rival_atoms(i, net, exec_.actions[i - 1], strict_flip)]
    )
    q.expected_copies = 1
    return q
