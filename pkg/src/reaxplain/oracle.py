"""Independent brute-force reference implementations.

Everything here evaluates definitions by exhaustive enumeration over
finite feature spaces; nothing calls the verifier or the explanation
engines.  Results are ground truth for the test suite, with hard caps
and explicit refusal beyond them (silent sampling would forfeit that
status).
"""
from __future__ import annotations

import itertools
from fractions import Fraction

from .model import (
    Execution,
    ModelError,
    Network,
    ReactiveSystem,
    StepMask,
    classify,
    cur_var,
    forward,
    nxt_var,
)


class OracleCapExceeded(ModelError):
    """The instance is too large for exhaustive ground truth."""


DEFAULT_CAP = 2 ** 20


def space_size(sys: ReactiveSystem) -> int:
    size = 1
    for d in sys.domains:
        if not d.is_finite:
            raise OracleCapExceeded("continuous domains have no oracle")
        size *= len(d.values)
    return size


def iter_space(sys: ReactiveSystem, cap: int = DEFAULT_CAP):
    """All states of the feature space, lexicographically."""
    if space_size(sys) > cap:
        raise OracleCapExceeded(f"|F| = {space_size(sys)} exceeds cap {cap}")
    return itertools.product(*(d.values for d in sys.domains))


def successors(sys: ReactiveSystem, state, action: int, cap: int = DEFAULT_CAP):
    """All states n with (state, action, n) in the transition relation.

    Atoms are partially evaluated at `state`; atoms over a single
    successor feature filter that feature's domain, the (rare) residue
    over several successor features is checked on the remaining
    product.
    """
    cur_vals = {cur_var(j): state[j] for j in range(sys.m)}
    residual = []
    candidates = [list(d.values) for d in sys.domains]
    feasible = True
    for atom in sys.transitions[action].atoms:
        a = atom.substitute(cur_vals)
        vs = a.variables
        if not vs:
            if not a.holds({}):
                feasible = False
                break
        elif len(vs) == 1:
            j = int(vs[0][1:])
            candidates[j] = [
                v for v in candidates[j] if a.holds({vs[0]: v})
            ]
        else:
            residual.append(a)
    if not feasible:
        return
    prod = 1
    for c in candidates:
        prod *= len(c)
        if prod > cap:
            raise OracleCapExceeded("successor enumeration exceeds cap")
    for combo in itertools.product(*candidates):
        if all(
            a.holds({nxt_var(j): combo[j] for j in range(sys.m)})
            for a in residual
        ):
            yield tuple(combo)


def oracle_all_sequences(sys, net, k: int, cap: int = DEFAULT_CAP):
    """Every execution of length k: initial predicate, argmax actions,
    and transition semantics all enforced."""
    sys.check_network(net)
    if space_size(sys) ** k > cap:
        raise OracleCapExceeded(f"|F|^{k} exceeds cap {cap}")
    out = []

    def extend(states, actions):
        if len(states) == k:
            out.append(Execution(tuple(states), tuple(actions)))
            return
        s = states[-1]
        a = actions[-1]
        for nxt in successors(sys, s, a, cap):
            extend(states + [nxt], actions + [classify(net, nxt)])

    for s1 in iter_space(sys, cap):
        ok, _ = sys.initial.check(sys.state_assign(s1))
        if ok:
            extend([tuple(s1)], [classify(net, s1)])
    return out


def _pin_filter(sys, states_iter, pinned, state):
    for s in states_iter:
        if all(s[j] == state[j] for j in pinned):
            yield s


def weak_deviates(net: Network, x, action: int) -> bool:
    """True unless the network selects `action` at x with a strictly
    unique maximum.

    This mirrors the verifier's conservative "action differs" encoding
    (some rival output >= the recorded action's output), under which an
    explanation certifies a strictly unique argmax.
    """
    out = forward(net, x)
    return any(out[c] >= out[action] for c in range(len(out)) if c != action)


def strictly_selects(net: Network, x, action: int) -> bool:
    """The network picks `action` at x with strict margin over every
    rival; execution generators require this at every visited state so
    that the full mask is always an explanation."""
    return not weak_deviates(net, x, action)


def oracle_is_explanation(
    sys: ReactiveSystem,
    net: Network,
    exec_: Execution,
    mask: StepMask,
    cap: int = DEFAULT_CAP,
) -> bool:
    """Direct evaluation of the k-step explanation property.

    Layered reachability: R_i is the set of step-i states reachable via
    the executed actions' transitions under the mask's pins.  The mask
    explains the execution iff no R_i contains a state on which the
    network deviates from a_i.
    """
    sys.check_network(net)
    mask.check_against(sys.m, exec_.k)
    reach = set(
        _pin_filter(sys, iter_space(sys, cap), mask.sets[0], exec_.states[0])
    )
    for i in range(exec_.k):
        for s in sorted(reach):
            if weak_deviates(net, s, exec_.actions[i]):
                return False
        if i == exec_.k - 1:
            break
        nxt = set()
        for s in sorted(reach):
            for t in successors(sys, s, exec_.actions[i], cap):
                if all(
                    t[j] == exec_.states[i + 1][j] for j in mask.sets[i + 1]
                ):
                    nxt.add(t)
        reach = nxt
        if len(reach) > cap:
            raise OracleCapExceeded("reachable set exceeds cap")
    return True


def oracle_is_contrastive(sys, net, exec_, mask: StepMask, cap=DEFAULT_CAP) -> bool:
    """A mask is contrastive iff its stepwise complement fails to
    explain (the two bodies are literally identical)."""
    return not oracle_is_explanation(
        sys, net, exec_, mask.complement(sys.m), cap
    )


def _iter_masks(m: int, k: int):
    """All step masks ordered by total size, then lexicographically."""
    pool = [(i, f) for i in range(k) for f in range(m)]
    for size in range(len(pool) + 1):
        for pairs in itertools.combinations(pool, size):
            yield StepMask.from_pairs(pairs, k)


def oracle_minimum_explanation_size(sys, net, exec_, cap=DEFAULT_CAP) -> int:
    if sys.m * exec_.k > 24:
        raise OracleCapExceeded("mask space too large for exhaustive search")
    for mask in _iter_masks(sys.m, exec_.k):
        if oracle_is_explanation(sys, net, exec_, mask, cap):
            return mask.size
    raise AssertionError("the full mask must always explain")


def oracle_minimal_cxps(sys, net, exec_, cap=DEFAULT_CAP):
    """The family of all minimal contrastive step masks, by exhaustive
    ascending-size enumeration with superset skipping."""
    if sys.m * exec_.k > 24:
        raise OracleCapExceeded("mask space too large for exhaustive search")
    found = []
    for mask in _iter_masks(sys.m, exec_.k):
        if mask.size == 0:
            continue
        if any(mask.contains(c) for c in found):
            continue
        if oracle_is_contrastive(sys, net, exec_, mask, cap):
            found.append(StepMask(mask.sets, "Contrastive"))
    return found
