"""Shared encoding helpers: step blocks, network copies, transition
instantiation, and the plain unrolled reachability skeleton."""
from __future__ import annotations

from ..model import Network, ReactiveSystem, cur_var, nxt_var
from .query import Query


def block_var(step: int, j: int) -> str:
    """Variable for feature j of the state at 1-based step."""
    return f"x{step}_{j}"


def out_var(step: int, c: int) -> str:
    """Output c of the network copy reading step's state."""
    return f"o{step}_{c}"


def declare_block(q: Query, sys: ReactiveSystem, step: int):
    for j in range(sys.m):
        q.add_var(block_var(step, j), sys.domains[j])


def declare_copy(q: Query, sys: ReactiveSystem, net: Network, step: int):
    outs = []
    for c in range(net.output_width):
        q.add_var(out_var(step, c), None)
        outs.append(out_var(step, c))
    q.add_copy(
        net,
        tuple(block_var(step, j) for j in range(sys.m)),
        tuple(outs),
        tag=f"step{step}",
    )


def transition_atoms(sys: ReactiveSystem, action: int, step: int):
    """Atoms of transitions[action] renamed onto blocks step, step+1."""
    mapping = {}
    for j in range(sys.m):
        mapping[cur_var(j)] = block_var(step, j)
        mapping[nxt_var(j)] = block_var(step + 1, j)
    return [a.rename(mapping) for a in sys.transitions[action].atoms]


def encode_unrolled(sys: ReactiveSystem, net: Network, actions) -> Query:
    """Reachability skeleton: one state block and network copy per step,
    consecutive blocks linked by the transition constraints of the given
    executed actions.

    With a single action the skeleton degenerates to a one-copy query
    with no transition atoms.
    """
    sys.check_network(net)
    actions = [int(a) for a in actions]
    if not actions:
        raise ValueError("need at least one action")
    k = len(actions)
    q = Query(tag=f"unrolled[k={k}]")
    for i in range(1, k + 1):
        declare_block(q, sys, i)
    for i in range(1, k + 1):
        declare_copy(q, sys, net, i)
    for i in range(1, k):
        q.add_atoms(transition_atoms(sys, actions[i - 1], i))
    q.expected_copies = k
    return q
