"""Feasibility queries over variables, atoms, and chained network copies.

A query asks: does some assignment to the declared variables satisfy
every atom, at least one branch of every disjunction group, and the
exact input/output semantics of every network copy?

Disjunction groups are lists of branches; each branch is a conjunction
of atoms.  The common clause case is a group whose branches are
singleton conjunctions.  Multi-step explanation checks need full
branches because the transition chain up to the deviating step belongs
to the chosen disjunct.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from ..model import (
    Atom,
    FeatureDomain,
    LinearAtom,
    MembershipAtom,
    ModelError,
    Network,
)


class QueryError(ModelError):
    """Malformed query."""


@dataclass(frozen=True)
class NetCopy:
    net: Network
    inputs: tuple
    outputs: tuple
    tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if len(self.inputs) != self.net.input_width:
            raise QueryError("copy input block width != network input width")
        if len(self.outputs) != self.net.output_width:
            raise QueryError("copy output width != network output width")


class Query:
    """Mutable query under construction; validate() before solving."""

    def __init__(self, tag: str = ""):
        self.tag = tag
        self.variables: dict = {}  # name -> FeatureDomain | None
        self.atoms: list = []
        self.groups: list = []  # group -> branch -> [atoms]
        self.net_copies: list = []
        self.defaults: dict = {}  # backfill values for unconstrained vars
        self.expected_copies: Optional[int] = None

    def add_var(self, name: str, domain: Optional[FeatureDomain] = None):
        if name in self.variables:
            raise QueryError(f"variable {name!r} declared twice")
        self.variables[name] = domain
        return name

    def add_atom(self, atom):
        self.atoms.append(atom)

    def add_atoms(self, atoms):
        self.atoms.extend(atoms)

    def add_group(self, branches):
        branches = [list(b) for b in branches]
        if not branches:
            raise QueryError("disjunction group with no branches")
        self.groups.append(branches)

    def add_copy(self, net, inputs, outputs, tag=""):
        self.net_copies.append(NetCopy(net, inputs, outputs, tag))

    def set_default(self, name: str, value: Fraction):
        self.defaults[name] = value

    # -- validation and debugging ------------------------------------------

    def _all_atoms(self):
        yield from self.atoms
        for group in self.groups:
            for branch in group:
                yield from branch

    def validate(self):
        for atom in self._all_atoms():
            if not isinstance(atom, Atom):
                raise QueryError(f"not an atom: {atom!r}")
            for v in atom.variables:
                if v not in self.variables:
                    raise QueryError(f"atom references undeclared variable {v!r}")
        for copy in self.net_copies:
            for v in copy.inputs + copy.outputs:
                if v not in self.variables:
                    raise QueryError(f"copy references undeclared variable {v!r}")
        for v in self.defaults:
            if v not in self.variables:
                raise QueryError(f"default for undeclared variable {v!r}")
        if self.expected_copies is not None and len(self.net_copies) != self.expected_copies:
            raise QueryError(
                f"query advertises {self.expected_copies} network copies "
                f"but contains {len(self.net_copies)}"
            )

    def dump(self) -> str:
        """Textual form, one atom per line."""
        lines = [f"query {self.tag or '<anonymous>'}"]
        for name, dom in self.variables.items():
            if dom is None:
                lines.append(f"var {name} free")
            elif dom.is_finite:
                vals = ", ".join(map(str, dom.values))
                lines.append(f"var {name} in {{{vals}}}")
            else:
                lines.append(f"var {name} in [{dom.lo}, {dom.hi}]")
        for copy in self.net_copies:
            lines.append(
                f"net {copy.tag or '<net>'}: ({', '.join(copy.inputs)}) -> "
                f"({', '.join(copy.outputs)})"
            )
        for atom in self.atoms:
            lines.append(f"assert {atom.describe()}")
        for gi, group in enumerate(self.groups):
            lines.append(f"group {gi}: one of")
            for branch in group:
                body = " and ".join(a.describe() for a in branch) or "true"
                lines.append(f"  | {body}")
        return "\n".join(lines)
