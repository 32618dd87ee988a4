"""Domain types shared by every other module.

All verifier-facing arithmetic is exact: weights, state values and
constraint constants are `fractions.Fraction` parsed from decimal or
"p/q" strings.  Binary floats are rejected at the boundary, because a
single rounded comparison would make SAT/UNSAT verdicts unsound.

Variable naming conventions used throughout:

* constraint sets over a single state use ``s0 .. s{m-1}``;
* transition constraint sets relate a current state ``s{j}`` to a
  successor state ``n{j}``;
* queries instantiate these onto step blocks named ``x{step}_{j}``.

Feature indices are 0-based everywhere, including serialized masks.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence


class ModelError(ValueError):
    """Malformed model data (dimension mismatch, bad domain, ...)."""


class SchemaError(ModelError):
    """Malformed serialized input."""


class StepError(ModelError):
    """A canonical step function left the feasible transition set."""


def as_rational(value) -> Fraction:
    """Parse an exact rational from int, Fraction, or string.

    Strings may be decimal ("0.25", "-3") or ratio ("1/3") notation.
    Binary floats are rejected: they carry rounding the verifier must
    not inherit.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ModelError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ModelError(f"cannot parse rational from {value!r}") from exc
    if isinstance(value, float):
        raise ModelError(
            f"refusing float {value!r}: use a decimal or p/q string"
        )
    raise ModelError(f"not a rational: {value!r}")


def rat_str(q: Fraction) -> str:
    """Serialize a rational as "p" or "p/q"."""
    return str(q)


def cur_var(j: int) -> str:
    return f"s{j}"


def nxt_var(j: int) -> str:
    return f"n{j}"


# ---------------------------------------------------------------------------
# Networks


@dataclass(frozen=True)
class Layer:
    """One affine layer: y = W x + b, optionally followed by ReLU on
    every unit."""

    weights: tuple  # rows, each a tuple of Fractions; shape out x in
    bias: tuple
    relu: bool

    def __post_init__(self):
        w = tuple(tuple(as_rational(v) for v in row) for row in self.weights)
        b = tuple(as_rational(v) for v in self.bias)
        if not w:
            raise ModelError("layer with no units")
        widths = {len(row) for row in w}
        if len(widths) != 1:
            raise ModelError("ragged weight matrix")
        if len(b) != len(w):
            raise ModelError(
                f"bias width {len(b)} != unit count {len(w)}"
            )
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_width(self) -> int:
        return len(self.weights[0])

    @property
    def out_width(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class Network:
    """Feed-forward ReLU network with exact rational parameters.

    The final layer must be identity-activated; its width is the number
    of classes/actions.
    """

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ModelError("network with no layers")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_width != nxt.in_width:
                raise ModelError(
                    f"layer widths disagree: {prev.out_width} feeds {nxt.in_width}"
                )
        if layers[-1].relu:
            raise ModelError("last layer must have identity activation")
        object.__setattr__(self, "layers", layers)

    @property
    def input_width(self) -> int:
        return self.layers[0].in_width

    @property
    def output_width(self) -> int:
        return self.layers[-1].out_width


def forward(net: Network, x: Sequence[Fraction]) -> tuple:
    """Exact forward pass through the affine/ReLU composition."""
    if len(x) != net.input_width:
        raise ModelError(
            f"input width {len(x)} != network input width {net.input_width}"
        )
    vals = tuple(as_rational(v) for v in x)
    for layer in net.layers:
        nxt = []
        for row, b in zip(layer.weights, layer.bias):
            acc = b
            for w, v in zip(row, vals):
                if w:
                    acc += w * v
            if layer.relu and acc < 0:
                acc = Fraction(0)
            nxt.append(acc)
        vals = tuple(nxt)
    return vals


def classify(net: Network, x: Sequence[Fraction]) -> int:
    """Index of the maximal output; ties break toward the lowest index."""
    out = forward(net, x)
    best, arg = out[0], 0
    for i, v in enumerate(out[1:], start=1):
        if v > best:
            best, arg = v, i
    return arg


# ---------------------------------------------------------------------------
# Domains and constraints


@dataclass(frozen=True)
class FeatureDomain:
    """Either a finite set of rationals or a closed interval."""

    kind: str  # "finite" | "interval"
    values: tuple = ()
    lo: Optional[Fraction] = None
    hi: Optional[Fraction] = None

    @staticmethod
    def finite(values) -> "FeatureDomain":
        vals = tuple(sorted(as_rational(v) for v in values))
        if not vals:
            raise ModelError("empty finite domain")
        if len(set(vals)) != len(vals):
            raise ModelError("finite domain with duplicate values")
        return FeatureDomain("finite", values=vals)

    @staticmethod
    def interval(lo, hi) -> "FeatureDomain":
        lo, hi = as_rational(lo), as_rational(hi)
        if lo > hi:
            raise ModelError(f"interval with lo {lo} > hi {hi}")
        return FeatureDomain("interval", lo=lo, hi=hi)

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def size(self) -> Optional[int]:
        return len(self.values) if self.is_finite else None

    def hull(self) -> tuple:
        if self.is_finite:
            return self.values[0], self.values[-1]
        return self.lo, self.hi

    def contains(self, v: Fraction) -> bool:
        if self.is_finite:
            return v in self.values
        return self.lo <= v <= self.hi


def _norm_coeffs(coeffs) -> tuple:
    if isinstance(coeffs, Mapping):
        items = coeffs.items()
    else:
        items = coeffs
    merged = {}
    for var, c in items:
        c = as_rational(c)
        if c:
            merged[var] = merged.get(var, Fraction(0)) + c
    return tuple(sorted((v, c) for v, c in merged.items() if c))


_OPS = {"<=", "=", ">=", "<", ">"}


@dataclass(frozen=True)
class LinearAtom:
    """sum(coeffs[v] * v) OP const.

    Strict ops exist only for the selectable strict-misclassification
    mode; everything the transition encodings produce is weak.
    """

    coeffs: tuple
    op: str
    const: Fraction

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _norm_coeffs(self.coeffs))
        object.__setattr__(self, "const", as_rational(self.const))
        if self.op not in _OPS:
            raise ModelError(f"bad comparator {self.op!r}")

    @property
    def variables(self) -> tuple:
        return tuple(v for v, _ in self.coeffs)

    def value(self, assign: Mapping[str, Fraction]) -> Fraction:
        acc = Fraction(0)
        for var, c in self.coeffs:
            acc += c * assign[var]
        return acc

    def holds(self, assign: Mapping[str, Fraction]) -> bool:
        lhs = self.value(assign)
        if self.op == "<=":
            return lhs <= self.const
        if self.op == ">=":
            return lhs >= self.const
        if self.op == "=":
            return lhs == self.const
        if self.op == "<":
            return lhs < self.const
        return lhs > self.const

    def rename(self, mapping: Mapping[str, str]) -> "LinearAtom":
        return LinearAtom(
            tuple((mapping.get(v, v), c) for v, c in self.coeffs),
            self.op,
            self.const,
        )

    def substitute(self, values: Mapping[str, Fraction]) -> "LinearAtom":
        """Fold known variable values into the constant."""
        keep, shift = [], Fraction(0)
        for v, c in self.coeffs:
            if v in values:
                shift += c * values[v]
            else:
                keep.append((v, c))
        return LinearAtom(tuple(keep), self.op, self.const - shift)

    def describe(self) -> str:
        lhs = " + ".join(f"{c}*{v}" for v, c in self.coeffs) or "0"
        return f"{lhs} {self.op} {self.const}"


@dataclass(frozen=True)
class MembershipAtom:
    """sum(coeffs[v] * v) in a finite set of rationals.

    The linear form generalizes single-variable membership; sensor
    transition constraints need sums like s + n in {0, 1/2, 1}.
    """

    coeffs: tuple
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _norm_coeffs(self.coeffs))
        vals = tuple(sorted(set(as_rational(v) for v in self.values)))
        if not vals:
            raise ModelError("empty membership set")
        object.__setattr__(self, "values", vals)

    @property
    def variables(self) -> tuple:
        return tuple(v for v, _ in self.coeffs)

    def value(self, assign: Mapping[str, Fraction]) -> Fraction:
        acc = Fraction(0)
        for var, c in self.coeffs:
            acc += c * assign[var]
        return acc

    def holds(self, assign: Mapping[str, Fraction]) -> bool:
        return self.value(assign) in self.values

    def rename(self, mapping: Mapping[str, str]) -> "MembershipAtom":
        return MembershipAtom(
            tuple((mapping.get(v, v), c) for v, c in self.coeffs), self.values
        )

    def substitute(self, values: Mapping[str, Fraction]) -> "MembershipAtom":
        keep, shift = [], Fraction(0)
        for v, c in self.coeffs:
            if v in values:
                shift += c * values[v]
            else:
                keep.append((v, c))
        return MembershipAtom(
            tuple(keep), tuple(v - shift for v in self.values)
        )

    def describe(self) -> str:
        lhs = " + ".join(f"{c}*{v}" for v, c in self.coeffs) or "0"
        return f"{lhs} in {{{', '.join(map(str, self.values))}}}"


Atom = (LinearAtom, MembershipAtom)


@dataclass(frozen=True)
class ConstraintSet:
    """Conjunction of linear and membership atoms over named variables."""

    atoms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        for a in self.atoms:
            if not isinstance(a, Atom):
                raise ModelError(f"not an atom: {a!r}")

    @property
    def variables(self) -> frozenset:
        out = set()
        for a in self.atoms:
            out.update(a.variables)
        return frozenset(out)

    def check(self, assign: Mapping[str, Fraction]):
        """Return (True, None) or (False, first violated atom)."""
        for a in self.atoms:
            if not a.holds(assign):
                return False, a
        return True, None

    def rename(self, mapping: Mapping[str, str]) -> "ConstraintSet":
        return ConstraintSet(tuple(a.rename(mapping) for a in self.atoms))


# ---------------------------------------------------------------------------
# Reactive systems, executions, masks


@dataclass(frozen=True)
class ReactiveSystem:
    """Feature space, action set, initial predicate and per-action
    transition constraints of a DNN-controlled system.

    Transition constraint sets relate variables ``s{j}`` (current state)
    to ``n{j}`` (successor state).  ``meta`` carries environment data
    (grid layout, env tag) opaque to the core.
    """

    m: int
    domains: tuple
    actions: tuple
    initial: ConstraintSet
    transitions: tuple  # one ConstraintSet per action index
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        domains = tuple(self.domains)
        if len(domains) != self.m:
            raise ModelError(f"{len(domains)} domains for m={self.m}")
        actions = tuple(self.actions)
        if not actions:
            raise ModelError("no actions")
        transitions = tuple(self.transitions)
        if len(transitions) != len(actions):
            raise ModelError("transitions must be defined for every action")
        legal = {cur_var(j) for j in range(self.m)}
        legal |= {nxt_var(j) for j in range(self.m)}
        for t in transitions:
            bad = t.variables - legal
            if bad:
                raise ModelError(f"transition references unknown vars {sorted(bad)}")
        bad = self.initial.variables - {cur_var(j) for j in range(self.m)}
        if bad:
            raise ModelError(f"initial predicate references {sorted(bad)}")
        object.__setattr__(self, "domains", domains)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "transitions", transitions)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def state_assign(self, state: Sequence[Fraction]) -> dict:
        return {cur_var(j): state[j] for j in range(self.m)}

    def pair_assign(self, state, nxt) -> dict:
        assign = self.state_assign(state)
        assign.update({nxt_var(j): nxt[j] for j in range(self.m)})
        return assign

    def in_space(self, state: Sequence[Fraction]) -> bool:
        return len(state) == self.m and all(
            d.contains(v) for d, v in zip(self.domains, state)
        )

    def check_network(self, net: Network):
        if net.input_width != self.m or net.output_width != self.n_actions:
            raise ModelError(
                f"network {net.input_width}->{net.output_width} does not fit "
                f"system m={self.m}, |A|={self.n_actions}"
            )


@dataclass(frozen=True)
class Execution:
    """k states plus the k actions the controller selected in them."""

    states: tuple
    actions: tuple

    def __post_init__(self):
        states = tuple(tuple(as_rational(v) for v in s) for s in self.states)
        actions = tuple(int(a) for a in self.actions)
        if not states or len(states) != len(actions):
            raise ModelError("execution needs equally many states and actions")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)

    @property
    def k(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class StepMask:
    """Per-step feature subsets; the shared shape of explanations and
    contrastive examples."""

    sets: tuple
    role: str = "Explanation"  # "Explanation" | "Contrastive"

    def __post_init__(self):
        object.__setattr__(
            self, "sets", tuple(frozenset(int(f) for f in s) for s in self.sets)
        )
        if self.role not in ("Explanation", "Contrastive"):
            raise ModelError(f"bad mask role {self.role!r}")

    def __len__(self):
        return len(self.sets)

    @property
    def size(self) -> int:
        return sum(len(s) for s in self.sets)

    def check_against(self, m: int, k: int):
        if len(self.sets) != k:
            raise ModelError(f"mask length {len(self.sets)} != k={k}")
        for s in self.sets:
            for f in s:
                if not 0 <= f < m:
                    raise ModelError(f"feature index {f} outside 0..{m-1}")

    def complement(self, m: int) -> "StepMask":
        allf = frozenset(range(m))
        role = "Contrastive" if self.role == "Explanation" else "Explanation"
        return StepMask(tuple(allf - s for s in self.sets), role)

    def contains(self, other: "StepMask") -> bool:
        """Stepwise superset test: every other.sets[i] subset of ours."""
        return len(other) == len(self) and all(
            o <= s for s, o in zip(self.sets, other.sets)
        )

    def with_step(self, i: int, fs) -> "StepMask":
        sets = list(self.sets)
        sets[i] = frozenset(fs)
        return StepMask(tuple(sets), self.role)

    def pairs(self) -> tuple:
        """Flatten to sorted (step, feature) pairs."""
        return tuple(
            (i, f) for i, s in enumerate(self.sets) for f in sorted(s)
        )

    @staticmethod
    def full(k: int, m: int, role="Explanation") -> "StepMask":
        return StepMask(tuple(frozenset(range(m)) for _ in range(k)), role)

    @staticmethod
    def empty(k: int, role="Explanation") -> "StepMask":
        return StepMask(tuple(frozenset() for _ in range(k)), role)

    @staticmethod
    def from_pairs(pairs, k: int, role="Explanation") -> "StepMask":
        sets = [set() for _ in range(k)]
        for i, f in pairs:
            sets[i].add(f)
        return StepMask(tuple(frozenset(s) for s in sets), role)


@dataclass(frozen=True)
class Verdict:
    """SAT with a full witness assignment, or UNSAT."""

    status: str  # "SAT" | "UNSAT"
    witness: Optional[dict] = None

    def __post_init__(self):
        if self.status not in ("SAT", "UNSAT"):
            raise ModelError(f"bad verdict status {self.status!r}")
        if (self.witness is not None) != (self.status == "SAT"):
            raise ModelError("witness present iff SAT")

    @property
    def is_sat(self) -> bool:
        return self.status == "SAT"


# ---------------------------------------------------------------------------
# Execution generation and validation


def simulate(
    sys: ReactiveSystem,
    net: Network,
    step_fn: Callable,
    s1: Sequence[Fraction],
    k: int,
) -> Execution:
    """Roll the controller forward k steps with a canonical step function.

    Every produced transition is checked against the transition
    constraint set; a step function output violating it raises a
    StepError naming the violated atom.
    """
    sys.check_network(net)
    if k < 1:
        raise ModelError("k must be positive")
    s1 = tuple(as_rational(v) for v in s1)
    if not sys.in_space(s1):
        raise ModelError("start state outside the feature space")
    ok, atom = sys.initial.check(sys.state_assign(s1))
    if not ok:
        raise ModelError(f"start state violates initial predicate: {atom.describe()}")
    states, actions = [s1], []
    for i in range(k):
        state = states[-1]
        action = classify(net, state)
        actions.append(action)
        if i == k - 1:
            break
        nxt = tuple(as_rational(v) for v in step_fn(state, action))
        if not sys.in_space(nxt):
            raise StepError(
                f"step {i+1}: successor leaves the feature space: {nxt}"
            )
        ok, atom = sys.transitions[action].check(sys.pair_assign(state, nxt))
        if not ok:
            raise StepError(
                f"step {i+1}: action {sys.actions[action]} violates "
                f"transition atom: {atom.describe()}"
            )
        states.append(nxt)
    return Execution(tuple(states), tuple(actions))


def validate_execution(sys: ReactiveSystem, net: Network, exec_: Execution):
    """Return (True, None) or (False, description of the first violated
    execution invariant)."""
    sys.check_network(net)
    for i, s in enumerate(exec_.states):
        if not sys.in_space(s):
            return False, f"state {i+1} outside the feature space"
    ok, atom = sys.initial.check(sys.state_assign(exec_.states[0]))
    if not ok:
        return False, f"initial predicate violated: {atom.describe()}"
    for i, (s, a) in enumerate(zip(exec_.states, exec_.actions)):
        if not 0 <= a < sys.n_actions:
            return False, f"step {i+1}: action index {a} out of range"
        got = classify(net, s)
        if got != a:
            return False, (
                f"step {i+1}: recorded action {sys.actions[a]} but the "
                f"network selects {sys.actions[got]}"
            )
    for i in range(exec_.k - 1):
        a = exec_.actions[i]
        ok, atom = sys.transitions[a].check(
            sys.pair_assign(exec_.states[i], exec_.states[i + 1])
        )
        if not ok:
            return False, (
                f"step {i+1}: transition atom violated: {atom.describe()}"
            )
    return True, None
