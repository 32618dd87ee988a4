"""Benchmark reactive systems: a grid navigation world and a
differential-drive robot with lidar, plus deterministic fixture agents.

Both systems transcribe their transition constraint families verbatim;
the canonical step functions produce successors that provably satisfy
them (grid sensors are recomputed from the obstacle layout and then
projected onto the constraint-feasible value nearest the layout truth).

Fixture agents are seeded pseudo-random ReLU networks shaped like the
documented actor architectures (the robot's hidden width is reduced
from 32 to 8 for desk-scale verification).  Agents are regenerated with
an incremented seed until greedy rollouts from the fixture starts yield
valid executions of length >= 3 in which every visited state selects
its action with a strict margin (a tie state would admit no
explanation at all under the weak "action differs" convention).
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .model import (
    ConstraintSet,
    Execution,
    FeatureDomain,
    Layer,
    LinearAtom,
    MembershipAtom,
    ModelError,
    Network,
    ReactiveSystem,
    StepError,
    classify,
    cur_var,
    nxt_var,
    simulate,
)
from .oracle import strictly_selects, successors


class GenerationError(ModelError):
    """No valid execution found within the retry budget."""


HALF = Fraction(1, 2)
SENSOR_VALUES = (Fraction(0), HALF, Fraction(1))


# ---------------------------------------------------------------------------
# grid navigation world


@dataclass(frozen=True)
class GridWorldSpec:
    """size x size grid; positions are multiples of 1/size in (0, 1].

    Features: 0,1 agent column/row; 2,3 target column/row; 4..7
    directional obstacle sensors in action order (UP, DOWN, LEFT,
    RIGHT).  Obstacles are 1-based (col, row) cells and exist only for
    the step function; verification sees the constraints alone.
    """

    size: int = 10
    obstacles: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(
            self, "obstacles", frozenset((int(c), int(r)) for c, r in self.obstacles)
        )
        if self.size < 2:
            raise ModelError("grid size must be at least 2")

    @property
    def unit(self) -> Fraction:
        return Fraction(1, self.size)


GRID_ACTIONS = ("UP", "DOWN", "LEFT", "RIGHT")
# (axis, delta sign): RIGHT increases feature 0, UP increases feature 1
_GRID_MOVE = {"UP": (1, 1), "DOWN": (1, -1), "LEFT": (0, -1), "RIGHT": (0, 1)}
_OPPOSITE = {"UP": "DOWN", "DOWN": "UP", "LEFT": "RIGHT", "RIGHT": "LEFT"}
_CELL_DELTA = {"UP": (0, 1), "DOWN": (0, -1), "LEFT": (-1, 0), "RIGHT": (1, 0)}


def _sensor_feature(direction: str) -> int:
    return 4 + GRID_ACTIONS.index(direction)


def gridworld_system(spec: GridWorldSpec) -> ReactiveSystem:
    unit = spec.unit
    positions = [unit * i for i in range(1, spec.size + 1)]
    domains = [FeatureDomain.finite(positions) for _ in range(4)]
    domains += [FeatureDomain.finite(SENSOR_VALUES) for _ in range(4)]

    transitions = []
    for action in GRID_ACTIONS:
        axis, sign = _GRID_MOVE[action]
        atoms = [
            # agent's axis matching the movement direction
            LinearAtom(
                {nxt_var(axis): Fraction(1), cur_var(axis): Fraction(-1)},
                "=",
                sign * unit,
            ),
            # agent's orthogonal axis
            LinearAtom(
                {nxt_var(1 - axis): Fraction(1), cur_var(1 - axis): Fraction(-1)},
                "=",
                Fraction(0),
            ),
            # target does not move
            LinearAtom({nxt_var(2): Fraction(1), cur_var(2): Fraction(-1)}, "=", Fraction(0)),
            LinearAtom({nxt_var(3): Fraction(1), cur_var(3): Fraction(-1)}, "=", Fraction(0)),
        ]
        fwd = _sensor_feature(action)
        atoms += [
            # sensor in the direction of movement
            LinearAtom({nxt_var(fwd): Fraction(1), cur_var(fwd): Fraction(-1)}, ">=", Fraction(0)),
            LinearAtom({nxt_var(fwd): Fraction(1), cur_var(fwd): Fraction(-1)}, "<=", HALF),
            MembershipAtom({cur_var(fwd): Fraction(1), nxt_var(fwd): Fraction(1)}, SENSOR_VALUES),
        ]
        back = _sensor_feature(_OPPOSITE[action])
        atoms += [
            # sensor opposite to the direction of movement
            LinearAtom({nxt_var(back): Fraction(1), cur_var(back): Fraction(-1)}, ">=", -HALF),
            LinearAtom({nxt_var(back): Fraction(1), cur_var(back): Fraction(-1)}, "<=", Fraction(0)),
            MembershipAtom({cur_var(back): Fraction(1), nxt_var(back): Fraction(1)}, SENSOR_VALUES),
        ]
        transitions.append(ConstraintSet(tuple(atoms)))

    return ReactiveSystem(
        m=8,
        domains=tuple(domains),
        actions=GRID_ACTIONS,
        initial=ConstraintSet(),
        transitions=tuple(transitions),
        meta={
            "env": "gridworld",
            "size": spec.size,
            "obstacles": sorted([list(c) for c in spec.obstacles]),
        },
    )


def _grid_cell(spec, state):
    return int(state[0] * spec.size), int(state[1] * spec.size)


def sensor_truth(spec: GridWorldSpec, col: int, row: int, direction: str) -> Fraction:
    dc, dr = _CELL_DELTA[direction]
    if (col + dc, row + dr) in spec.obstacles:
        return Fraction(1)
    if (col + 2 * dc, row + 2 * dr) in spec.obstacles:
        return HALF
    return Fraction(0)


def _feasible_sensor(prev: Fraction, relation: str):
    """Successor sensor readings compatible with the transition atoms."""
    out = []
    for u in SENSOR_VALUES:
        if prev + u not in SENSOR_VALUES:
            continue
        if relation == "toward" and not (prev <= u <= prev + HALF):
            continue
        if relation == "away" and not (prev - HALF <= u <= prev):
            continue
        out.append(u)
    return out


def gridworld_step(spec: GridWorldSpec):
    """Canonical deterministic member of the grid transition relation."""

    def step(state, action_idx):
        action = GRID_ACTIONS[action_idx]
        axis, sign = _GRID_MOVE[action]
        nxt = list(state)
        nxt[axis] = state[axis] + sign * spec.unit
        if not Fraction(0) < nxt[axis] <= 1:
            raise StepError(f"{action} leaves the grid")
        col, row = int(nxt[0] * spec.size), int(nxt[1] * spec.size)
        if (col, row) in spec.obstacles:
            raise StepError(f"{action} collides with the obstacle at {(col, row)}")
        for direction in GRID_ACTIONS:
            f = _sensor_feature(direction)
            if direction == action:
                relation = "toward"
            elif direction == _OPPOSITE[action]:
                relation = "away"
            else:
                relation = "free"
            feasible = _feasible_sensor(state[f], relation)
            if not feasible:
                raise StepError(
                    f"{action}: no feasible {direction} sensor reading from {state[f]}"
                )
            truth = sensor_truth(spec, col, row, direction)
            nxt[f] = min(feasible, key=lambda u: (abs(u - truth), u))
        return tuple(nxt)

    return step


def gridworld_start(spec: GridWorldSpec, rng: random.Random):
    """A start state off the obstacles with layout-true sensors."""
    unit = spec.unit
    while True:
        acol, arow = rng.randint(1, spec.size), rng.randint(1, spec.size)
        tcol, trow = rng.randint(1, spec.size), rng.randint(1, spec.size)
        if (acol, arow) in spec.obstacles or (tcol, trow) in spec.obstacles:
            continue
        if (acol, arow) == (tcol, trow):
            continue
        state = [unit * acol, unit * arow, unit * tcol, unit * trow]
        state += [sensor_truth(spec, acol, arow, d) for d in GRID_ACTIONS]
        return tuple(state)


# ---------------------------------------------------------------------------
# differential-drive robot with lidar


@dataclass(frozen=True)
class TurtleBotSpec:
    """9 features: 7 lidar rays (0..6), target angle (7), target
    distance (8); actions FORWARD, LEFT, RIGHT.

    Only turns carry transition constraints; FORWARD's constraint set is
    unsatisfiable, so generated executions end at the first FORWARD
    (matching the turn-only multi-step setting).
    """

    lidar: int = 7


BOT_ACTIONS = ("FORWARD", "LEFT", "RIGHT")
TURN = Fraction(1, 12)  # 30 degrees of the full [0, 1] angle range
LIDAR_LO = Fraction(1, 5)


def turtlebot_system(spec: TurtleBotSpec = TurtleBotSpec()) -> ReactiveSystem:
    n = spec.lidar
    domains = tuple(FeatureDomain.interval(0, 1) for _ in range(n + 2))
    angle, dist = n, n + 1

    def turn_atoms(direction):
        atoms = []
        for i in list(range(n)) + [dist]:
            atoms.append(LinearAtom({cur_var(i): Fraction(1)}, ">=", LIDAR_LO))
            atoms.append(LinearAtom({cur_var(i): Fraction(1)}, "<=", Fraction(1)))
        atoms.append(LinearAtom({cur_var(angle): Fraction(1)}, ">=", Fraction(0)))
        atoms.append(LinearAtom({cur_var(angle): Fraction(1)}, "<=", Fraction(1)))
        # lidar window slides one ray per 30-degree turn
        for i in range(1, n):
            if direction == "RIGHT":
                atoms.append(
                    LinearAtom(
                        {cur_var(i): Fraction(1), nxt_var(i - 1): Fraction(-1)}, "=", Fraction(0)
                    )
                )
            else:
                atoms.append(
                    LinearAtom(
                        {cur_var(i - 1): Fraction(1), nxt_var(i): Fraction(-1)}, "=", Fraction(0)
                    )
                )
        delta = -TURN if direction == "RIGHT" else TURN
        atoms.append(
            LinearAtom({nxt_var(angle): Fraction(1), cur_var(angle): Fraction(-1)}, "=", delta)
        )
        atoms.append(
            LinearAtom({nxt_var(dist): Fraction(1), cur_var(dist): Fraction(-1)}, "=", Fraction(0))
        )
        return ConstraintSet(tuple(atoms))

    # FORWARD has no successor: 0 = 1 is unsatisfiable
    forward_cs = ConstraintSet((LinearAtom({}, "=", Fraction(1)),))
    return ReactiveSystem(
        m=n + 2,
        domains=domains,
        actions=BOT_ACTIONS,
        initial=ConstraintSet(),
        transitions=(forward_cs, turn_atoms("LEFT"), turn_atoms("RIGHT")),
        meta={"env": "turtlebot", "lidar": n},
    )


def turtlebot_step(spec: TurtleBotSpec = TurtleBotSpec()):
    n = spec.lidar
    angle, dist = n, n + 1

    def step(state, action_idx):
        action = BOT_ACTIONS[action_idx]
        if action == "FORWARD":
            raise StepError("FORWARD has no transition; the execution ends here")
        for i in list(range(n)) + [dist]:
            if not LIDAR_LO <= state[i] <= 1:
                raise StepError(f"{action}: feature {i} outside [1/5, 1]")
        nxt = list(state)
        if action == "RIGHT":
            for i in range(1, n):
                nxt[i - 1] = state[i]
            nxt[n - 1] = state[n - 1]  # newly revealed ray: keep reading
            nxt[angle] = state[angle] - TURN
        else:
            for i in range(1, n):
                nxt[i] = state[i - 1]
            nxt[0] = state[0]
            nxt[angle] = state[angle] + TURN
        if not Fraction(0) <= nxt[angle] <= 1:
            raise StepError(f"{action}: angle leaves [0, 1]")
        return tuple(nxt)

    return step


def turtlebot_start(spec: TurtleBotSpec, rng: random.Random):
    vals = [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1)]
    state = [rng.choice(vals) for _ in range(spec.lidar)]
    state.append(Fraction(rng.randint(4, 8), 12))  # room to turn either way
    state.append(rng.choice(vals))
    return tuple(state)


# ---------------------------------------------------------------------------
# canonical step dispatch and fixture agents


def spec_from_system(sys: ReactiveSystem):
    env = sys.meta.get("env")
    if env == "gridworld":
        return GridWorldSpec(
            size=int(sys.meta.get("size", 10)),
            obstacles=frozenset(tuple(c) for c in sys.meta.get("obstacles", [])),
        )
    if env == "turtlebot":
        return TurtleBotSpec(lidar=int(sys.meta.get("lidar", 7)))
    return None


def generic_step(sys: ReactiveSystem):
    """Deterministic step for untagged finite systems: the
    lexicographically smallest T-consistent successor."""

    def step(state, action_idx):
        for nxt in successors(sys, state, action_idx):
            return nxt
        raise StepError(f"action {sys.actions[action_idx]} has no successor")

    return step


def canonical_step(sys: ReactiveSystem):
    spec = spec_from_system(sys)
    if isinstance(spec, GridWorldSpec):
        return gridworld_step(spec)
    if isinstance(spec, TurtleBotSpec):
        return turtlebot_step(spec)
    if all(d.is_finite for d in sys.domains):
        return generic_step(sys)
    raise ModelError("no canonical step function for this system")


def start_states(sys: ReactiveSystem, seed: int, count: int):
    spec = spec_from_system(sys)
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        if isinstance(spec, GridWorldSpec):
            out.append(gridworld_start(spec, rng))
        elif isinstance(spec, TurtleBotSpec):
            out.append(turtlebot_start(spec, rng))
        else:
            out.append(tuple(rng.choice(d.values) for d in sys.domains))
    return out


_ARCH = {"gridworld": (8, (8, 8), 4), "turtlebot": (9, (8, 8), 3)}


def _seeded_net(arch, rng) -> Network:
    m, hidden, n_out = arch
    widths = [m] + list(hidden) + [n_out]
    layers = []
    for li in range(len(widths) - 1):
        w = tuple(
            tuple(Fraction(rng.randint(-16, 16), 8) for _ in range(widths[li]))
            for _ in range(widths[li + 1])
        )
        b = tuple(Fraction(rng.randint(-8, 8), 8) for _ in range(widths[li + 1]))
        layers.append(Layer(w, b, li < len(widths) - 2))
    return Network(tuple(layers))


def rollout(sys, net, step_fn, s1, max_k):
    """Greedy rollout that stops before ties, dead ends, or step
    errors; returns the longest strict-margin execution from s1."""
    states, actions = [], []
    state = tuple(s1)
    while len(states) < max_k:
        a = classify(net, state)
        if not strictly_selects(net, state, a):
            break
        states.append(state)
        actions.append(a)
        if len(states) == max_k:
            break
        try:
            state = step_fn(state, a)
        except StepError:
            break
    if not states:
        raise GenerationError("start state has no strict-margin action")
    return Execution(tuple(states), tuple(actions))


def make_fixture_agent(sys: ReactiveSystem, seed: int, min_k: int = 3, tries: int = 200):
    """Deterministic pseudo-random agent for the system, regenerated
    with an incremented seed until a greedy rollout from the fixture
    starts yields a valid execution of length >= min_k."""
    env = sys.meta.get("env")
    arch = _ARCH.get(env, (sys.m, (8, 8), sys.n_actions))
    step_fn = canonical_step(sys)
    for s in range(seed, seed + tries):
        net = _seeded_net(arch, random.Random(s))
        for s1 in start_states(sys, s, 8):
            try:
                ex = rollout(sys, net, step_fn, s1, min_k)
            except GenerationError:
                continue
            if ex.k >= min_k:
                return net
    raise GenerationError(f"no fixture agent found in {tries} seeds from {seed}")


def generate_execution(sys, net, k: int, seed: int, tries: int = 200) -> Execution:
    """Deterministic execution of exactly k strict-margin steps; the
    result re-validates through simulate()."""
    step_fn = canonical_step(sys)
    rng_seed = seed
    for s1 in start_states(sys, rng_seed, tries):
        try:
            ex = rollout(sys, net, step_fn, s1, k)
        except GenerationError:
            continue
        if ex.k == k:
            return simulate(sys, net, step_fn, ex.states[0], k)
    raise GenerationError(f"no {k}-step execution found in {tries} starts")
