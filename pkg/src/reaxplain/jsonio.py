"""JSON schemas for networks, systems, executions and masks.

Rationals are serialized as decimal or "p/q" strings (never binary
floats).  Schemas:

network  {"layers": [{"weights": [["1/2", ...], ...],
                      "bias": ["0", ...], "relu": true}, ...]}
system   {"m": 8, "domains": [{"kind": "finite", "values": [...]} |
                              {"kind": "interval", "lo": ..., "hi": ...}],
          "actions": ["UP", ...],
          "initial": {"atoms": [...]},
          "transitions": {"UP": {"atoms": [...]}, ...},
          "env": "gridworld" | "turtlebot" | null,
          "meta": {...}}
atom     {"type": "linear", "coeffs": {"s0": "1", "n0": "-1"},
          "op": "=", "const": "0"} |
         {"type": "member", "coeffs": {...}, "values": ["0", "1/2", "1"]}
execution {"states": [["1/4", ...], ...], "actions": [0, ...]}
mask     {"sets": [[0, 2], []], "role": "Explanation"}

Transition constraint sets use variables s{j} (current) / n{j} (next);
the initial predicate uses s{j} only.  Feature indices are 0-based.
"""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .model import (
    ConstraintSet,
    Execution,
    FeatureDomain,
    Layer,
    LinearAtom,
    MembershipAtom,
    Network,
    ReactiveSystem,
    SchemaError,
    StepMask,
    as_rational,
    rat_str,
)


def _req(obj: dict, key: str):
    if key not in obj:
        raise SchemaError(f"missing key {key!r}")
    return obj[key]


# -- networks ---------------------------------------------------------------


def network_to_json(net: Network) -> dict:
    return {
        "layers": [
            {
                "weights": [[rat_str(v) for v in row] for row in layer.weights],
                "bias": [rat_str(v) for v in layer.bias],
                "relu": layer.relu,
            }
            for layer in net.layers
        ]
    }


def network_from_json(obj: dict) -> Network:
    layers = []
    for entry in _req(obj, "layers"):
        layers.append(
            Layer(
                weights=tuple(
                    tuple(as_rational(v) for v in row)
                    for row in _req(entry, "weights")
                ),
                bias=tuple(as_rational(v) for v in _req(entry, "bias")),
                relu=bool(_req(entry, "relu")),
            )
        )
    return Network(tuple(layers))


# -- constraint sets --------------------------------------------------------


def _atom_to_json(atom) -> dict:
    coeffs = {v: rat_str(c) for v, c in atom.coeffs}
    if isinstance(atom, LinearAtom):
        return {
            "type": "linear",
            "coeffs": coeffs,
            "op": atom.op,
            "const": rat_str(atom.const),
        }
    return {
        "type": "member",
        "coeffs": coeffs,
        "values": [rat_str(v) for v in atom.values],
    }


def _atom_from_json(obj: dict):
    kind = _req(obj, "type")
    coeffs = {v: as_rational(c) for v, c in _req(obj, "coeffs").items()}
    if kind == "linear":
        return LinearAtom(coeffs, _req(obj, "op"), as_rational(_req(obj, "const")))
    if kind == "member":
        return MembershipAtom(
            coeffs, tuple(as_rational(v) for v in _req(obj, "values"))
        )
    raise SchemaError(f"unknown atom type {kind!r}")


def constraints_to_json(cs: ConstraintSet) -> dict:
    return {"atoms": [_atom_to_json(a) for a in cs.atoms]}


def constraints_from_json(obj: dict) -> ConstraintSet:
    return ConstraintSet(tuple(_atom_from_json(a) for a in _req(obj, "atoms")))


# -- systems ----------------------------------------------------------------


def _domain_to_json(d: FeatureDomain) -> dict:
    if d.is_finite:
        return {"kind": "finite", "values": [rat_str(v) for v in d.values]}
    return {"kind": "interval", "lo": rat_str(d.lo), "hi": rat_str(d.hi)}


def _domain_from_json(obj: dict) -> FeatureDomain:
    kind = _req(obj, "kind")
    if kind == "finite":
        return FeatureDomain.finite(_req(obj, "values"))
    if kind == "interval":
        return FeatureDomain.interval(_req(obj, "lo"), _req(obj, "hi"))
    raise SchemaError(f"unknown domain kind {kind!r}")


def system_to_json(sys: ReactiveSystem) -> dict:
    return {
        "m": sys.m,
        "domains": [_domain_to_json(d) for d in sys.domains],
        "actions": list(sys.actions),
        "initial": constraints_to_json(sys.initial),
        "transitions": {
            label: constraints_to_json(sys.transitions[idx])
            for idx, label in enumerate(sys.actions)
        },
        "env": sys.meta.get("env"),
        "meta": {k: v for k, v in sys.meta.items() if k != "env"},
    }


def system_from_json(obj: dict) -> ReactiveSystem:
    actions = tuple(_req(obj, "actions"))
    trans_map = _req(obj, "transitions")
    missing = [a for a in actions if a not in trans_map]
    if missing:
        raise SchemaError(f"transitions missing for actions {missing}")
    meta = dict(obj.get("meta") or {})
    if obj.get("env"):
        meta["env"] = obj["env"]
    return ReactiveSystem(
        m=int(_req(obj, "m")),
        domains=tuple(_domain_from_json(d) for d in _req(obj, "domains")),
        actions=actions,
        initial=constraints_from_json(_req(obj, "initial")),
        transitions=tuple(constraints_from_json(trans_map[a]) for a in actions),
        meta=meta,
    )


# -- executions and masks ---------------------------------------------------


def execution_to_json(exec_: Execution) -> dict:
    return {
        "states": [[rat_str(v) for v in s] for s in exec_.states],
        "actions": list(exec_.actions),
    }


def execution_from_json(obj: dict) -> Execution:
    return Execution(
        states=tuple(
            tuple(as_rational(v) for v in s) for s in _req(obj, "states")
        ),
        actions=tuple(int(a) for a in _req(obj, "actions")),
    )


def mask_to_json(mask: StepMask) -> dict:
    return {"sets": [sorted(s) for s in mask.sets], "role": mask.role}


def mask_from_json(obj: dict) -> StepMask:
    return StepMask(
        tuple(frozenset(s) for s in _req(obj, "sets")),
        obj.get("role", "Explanation"),
    )


# -- file helpers -----------------------------------------------------------

_CODECS = {
    "network": (network_to_json, network_from_json),
    "system": (system_to_json, system_from_json),
    "execution": (execution_to_json, execution_from_json),
    "mask": (mask_to_json, mask_from_json),
}


def save(kind: str, value, path) -> None:
    enc, _ = _CODECS[kind]
    Path(path).write_text(json.dumps(enc(value), indent=2) + "\n")


def load(kind: str, path):
    _, dec = _CODECS[kind]
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    return dec(obj)
