"""Gate-set configuration: named discrete gate tokens with fixed matrices.

A gate set is an alphabet of TokenDefs. Continuous-rotation primitives are
frozen at fixed angles so that every token is a discrete symbol; each distinct
angle is its own TokenDef (e.g. ``rx_p2`` is rx at +pi/2).
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .unitary import identity, phase_distance, require_unitary

PRIMITIVE_ARITY = {
    "h": 1, "x": 1, "y": 1, "z": 1,
    "s": 1, "sdg": 1, "t": 1, "tdg": 1,
    "rx": 1, "ry": 1, "rz": 1,
    "rxx": 2, "cx": 2, "cz": 2, "swap": 2,
}
PARAMETRIC = frozenset({"rx", "ry", "rz", "rxx"})

_S2 = 1.0 / math.sqrt(2.0)


def build_primitive(primitive: str, angle: float | None = None) -> np.ndarray:
    """Matrix of a named primitive; `angle` only for rotation primitives.

    Two-qubit matrices follow the module-wide convention: the token's first
    qubit is the most significant index bit (cx = control first, target second).
    """
    if primitive not in PRIMITIVE_ARITY:
        raise ValueError(f"unknown primitive {primitive!r}")
    if (primitive in PARAMETRIC) != (angle is not None):
        raise ValueError(f"primitive {primitive!r} {'requires' if primitive in PARAMETRIC else 'takes no'} angle")
    c = np.complex128
    if primitive == "h":
        return np.array([[_S2, _S2], [_S2, -_S2]], dtype=c)
    if primitive == "x":
        return np.array([[0, 1], [1, 0]], dtype=c)
    if primitive == "y":
        return np.array([[0, -1j], [1j, 0]], dtype=c)
    if primitive == "z":
        return np.array([[1, 0], [0, -1]], dtype=c)
    if primitive == "s":
        return np.array([[1, 0], [0, 1j]], dtype=c)
    if primitive == "sdg":
        return np.array([[1, 0], [0, -1j]], dtype=c)
    if primitive == "t":
        return np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=c)
    if primitive == "tdg":
        return np.array([[1, 0], [0, np.exp(-1j * np.pi / 4)]], dtype=c)
    if primitive == "rx":
        ch, sh = math.cos(angle / 2), math.sin(angle / 2)
        return np.array([[ch, -1j * sh], [-1j * sh, ch]], dtype=c)
    if primitive == "ry":
        ch, sh = math.cos(angle / 2), math.sin(angle / 2)
        return np.array([[ch, -sh], [sh, ch]], dtype=c)
    if primitive == "rz":
        return np.array([[np.exp(-1j * angle / 2), 0], [0, np.exp(1j * angle / 2)]], dtype=c)
    if primitive == "rxx":
        xx = np.kron(build_primitive("x"), build_primitive("x"))
        return math.cos(angle / 2) * np.eye(4, dtype=c) - 1j * math.sin(angle / 2) * xx
    if primitive == "cx":
        return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=c)
    if primitive == "cz":
        return np.diag([1, 1, 1, -1]).astype(c)
    if primitive == "swap":
        return np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=c)
    raise AssertionError(primitive)


@dataclass(frozen=True)
class TokenDef:
    """A named gate bound to a fixed matrix. Identity is by name."""
    name: str
    primitive: str
    angle: float | None
    arity: int
    matrix: np.ndarray = field(compare=False, repr=False)
    # embed results per (qubits, n_qubits), filled lazily; never compared
    _embed_cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __hash__(self):
        return hash(self.name)

    def config_line(self) -> str:
        if self.angle is None:
            return f"{self.name} {self.primitive} arity {self.arity}"
        return f"{self.name} {self.primitive} {self.angle!r} arity {self.arity}"


def _make_def(name: str, primitive: str, angle: float | None = None) -> TokenDef:
    matrix = require_unitary(build_primitive(primitive, angle), f"token {name!r}")
    arity = PRIMITIVE_ARITY[primitive]
    if phase_distance(matrix, identity(arity)) <= 1e-9:
        raise ValueError(f"token {name!r} acts as the identity (up to phase)")
    return TokenDef(name, primitive, angle, arity, matrix)


class GateSet:
    """Ordered collection of TokenDefs with unique names."""

    def __init__(self, defs):
        defs = list(defs)
        if not defs:
            raise ValueError("gate set is empty")
        names = [d.name for d in defs]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate token names: {dup}")
        self.defs: list[TokenDef] = defs
        self.by_name: dict[str, TokenDef] = {d.name: d for d in defs}

    def __len__(self):
        return len(self.defs)

    def __iter__(self):
        return iter(self.defs)

    def __contains__(self, name: str):
        return name in self.by_name

    def config_text(self) -> str:
        """Canonical config serialization; the basis of the fingerprint."""
        return "\n".join(d.config_line() for d in self.defs) + "\n"

    def fingerprint(self) -> bytes:
        return hashlib.sha256(self.config_text().encode()).digest()


_ANGLES = {"p2": math.pi / 2, "m2": -math.pi / 2, "p4": math.pi / 4, "m4": -math.pi / 4, "pi": math.pi}


def _preset_iontrap() -> GateSet:
    defs = []
    for axis in ("rx", "ry", "rz"):
        for suffix in ("p2", "m2", "p4", "m4", "pi"):
            defs.append(_make_def(f"{axis}_{suffix}", axis, _ANGLES[suffix]))
    defs.append(_make_def("rxx_p2", "rxx", math.pi / 2))
    return GateSet(defs)


def _preset_nisq() -> GateSet:
    defs = [_make_def(f"rx_{s}", "rx", _ANGLES[s]) for s in ("p2", "m2", "pi")]
    defs += [_make_def(f"rz_{s}", "rz", _ANGLES[s]) for s in ("p2", "m2", "p4", "m4", "pi")]
    defs.append(_make_def("cz", "cz"))
    return GateSet(defs)


def _preset_clifford_t() -> GateSet:
    return GateSet([_make_def(n, n) for n in ("h", "s", "sdg", "t", "tdg", "x", "cx")])


PRESETS = {
    "iontrap": _preset_iontrap,
    "nisq": _preset_nisq,
    "clifford_t": _preset_clifford_t,
}


def parse_gate_set(config_text: str) -> GateSet:
    """Parse a gate-set config.

    Either the reserved form ``preset:<name>`` or one token per line:
    ``<token-name> <primitive> [<angle-in-radians>] arity <k>``.
    Blank lines and ``#`` comments are ignored.
    """
    text = config_text.strip()
    if text.startswith("preset:"):
        name = text[len("preset:"):].strip()
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r} (have: {', '.join(sorted(PRESETS))})")
        return PRESETS[name]()
    defs = []
    for lineno, raw in enumerate(config_text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (4, 5) or parts[-2] != "arity":
            raise ValueError(f"line {lineno}: expected '<name> <primitive> [<angle>] arity <k>', got {raw!r}")
        name, primitive = parts[0], parts[1]
        angle = None
        if len(parts) == 5:
            try:
                angle = float(parts[2])
            except ValueError:
                raise ValueError(f"line {lineno}: malformed angle {parts[2]!r}") from None
        if primitive not in PRIMITIVE_ARITY:
            raise ValueError(f"line {lineno}: unknown primitive {primitive!r}")
        try:
            arity = int(parts[-1])
        except ValueError:
            raise ValueError(f"line {lineno}: malformed arity {parts[-1]!r}") from None
        if arity != PRIMITIVE_ARITY[primitive]:
            raise ValueError(f"line {lineno}: primitive {primitive!r} has arity {PRIMITIVE_ARITY[primitive]}, not {arity}")
        defs.append(_make_def(name, primitive, angle))
    return GateSet(defs)
