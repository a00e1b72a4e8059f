"""
PURE-CIRCUIT instances over the values {0, 1, bot} with NAND and PURIFY gates.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from cdsclear import get_logger, MalformedCircuitError, CapExceededError
from cdsclear.constants import GAMMA, DELTA

logger = get_logger(__name__)

NAND = "NAND"
PURIFY = "PURIFY"

GATE_ARITIES = {
    NAND: (2, 1),
    PURIFY: (1, 2),
}


class TriValue(Enum):
    ZERO = "0"
    ONE = "1"
    BOT = "bot"

    @classmethod
    def parse(cls, symbol) -> "TriValue":
        symbol = str(symbol).strip()
        if symbol in ("⊥", "BOT", "Bot"):
            return cls.BOT
        return cls(symbol)

    @property
    def rank(self) -> int:
        """ Position in the order ZERO < BOT < ONE. """
        return TRI_ORDER.index(self)

    def __str__(self):
        return self.value


ZERO, ONE, BOT = TriValue.ZERO, TriValue.ONE, TriValue.BOT

TRI_ORDER = (ZERO, BOT, ONE)

Assignment = Dict[str, TriValue]


@dataclass(frozen=True)
class Gate:
    kind: str
    inputs: Tuple[str, ...]
    outputs: Tuple[str, ...]

    def __post_init__(self):
        if self.kind not in GATE_ARITIES:
            raise MalformedCircuitError(f"Unknown gate kind '{self.kind}' (expected NAND or PURIFY)")
        n_in, n_out = GATE_ARITIES[self.kind]
        if len(self.inputs) != n_in or len(self.outputs) != n_out:
            raise MalformedCircuitError(f"{self.kind} takes {n_in} input(s) and {n_out} output(s), "
                                        f"got {len(self.inputs)} and {len(self.outputs)}")

    @property
    def wires(self) -> Tuple[str, ...]:
        return self.inputs + self.outputs


class PureCircuit:
    """
    Wires and gates; cycles are allowed, but every wire is the output of at most one gate.
    Wires that no gate produces are free.
    """

    def __init__(self, wires: Sequence[str], gates: Sequence[Gate]):
        self.wires: Tuple[str, ...] = tuple(wires)
        if len(set(self.wires)) != len(self.wires):
            raise MalformedCircuitError("Duplicate wire names")
        known = set(self.wires)
        self.gates: Tuple[Gate, ...] = tuple(gates)
        self.producer: Dict[str, int] = {}
        for idx, gate in enumerate(self.gates):
            for wire in gate.wires:
                if wire not in known:
                    raise MalformedCircuitError(f"Gate {idx} ({gate.kind}) uses undeclared wire '{wire}'")
            if len(set(gate.outputs)) != len(gate.outputs):
                raise MalformedCircuitError(f"Gate {idx} ({gate.kind}) writes the same wire twice")
            for wire in gate.outputs:
                if wire in self.producer:
                    raise MalformedCircuitError(f"Wire '{wire}' is the output of gates {self.producer[wire]} and {idx}")
                self.producer[wire] = idx

    def __repr__(self):
        return f"<PureCircuit: {len(self.wires)} wires, {len(self.gates)} gates>"

    def __eq__(self, other):
        return isinstance(other, PureCircuit) and self.wires == other.wires and self.gates == other.gates

    @property
    def free_wires(self) -> List[str]:
        return [wire for wire in self.wires if wire not in self.producer]


@dataclass(frozen=True)
class DecodingParams:
    gamma: float = GAMMA
    delta: float = DELTA

    def __post_init__(self):
        if self.gamma < 0 or self.delta < 0 or self.gamma + self.delta >= 1:
            raise ValueError(f"Need gamma, delta >= 0 and gamma + delta < 1, got {self.gamma}, {self.delta}")


def dec(r: float, params: DecodingParams = None) -> TriValue:
    """ ZERO on [0, gamma], ONE on [1 - delta, 1], BOT in between. """
    params = params or DecodingParams()
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"Can only decode values in [0, 1], got {r}")
    if r <= params.gamma:
        return ZERO
    if r >= 1.0 - params.delta:
        return ONE
    return BOT


def check_nand(u: TriValue, v: TriValue, w: TriValue) -> bool:
    if u == ONE and v == ONE and w != ZERO:
        return False
    if (u == ZERO or v == ZERO) and w != ONE:
        return False
    return True


def check_purify(u: TriValue, v: TriValue, w: TriValue) -> bool:
    if u != BOT and (v != u or w != u):
        return False
    return v != BOT or w != BOT


def check_gate(gate: Gate, assignment: Mapping[str, TriValue]) -> bool:
    values = [assignment[wire] for wire in gate.wires]
    if gate.kind == NAND:
        return check_nand(*values)
    return check_purify(*values)


def violated_gates(c: PureCircuit, assignment: Mapping[str, TriValue]) -> List[int]:
    missing = [wire for wire in c.wires if wire not in assignment]
    if missing:
        raise ValueError(f"Assignment misses wire(s) {missing}")
    return [idx for idx, gate in enumerate(c.gates) if not check_gate(gate, assignment)]


def is_solution(c: PureCircuit, assignment: Mapping[str, TriValue]) -> bool:
    return not violated_gates(c, assignment)


def brute_solve(c: PureCircuit, cap: int = None) -> Assignment:
    """
    Returns the first satisfying assignment in lexicographic order over the wires, each wire taking
    ZERO, BOT, ONE in turn. Gates are checked as soon as their last wire is assigned.
    """
    if cap is None:
        from cdsclear.solver import load_solver_config
        cap = load_solver_config().brute_cap
    if len(c.wires) > cap:
        raise CapExceededError("circuit assignments", len(c.wires), cap)

    position = {wire: idx for idx, wire in enumerate(c.wires)}
    closing: List[List[Gate]] = [[] for _ in c.wires]
    for gate in c.gates:
        closing[max(position[wire] for wire in gate.wires)].append(gate)

    assignment: Assignment = {}

    def search(depth: int) -> bool:
        if depth == len(c.wires):
            return True
        wire = c.wires[depth]
        for value in TRI_ORDER:
            assignment[wire] = value
            if all(check_gate(gate, assignment) for gate in closing[depth]) and search(depth + 1):
                return True
        del assignment[wire]
        return False

    if not search(0):
        # every PURE-CIRCUIT instance has a solution
        raise MalformedCircuitError(f"No satisfying assignment for {c}")
    logger.debug("brute_solve %s: %s", c, {w: str(v) for w, v in assignment.items()})
    return dict(assignment)


def format_assignment(assignment: Mapping[str, TriValue], order: Optional[Sequence[str]] = None) -> Dict[str, str]:
    order = order or list(assignment)
    return {wire: str(assignment[wire]) for wire in order}
