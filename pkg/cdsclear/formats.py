"""
JSON documents for networks, circuits, polynomials and wire maps, and the whitespace separated
recovery vector format. Parse errors carry the JSON path of the offending field.
"""
import json
import math
import numbers
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from cdsclear import FormatError, MalformedCircuitError, NetworkValidationError, PolynomialDegreeError
from cdsclear.circuit import Gate, PureCircuit
from cdsclear.network import FinancialNetwork
from cdsclear.polynomial import SparsePolynomial
from cdsclear.reductions import CompiledArtifact

Document = Union[str, Dict[str, Any]]


def _load(doc: Document) -> Dict[str, Any]:
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON: {e.msg} (line {e.lineno}, column {e.colno})")
    if not isinstance(doc, dict):
        raise FormatError("document must be a JSON object")
    return doc


def _field(obj: Dict[str, Any], key: str, location: str, default=None, required: bool = True):
    if not isinstance(obj, dict):
        raise FormatError("expected an object", location)
    if key not in obj:
        if required:
            raise FormatError(f"missing field '{key}'", location)
        return default
    return obj[key]


def _number(value, location: str, nonnegative: bool = True) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not math.isfinite(value):
        raise FormatError(f"expected a finite number, got {value!r}", location)
    if nonnegative and value < 0:
        raise FormatError(f"must be nonnegative, got {value}", location)
    return float(value)


def _name(value, location: str) -> str:
    if not isinstance(value, str) or not value:
        raise FormatError(f"expected a non-empty string, got {value!r}", location)
    return value


def _list(value, location: str) -> List:
    if not isinstance(value, list):
        raise FormatError(f"expected a list, got {type(value).__name__}", location)
    return value


def _literal(value: float):
    """ Integral values are written as JSON integers. """
    value = float(value)
    return int(value) if value.is_integer() else value


def dumps(data: Dict[str, Any]) -> str:
    return json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


# networks

def parse_network(doc: Document) -> FinancialNetwork:
    doc = _load(doc)
    banks, external = [], {}
    for idx, entry in enumerate(_list(_field(doc, "banks", ""), "banks")):
        location = f"banks[{idx}]"
        bank = _name(_field(entry, "id", location), f"{location}.id")
        if bank in external:
            raise FormatError(f"duplicate bank '{bank}'", f"{location}.id")
        banks.append(bank)
        external[bank] = _number(_field(entry, "external", location, default=0.0, required=False),
                                 f"{location}.external")

    def known(value, location):
        bank = _name(value, location)
        if bank not in external:
            raise FormatError(f"unknown bank '{bank}'", location)
        return bank

    debts: Dict[Tuple[str, str], float] = {}
    for idx, entry in enumerate(_list(_field(doc, "debts", "", default=[], required=False), "debts")):
        location = f"debts[{idx}]"
        key = (known(_field(entry, "from", location), f"{location}.from"),
               known(_field(entry, "to", location), f"{location}.to"))
        if key in debts:
            raise FormatError(f"duplicate debt {key[0]} -> {key[1]}", location)
        debts[key] = _number(_field(entry, "notional", location), f"{location}.notional")

    cds: Dict[Tuple[str, str, str], float] = {}
    for idx, entry in enumerate(_list(_field(doc, "cds", "", default=[], required=False), "cds")):
        location = f"cds[{idx}]"
        key = (known(_field(entry, "from", location), f"{location}.from"),
               known(_field(entry, "to", location), f"{location}.to"),
               known(_field(entry, "reference", location), f"{location}.reference"))
        if key in cds:
            raise FormatError(f"duplicate CDS {key[0]} -> {key[1]} on {key[2]}", location)
        cds[key] = _number(_field(entry, "notional", location), f"{location}.notional")

    costs = {}
    for name in ("alpha", "beta"):
        value = _number(_field(doc, name, "", default=1.0, required=False), name)
        if value > 1.0:
            raise FormatError(f"must lie in [0, 1], got {value}", name)
        costs[name] = value
    try:
        return FinancialNetwork(banks, external, debts, cds, **costs)
    except NetworkValidationError as e:
        raise FormatError(str(e), e.field)


def network_to_dict(net: FinancialNetwork) -> Dict[str, Any]:
    return {
        "banks": [{"id": bank, "external": _literal(net.external[i])} for i, bank in enumerate(net.banks)],
        "debts": [{"from": w, "to": h, "notional": _literal(c)} for (w, h), c in net.debts.items()],
        "cds": [{"from": w, "to": h, "reference": k, "notional": _literal(c)} for (w, h, k), c in net.cds.items()],
        "alpha": _literal(net.alpha),
        "beta": _literal(net.beta),
    }


def serialize_network(net: FinancialNetwork) -> str:
    return dumps(network_to_dict(net))


# circuits

def parse_circuit(doc: Document) -> PureCircuit:
    doc = _load(doc)
    wires = [_name(w, f"wires[{idx}]") for idx, w in enumerate(_list(_field(doc, "wires", ""), "wires"))]
    gates = []
    for idx, entry in enumerate(_list(_field(doc, "gates", "", default=[], required=False), "gates")):
        location = f"gates[{idx}]"
        kind = _name(_field(entry, "kind", location), f"{location}.kind").upper()
        inputs = tuple(_name(w, f"{location}.inputs") for w in _list(_field(entry, "inputs", location),
                                                                    f"{location}.inputs"))
        outputs = tuple(_name(w, f"{location}.outputs") for w in _list(_field(entry, "outputs", location),
                                                                      f"{location}.outputs"))
        try:
            gates.append(Gate(kind, inputs, outputs))
        except MalformedCircuitError as e:
            raise FormatError(str(e), location)
    try:
        return PureCircuit(wires, gates)
    except MalformedCircuitError as e:
        raise FormatError(str(e), "gates")


def circuit_to_dict(c: PureCircuit) -> Dict[str, Any]:
    return {
        "wires": list(c.wires),
        "gates": [{"kind": g.kind, "inputs": list(g.inputs), "outputs": list(g.outputs)} for g in c.gates],
    }


def serialize_circuit(c: PureCircuit) -> str:
    return dumps(circuit_to_dict(c))


# polynomials

def _parse_monomials(entries, var_count: int, location: str) -> List[Tuple[Tuple[int, ...], float]]:
    monomials = []
    for idx, entry in enumerate(_list(entries, location)):
        where = f"{location}[{idx}]"
        exponents = _list(_field(entry, "exponents", where), f"{where}.exponents")
        if len(exponents) != var_count:
            raise FormatError(f"expected {var_count} exponents, got {len(exponents)}", f"{where}.exponents")
        for e in exponents:
            if isinstance(e, bool) or not isinstance(e, int) or e < 0:
                raise FormatError(f"exponents must be nonnegative integers, got {e!r}", f"{where}.exponents")
        coefficient = _number(_field(entry, "coefficient", where), f"{where}.coefficient", nonnegative=False)
        monomials.append((tuple(exponents), coefficient))
    return monomials


def _var_count(doc: Dict[str, Any]) -> int:
    var_count = _field(doc, "var_count", "")
    if isinstance(var_count, bool) or not isinstance(var_count, int) or var_count < 0:
        raise FormatError(f"expected a nonnegative integer, got {var_count!r}", "var_count")
    return var_count


def parse_polynomial(doc: Document) -> SparsePolynomial:
    doc = _load(doc)
    var_count = _var_count(doc)
    monomials = _parse_monomials(_field(doc, "monomials", ""), var_count, "monomials")
    try:
        return SparsePolynomial(var_count, monomials)
    except PolynomialDegreeError as e:
        raise FormatError(str(e), "monomials")


def polynomial_to_dict(p: SparsePolynomial) -> Dict[str, Any]:
    return {
        "var_count": p.var_count,
        "monomials": [{"exponents": list(e), "coefficient": _literal(c)} for e, c in p.monomials],
    }


def serialize_polynomial(p: SparsePolynomial) -> str:
    return dumps(polynomial_to_dict(p))


def parse_quadratic_system(doc: Document) -> Tuple[List[SparsePolynomial], Optional[List[float]]]:
    """
    :return: the polynomials of the system and its planted root, if the document records one
    """
    doc = _load(doc)
    var_count = _var_count(doc)
    system = []
    for idx, entry in enumerate(_list(_field(doc, "polynomials", ""), "polynomials")):
        location = f"polynomials[{idx}]"
        monomials = _parse_monomials(_field(entry, "monomials", location), var_count, f"{location}.monomials")
        try:
            system.append(SparsePolynomial(var_count, monomials, max_degree=2))
        except PolynomialDegreeError as e:
            raise FormatError(str(e), location)
    root = _field(doc, "planted_root", "", required=False)
    if root is not None:
        root = [_number(v, "planted_root") for v in _list(root, "planted_root")]
    return system, root


def quadratic_system_to_dict(system: Sequence[SparsePolynomial], var_count: int,
                             planted_root: Optional[Sequence[float]] = None) -> Dict[str, Any]:
    doc = {"var_count": var_count,
           "polynomials": [{"monomials": polynomial_to_dict(p)["monomials"]} for p in system]}
    if planted_root is not None:
        doc["planted_root"] = [float(v) for v in planted_root]
    return doc


# wire maps

def wire_map_to_dict(art: CompiledArtifact) -> Dict[str, Any]:
    doc = {"kind": art.kind, "alpha": _literal(art.alpha), "wires": dict(art.wire_map)}
    if art.squaring_depth is not None:
        doc["squaring_depth"] = art.squaring_depth
    if art.circuit is not None:
        doc["circuit"] = circuit_to_dict(art.circuit)
    if art.polynomial is not None:
        doc["polynomial"] = polynomial_to_dict(art.polynomial)
    return doc


def serialize_wire_map(art: CompiledArtifact) -> str:
    return dumps(wire_map_to_dict(art))


def parse_wire_map(doc: Document, net: FinancialNetwork) -> CompiledArtifact:
    """ Rebuilds the artifact of a compiled network from its sidecar document. """
    doc = _load(doc)
    kind = _name(_field(doc, "kind", ""), "kind")
    wires = _field(doc, "wires", "")
    if not isinstance(wires, dict):
        raise FormatError("expected an object", "wires")
    for wire, bank in wires.items():
        if _name(bank, f"wires.{wire}") not in net.index:
            raise FormatError(f"unknown bank '{bank}'", f"wires.{wire}")
    circuit = _field(doc, "circuit", "", required=False)
    polynomial = _field(doc, "polynomial", "", required=False)
    return CompiledArtifact(
        net, dict(wires), kind,
        alpha=_number(_field(doc, "alpha", "", default=1.0, required=False), "alpha"),
        squaring_depth=_field(doc, "squaring_depth", "", required=False),
        circuit=parse_circuit(circuit) if circuit is not None else None,
        polynomial=parse_polynomial(polynomial) if polynomial is not None else None,
    )


# recovery vectors

def parse_recovery(text: str, net: Optional[FinancialNetwork] = None) -> np.ndarray:
    """ Whitespace separated decimals in bank declaration order. """
    tokens = text.split()
    values = []
    for idx, token in enumerate(tokens):
        try:
            value = float(token)
        except ValueError:
            raise FormatError(f"not a number: {token!r}", f"r[{idx}]")
        if not math.isfinite(value):
            raise FormatError(f"not a finite number: {token!r}", f"r[{idx}]")
        values.append(value)
    if net is not None and len(values) != net.n:
        raise FormatError(f"expected {net.n} values (one per bank), got {len(values)}", "r")
    return np.array(values, dtype=float)


def format_recovery(r: Sequence[float]) -> str:
    return " ".join(repr(float(v)) for v in r)
