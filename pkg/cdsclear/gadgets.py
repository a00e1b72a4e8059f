"""
Network gadgets: small fragments whose clearing behavior realizes a fixed relation between the
recovery rates of their input and output banks.

Every fragment writes its contracts against the shared scaffolding banks SOURCE and SINK. Inputs are
placeholder banks that are renamed to real banks by `bind` (or by `absorb` when a fragment is nested
into a larger one); `finalize` provisions the source and sink and returns a FinancialNetwork.
"""
import copy
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from cdsclear import get_logger, UnknownHandleError
from cdsclear.constants import GAMMA, EPS, PHI
from cdsclear.network import FinancialNetwork, CdsKey, DebtKey, truncate

logger = get_logger(__name__)

SOURCE = "s"
SINK = "t"


@dataclass(frozen=True)
class GadgetParams:
    """
    Gadget constants: NAND notionals c1 = c2 = 1 / (1 - gamma), PURIFY thresholds phi and
    eta = (1 - phi) / (1 - gamma) + eps, the default constant value zeta and inverter weight, the
    cut-off thresholds K < L (also used by OR) and the infeasibility gadget's endowment.
    """
    gamma: float = GAMMA
    eps: float = EPS
    phi: float = PHI
    constant_value: float = 0.3
    inverter_weight: float = 3.0
    cutoff_low: float = 0.25
    cutoff_high: float = 0.75
    infeasibility_endowment: float = 0.8

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0.0 <= self.constant_value <= 1.0:
            raise ValueError(f"Constant must lie in [0, 1], got {self.constant_value}")
        if self.inverter_weight <= 0:
            raise ValueError(f"Inverter weight must be positive, got {self.inverter_weight}")
        if not 0.0 <= self.cutoff_low < self.cutoff_high <= 1.0:
            raise ValueError(f"Cut-off thresholds must satisfy 0 <= K < L <= 1, "
                             f"got {self.cutoff_low}, {self.cutoff_high}")
        if self.eta >= 1.0:
            raise ValueError(f"eta = {self.eta} must be below 1")

    @property
    def c1(self) -> float:
        return 1.0 / (1.0 - self.gamma)

    @property
    def c2(self) -> float:
        return 1.0 / (1.0 - self.gamma)

    @property
    def eta(self) -> float:
        return (1.0 - self.phi) / (1.0 - self.gamma) + self.eps

    @staticmethod
    def infeasibility_thresholds(alpha: float) -> Tuple[float, float]:
        return (3.0 * alpha + 1.0) / 4.0, (alpha + 3.0) / 4.0


class BankNamer:
    """ Hands out gadget-instance prefixes like `nand1`, `nand2`, `sum1` within one pipeline. """

    def __init__(self, scope: str = ""):
        self.scope = scope
        self._counters: Dict[str, int] = defaultdict(int)

    def fresh(self, kind: str) -> str:
        self._counters[kind] += 1
        name = f"{kind}{self._counters[kind]}"
        return f"{self.scope}.{name}" if self.scope else name


class NetworkFragment:
    """
    Banks and contracts of a gadget, with named input and output handles.
    """

    def __init__(self, kind: str, namer: BankNamer = None):
        self.kind = kind
        self.namer = namer or BankNamer()
        self.prefix = self.namer.fresh(kind)
        self.banks: List[str] = []
        self.external: Dict[str, float] = {}
        self.debts: Dict[DebtKey, float] = {}
        self.cds: Dict[CdsKey, float] = {}
        self.inputs: Dict[str, str] = {}
        self.outputs: Dict[str, str] = {}
        self.required_alpha: Optional[float] = None

    def __repr__(self):
        return f"<NetworkFragment {self.prefix}: {len(self.banks)} banks, " \
               f"inputs {sorted(self.inputs)}, outputs {sorted(self.outputs)}>"

    def copy(self) -> "NetworkFragment":
        return copy.deepcopy(self)

    # construction

    def add_bank(self, local: str, external: float = 0.0) -> str:
        bank = f"{self.prefix}.{local}"
        if bank in self.external:
            raise ValueError(f"Bank '{bank}' already exists")
        self.banks.append(bank)
        self.external[bank] = float(external)
        return bank

    def add_input(self, handle: str) -> str:
        placeholder = f"{self.prefix}:{handle}"
        self.inputs[handle] = placeholder
        return placeholder

    def add_debt(self, writer: str, holder: str, notional: float):
        if notional > 0:
            self.debts[(writer, holder)] = self.debts.get((writer, holder), 0.0) + notional

    def add_cds(self, writer: str, holder: str, reference: str, notional: float):
        if notional > 0:
            key = (writer, holder, reference)
            self.cds[key] = self.cds.get(key, 0.0) + notional

    def add_inverter(self, local: str, reference: str, weight: float) -> str:
        """ Adds bank `local` with r = min(1, weight * (1 - r_reference)). """
        bank = self.add_bank(local)
        self.add_cds(SOURCE, bank, reference, weight)
        self.add_debt(bank, SINK, 1.0)
        return bank

    # composition

    def bind(self, handle: str, bank: str) -> "NetworkFragment":
        """
        Replaces the input placeholder `handle` by `bank` in every contract. Contracts that coincide
        after the renaming are merged by adding their notionals.
        """
        if handle not in self.inputs:
            raise UnknownHandleError(handle, self.inputs)
        placeholder = self.inputs.pop(handle)

        def rename(b):
            return bank if b == placeholder else b

        debts, cds = self.debts, self.cds
        self.debts, self.cds = {}, {}
        for (writer, holder), notional in debts.items():
            self.add_debt(rename(writer), rename(holder), notional)
        for (writer, holder, reference), notional in cds.items():
            self.add_cds(rename(writer), rename(holder), rename(reference), notional)
        for name, out in list(self.outputs.items()):
            self.outputs[name] = rename(out)
        return self

    def absorb(self, sub: "NetworkFragment", **bindings: str) -> Dict[str, str]:
        """
        Merges `sub` into this fragment, binding its inputs by keyword. Inputs of `sub` that are not
        bound become inputs of this fragment under the handle `<sub prefix>.<handle>`.

        :return: the output handles of `sub`
        """
        for handle, bank in bindings.items():
            sub.bind(handle, bank)
        for bank in sub.banks:
            if bank in self.external:
                raise ValueError(f"Bank '{bank}' already exists")
            self.banks.append(bank)
            self.external[bank] = sub.external[bank]
        for (writer, holder), notional in sub.debts.items():
            self.add_debt(writer, holder, notional)
        for (writer, holder, reference), notional in sub.cds.items():
            self.add_cds(writer, holder, reference, notional)
        for handle, placeholder in sub.inputs.items():
            self.inputs[f"{sub.prefix}.{handle}"] = placeholder
        if sub.required_alpha is not None:
            self.required_alpha = sub.required_alpha
        return dict(sub.outputs)

    def finalize(self, alpha: float = None, beta: float = 1.0) -> FinancialNetwork:
        """
        Provisions the source with twice the notional it writes (including its unit debt to the sink)
        and the sink with external assets 1.
        """
        if self.inputs:
            raise ValueError(f"Cannot finalize {self.prefix}: unbound inputs {sorted(self.inputs)}")
        if alpha is None:
            alpha = 1.0 if self.required_alpha is None else self.required_alpha
        if self.required_alpha is not None and not math.isclose(alpha, self.required_alpha):
            raise ValueError(f"Fragment {self.prefix} requires alpha = {self.required_alpha}, got {alpha}")
        debts = dict(self.debts)
        debts[(SOURCE, SINK)] = debts.get((SOURCE, SINK), 0.0) + 1.0
        written = sum(c for (w, _), c in debts.items() if w == SOURCE) \
            + sum(c for (w, _, _), c in self.cds.items() if w == SOURCE)
        external = dict(self.external)
        external[SOURCE] = 2.0 * written
        external[SINK] = 1.0
        return FinancialNetwork(self.banks + [SOURCE, SINK], external, debts, self.cds, alpha=alpha, beta=beta)


# arithmetic gadgets

def inverter(weight: float = None, namer: BankNamer = None, params: GadgetParams = None) -> NetworkFragment:
    """ r_v = min(1, weight (1 - r_u)) """
    weight = (params or GadgetParams()).inverter_weight if weight is None else weight
    if weight <= 0:
        raise ValueError(f"Inverter weight must be positive, got {weight}")
    frag = NetworkFragment("inverter", namer)
    u = frag.add_input("u")
    frag.outputs["v"] = frag.add_inverter("v", u, weight)
    return frag


def constant(zeta: float = None, namer: BankNamer = None, params: GadgetParams = None) -> NetworkFragment:
    zeta = (params or GadgetParams()).constant_value if zeta is None else zeta
    if not 0.0 <= zeta <= 1.0:
        raise ValueError(f"Constant must lie in [0, 1], got {zeta}")
    frag = NetworkFragment("constant", namer)
    v = frag.add_bank("v")
    frag.add_debt(SOURCE, v, zeta)
    frag.add_debt(v, SINK, 1.0)
    frag.outputs["v"] = v
    return frag


def sum_gadget(namer: BankNamer = None) -> NetworkFragment:
    """ r_w = min(1, r_u + r_v) """
    frag = NetworkFragment("sum", namer)
    u, v = frag.add_input("u"), frag.add_input("v")
    a = frag.add_inverter("A", u, 1.0)
    b = frag.add_inverter("B", v, 1.0)
    w = frag.add_bank("w")
    frag.add_cds(SOURCE, w, a, 1.0)
    frag.add_cds(SOURCE, w, b, 1.0)
    frag.add_debt(w, SINK, 1.0)
    frag.outputs["w"] = w
    return frag


def difference(namer: BankNamer = None) -> NetworkFragment:
    """ r_w = max(0, r_v - r_u) """
    frag = NetworkFragment("difference", namer)
    u, v = frag.add_input("u"), frag.add_input("v")
    a = frag.add_inverter("A", u, 1.0)
    b = frag.add_bank("B")
    frag.add_cds(SOURCE, b, a, 1.0)
    frag.add_cds(SOURCE, b, v, 1.0)
    frag.add_debt(b, SINK, 1.0)
    frag.outputs["w"] = frag.add_inverter("w", b, 1.0)
    return frag


def half_product(namer: BankNamer = None) -> NetworkFragment:
    """
    r_w = r_u * r_v / 2. Bank C receives r_u against a liability of 2 (a debt, a CDS on v and a CDS on B),
    so r_C = r_u / 2, and w is paid r_C * (1 - r_B) by C.
    """
    frag = NetworkFragment("half_product", namer)
    u, v = frag.add_input("u"), frag.add_input("v")
    a = frag.add_inverter("A", u, 1.0)
    b = frag.add_inverter("B", v, 1.0)
    c = frag.add_bank("C")
    w = frag.add_bank("w")
    frag.add_cds(SOURCE, c, a, 1.0)
    frag.add_debt(c, SINK, 1.0)
    frag.add_cds(c, SINK, v, 1.0)
    frag.add_cds(c, w, b, 1.0)
    frag.add_debt(w, SINK, 1.0)
    frag.outputs["C"] = c
    frag.outputs["w"] = w
    return frag


def product(namer: BankNamer = None) -> NetworkFragment:
    """ r_w = r_u * r_v as the sum of two half products. """
    frag = NetworkFragment("product", namer)
    u, v = frag.add_input("u"), frag.add_input("v")
    first = frag.absorb(half_product(frag.namer), u=u, v=v)
    second = frag.absorb(half_product(frag.namer), u=u, v=v)
    frag.outputs["w"] = frag.absorb(sum_gadget(frag.namer), u=first["w"], v=second["w"])["w"]
    return frag


def input_pair(namer: BankNamer = None) -> NetworkFragment:
    """ Two banks owing each other 1; every r_u = r_x in [0, 1] is clearing. """
    frag = NetworkFragment("input_pair", namer)
    u = frag.add_bank("u")
    x = frag.add_bank("x")
    frag.add_debt(u, x, 1.0)
    frag.add_debt(x, u, 1.0)
    frag.outputs["u"] = u
    frag.outputs["x"] = x
    return frag


def cutoff(low: float = None, high: float = None, namer: BankNamer = None,
           params: GadgetParams = None) -> NetworkFragment:
    """ r_u <= low gives r_v = 0 and r_u >= high gives r_v = 1, linear in between. """
    params = params or GadgetParams()
    low = params.cutoff_low if low is None else low
    high = params.cutoff_high if high is None else high
    if not 0.0 <= low < high <= 1.0:
        raise ValueError(f"Cut-off thresholds must satisfy 0 <= K < L <= 1, got K={low}, L={high}")
    frag = NetworkFragment("cutoff", namer)
    u = frag.add_input("u")
    a = frag.add_inverter("A", u, 1.0 / (1.0 - low))
    frag.outputs["v"] = frag.add_inverter("v", a, (1.0 - low) / (high - low))
    return frag


def or_gate(params: GadgetParams = None, namer: BankNamer = None) -> NetworkFragment:
    params = params or GadgetParams()
    frag = NetworkFragment("or", namer)
    u, v = frag.add_input("u"), frag.add_input("v")
    a = frag.absorb(cutoff(namer=frag.namer, params=params), u=u)["v"]
    b = frag.absorb(cutoff(namer=frag.namer, params=params), u=v)["v"]
    frag.outputs["w"] = frag.absorb(sum_gadget(frag.namer), u=a, v=b)["w"]
    return frag


def infeasibility(alpha: float, params: GadgetParams = None, namer: BankNamer = None) -> NetworkFragment:
    """
    Has a clearing vector (with r_A = 1, r_B = 4 alpha / 5, r_C = 0) when r_u >= 3/4 and none when
    r_u <= 1/4. The enclosing network must use the same alpha with beta = 1.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"The infeasibility gadget needs alpha in [0, 1), got {alpha}")
    params = params or GadgetParams()
    frag = NetworkFragment("infeasibility", namer)
    frag.required_alpha = float(alpha)
    u = frag.add_input("u")
    feedback = frag.add_input("feedback")
    a = frag.absorb(or_gate(params, frag.namer), u=u, v=feedback)["w"]
    b = frag.add_bank("B", external=params.infeasibility_endowment)
    frag.add_debt(b, SINK, 1.0)
    frag.add_cds(SOURCE, b, a, 1.0)
    low, high = params.infeasibility_thresholds(alpha)
    c = frag.absorb(cutoff(low, high, frag.namer), u=b)["v"]
    frag.bind("feedback", c)
    frag.outputs.update(A=a, B=b, C=c)
    return frag


def discontinuity(namer: BankNamer = None) -> NetworkFragment:
    """ r_v = 1 when r_u = 0, else (alpha + 1 - r_u) / 2. """
    frag = NetworkFragment("discontinuity", namer)
    u = frag.add_input("u")
    v = frag.add_bank("v", external=1.0)
    frag.add_debt(v, SINK, 2.0)
    frag.add_cds(SOURCE, v, u, 1.0)
    frag.outputs["v"] = v
    return frag


def nand(params: GadgetParams = None, namer: BankNamer = None) -> NetworkFragment:
    """ r_w = min(1, c1 (1 - r_u) + c2 (1 - r_v)) """
    params = params or GadgetParams()
    frag = NetworkFragment("nand", namer)
    u, v = frag.add_input("u"), frag.add_input("v")
    w = frag.add_bank("w")
    frag.add_cds(SOURCE, w, u, params.c1)
    frag.add_cds(SOURCE, w, v, params.c2)
    frag.add_debt(w, SINK, 1.0)
    frag.outputs["w"] = w
    return frag


def purify(params: GadgetParams = None, namer: BankNamer = None) -> NetworkFragment:
    params = params or GadgetParams()
    frag = NetworkFragment("purify", namer)
    u = frag.add_input("u")
    a = frag.add_inverter("A", u, 1.0 / (1.0 - params.phi))
    v = frag.add_inverter("v", a, 1.0 / (1.0 - params.gamma))
    b = frag.add_inverter("B", u, 1.0 / (1.0 - params.gamma))
    w = frag.add_inverter("w", b, 1.0 / (1.0 - params.eta))
    frag.outputs.update(A=a, B=b, v=v, w=w)
    return frag


def drive(frag: NetworkFragment, handle: str, value: float) -> NetworkFragment:
    """
    :return: a copy of `frag` with input `handle` fed by a constant gadget of the given value
    """
    if handle not in frag.inputs:
        raise UnknownHandleError(handle, frag.inputs)
    closed = frag.copy()
    source = closed.absorb(constant(value, closed.namer))["v"]
    closed.bind(handle, source)
    return closed


# verification harness

@dataclass(frozen=True)
class GadgetContract:
    """
    A gadget builder with the closed-form relation between its driven inputs and its outputs.
    """
    name: str
    build: Callable[[BankNamer], NetworkFragment]
    inputs: Tuple[str, ...]
    expected: Callable[..., Dict[str, float]]
    depends_on_alpha: bool = False


def gadget_contracts(params: GadgetParams = None) -> List[GadgetContract]:
    params = params or GadgetParams()
    c1, c2, phi, gamma, eta = params.c1, params.c2, params.phi, params.gamma, params.eta
    zeta, weight, low, high = params.constant_value, params.inverter_weight, params.cutoff_low, params.cutoff_high
    return [
        GadgetContract("inverter", lambda n: inverter(namer=n, params=params), ("u",),
                       lambda alpha, u: {"v": truncate(weight * (1.0 - u))}),
        GadgetContract("constant", lambda n: constant(namer=n, params=params), (),
                       lambda alpha: {"v": zeta}),
        GadgetContract("sum", sum_gadget, ("u", "v"),
                       lambda alpha, u, v: {"w": truncate(u + v)}),
        GadgetContract("difference", difference, ("u", "v"),
                       lambda alpha, u, v: {"w": truncate(v - u)}),
        GadgetContract("half_product", half_product, ("u", "v"),
                       lambda alpha, u, v: {"w": u * v / 2.0, "C": u / 2.0}),
        GadgetContract("product", product, ("u", "v"),
                       lambda alpha, u, v: {"w": u * v}),
        GadgetContract("cutoff", lambda n: cutoff(namer=n, params=params), ("u",),
                       lambda alpha, u: {"v": truncate((1.0 - low) / (high - low) *
                                                       (1.0 - truncate((1.0 - u) / (1.0 - low))))}),
        GadgetContract("nand", lambda n: nand(params, n), ("u", "v"),
                       lambda alpha, u, v: {"w": truncate(c1 * (1.0 - u) + c2 * (1.0 - v))}),
        GadgetContract("purify", lambda n: purify(params, n), ("u",),
                       lambda alpha, u: {"A": truncate((1.0 - u) / (1.0 - phi)),
                                         "v": truncate((1.0 - truncate((1.0 - u) / (1.0 - phi))) / (1.0 - gamma)),
                                         "B": truncate((1.0 - u) / (1.0 - gamma)),
                                         "w": truncate((1.0 - truncate((1.0 - u) / (1.0 - gamma))) / (1.0 - eta))}),
        GadgetContract("discontinuity", discontinuity, ("u",),
                       lambda alpha, u: {"v": 1.0 if u == 0.0 else (alpha + 1.0 - u) / 2.0},
                       depends_on_alpha=True),
    ]


@dataclass
class GadgetCheck:
    name: str
    alpha: float
    points: int
    worst_deviation: float = 0.0
    worst_point: Optional[Tuple[float, ...]] = None

    def passed(self, tol: float) -> bool:
        return self.worst_deviation <= tol


def evaluate_driven(frag: NetworkFragment, values: Mapping[str, float], alpha: float = 1.0) -> Dict[str, float]:
    """
    Drives the given inputs of `frag`, forward-evaluates the finalized network and returns the
    recovery rate of every output handle.
    """
    from cdsclear.solver import forward_eval

    closed = frag
    for handle, value in values.items():
        closed = drive(closed, handle, value)
    net = closed.finalize(alpha=alpha)
    r = forward_eval(net)
    return {handle: float(r[net.index[bank]]) for handle, bank in closed.outputs.items()}


def verify_gadget(contract: GadgetContract, alphas: Sequence[float] = (0.0, 0.3, 0.7, 1.0),
                  grid_points: int = 21) -> List[GadgetCheck]:
    """
    Drives every input over an evenly spaced grid of [0, 1] and records, per alpha, the worst deviation
    between the forward-evaluated outputs and the closed-form relation.
    """
    grid = np.linspace(0.0, 1.0, grid_points)
    checks = []
    for alpha in alphas:
        check = GadgetCheck(contract.name, float(alpha), 0)
        for point in np.array(np.meshgrid(*([grid] * len(contract.inputs)), indexing="ij")).reshape(
                len(contract.inputs), -1).T if contract.inputs else [()]:
            point = tuple(float(x) for x in point)
            observed = evaluate_driven(contract.build(BankNamer()), dict(zip(contract.inputs, point)), alpha)
            expected = contract.expected(alpha, *point)
            deviation = max(abs(observed[handle] - value) for handle, value in expected.items())
            check.points += 1
            if deviation > check.worst_deviation:
                check.worst_deviation, check.worst_point = deviation, point
        logger.debug("%s at alpha=%s: worst deviation %.3g over %d points", contract.name, alpha,
                     check.worst_deviation, check.points)
        checks.append(check)
    return checks


def verify_all(params: GadgetParams = None, alphas: Sequence[float] = (0.0, 0.3, 0.7, 1.0),
               grid_points: int = 21, progress: bool = False) -> List[GadgetCheck]:
    checks = []
    for contract in tqdm(gadget_contracts(params), desc="Gadgets", disable=not progress):
        checks.extend(verify_gadget(contract, alphas, grid_points))
    return checks
