"""
Seeded generators of random networks, polynomials, quadratic systems and PURE-CIRCUIT corpora.

Every generator writes one JSON file with the structure

"experiments": [
    {
        "name": <experiment-name>,
        "instances": [
            {"id": <value>, <kind>: <document>},
            ...
        ]
    }
]
"""
import collections
from typing import Dict, List, Tuple

import numpy as np

from cdsclear import get_logger
from cdsclear.circuit import Gate, PureCircuit, NAND, PURIFY
from cdsclear.file_utils import store_file
from cdsclear.formats import circuit_to_dict, network_to_dict, polynomial_to_dict, quadratic_system_to_dict
from cdsclear.network import FinancialNetwork, is_nondegenerate
from cdsclear.polynomial import SparsePolynomial, MAX_DEGREE, normalize_poly

logger = get_logger(__name__)

RANDOM_SEED: int = 42


class InstanceGenerator:
    """
    Collects experiments of instances and stores them as one JSON file.
    """
    name: str = "instances"
    default_count: int = 10

    def __init__(self, seed: int = RANDOM_SEED):
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.instances = dict(experiments=list())

    @property
    def instance_count(self) -> int:
        return sum(len(experiment["instances"]) for experiment in self.instances["experiments"])

    def add_experiment(self, experiment_name: str, **params) -> Dict:
        experiment = collections.OrderedDict(name=experiment_name)
        experiment.update(params)
        experiment["instances"] = list()
        self.instances["experiments"].append(experiment)
        return experiment

    def add_instance(self, experiment: Dict, instance_id) -> Dict:
        instance = dict(id=instance_id)
        experiment["instances"].append(instance)
        return instance

    def on_generate(self, count: int):
        raise NotImplementedError()

    def generate(self, dir_path: str = None, filename: str = None, count: int = None) -> str:
        self.on_generate(self.default_count if count is None else count)
        filename = filename or f"{self.name}.json"
        path = store_file(self.instances, filename, dir_path=dir_path or ".")
        logger.info("Stored %d %s instances in %s", self.instance_count, self.name, path)
        return path


# networks

def random_network(rng: np.random.Generator, n: int, density: float = 0.4, cds_share: float = 0.5) -> FinancialNetwork:
    """
    A random non-degenerate network without default costs: every bank without external assets writes
    at least one debt.
    """
    banks = [f"B{i}" for i in range(n)]
    external = np.where(rng.uniform(size=n) < 0.6, np.round(rng.uniform(0.1, 2.0, size=n), 3), 0.0)
    debts: Dict[Tuple[str, str], float] = {}
    cds: Dict[Tuple[str, str, str], float] = {}
    for i in range(n):
        for j in range(n):
            if i == j or rng.uniform() >= density:
                continue
            notional = float(np.round(rng.uniform(0.1, 2.0), 3))
            references = [k for k in range(n) if k != i]
            if n > 2 and rng.uniform() < cds_share:
                k = int(rng.choice(references))
                cds[(banks[i], banks[j], banks[k])] = notional
            else:
                debts[(banks[i], banks[j])] = notional
        if external[i] == 0.0 and not any(w == banks[i] for w, _ in debts):
            j = int(rng.choice([j for j in range(n) if j != i]))
            debts[(banks[i], banks[j])] = float(np.round(rng.uniform(0.1, 2.0), 3))
    net = FinancialNetwork(banks, external.tolist(), debts, cds)
    assert is_nondegenerate(net)
    return net


class NetworkInstanceGenerator(InstanceGenerator):
    name = "networks"
    default_count = 30

    def on_generate(self, count: int, max_banks: int = 6):
        experiment = self.add_experiment("random_nondegenerate", max_banks=max_banks)
        for idx in range(count):
            n = int(self.rng.integers(2, max_banks + 1))
            instance = self.add_instance(experiment, idx)
            instance["network"] = network_to_dict(random_network(self.rng, n))


# polynomials

def random_polynomial(rng: np.random.Generator, var_count: int, max_degree: int = MAX_DEGREE,
                      max_monomials: int = 5) -> SparsePolynomial:
    """ A random normalized polynomial with at least one monomial. """
    while True:
        monomials = []
        for _ in range(int(rng.integers(1, max_monomials + 1))):
            degree = int(rng.integers(0, max_degree + 1))
            exponents = [0] * var_count
            for _ in range(degree if var_count else 0):
                exponents[int(rng.integers(0, var_count))] += 1
            monomials.append((exponents, float(np.round(rng.uniform(-1.0, 1.0), 3))))
        p = SparsePolynomial(var_count, monomials)
        if not p.is_zero:
            return normalize_poly(p)


class PolynomialInstanceGenerator(InstanceGenerator):
    name = "polynomials"
    default_count = 50

    def on_generate(self, count: int, max_vars: int = 3):
        experiment = self.add_experiment("random_normalized", max_vars=max_vars, max_degree=MAX_DEGREE)
        for idx in range(count):
            var_count = int(self.rng.integers(1, max_vars + 1))
            instance = self.add_instance(experiment, idx)
            instance["polynomial"] = polynomial_to_dict(random_polynomial(self.rng, var_count))


def planted_quadratic_system(rng: np.random.Generator, var_count: int,
                             size: int) -> Tuple[List[SparsePolynomial], List[float]]:
    """
    Quadratic polynomials that all vanish at a random root in the unit cube: each is a random quadratic
    part q with the constant term -q(root).
    """
    root = np.round(rng.uniform(0.0, 1.0, size=var_count), 3)
    system = []
    for _ in range(size):
        monomials = []
        for i in range(var_count):
            monomials.append((tuple(int(j == i) for j in range(var_count)), float(np.round(rng.uniform(-1, 1), 3))))
            k = int(rng.integers(i, var_count))
            exponents = [0] * var_count
            exponents[i] += 1
            exponents[k] += 1
            monomials.append((tuple(exponents), float(np.round(rng.uniform(-1, 1), 3))))
        q = SparsePolynomial(var_count, monomials, max_degree=2)
        system.append(SparsePolynomial(var_count, list(q.monomials) + [((0,) * var_count, -q.evaluate(root))],
                                       max_degree=2))
    return system, root.tolist()


class QuadraticSystemGenerator(InstanceGenerator):
    name = "quadratic"
    default_count = 10

    def on_generate(self, count: int, max_vars: int = 3):
        experiment = self.add_experiment("planted_root", max_vars=max_vars)
        for idx in range(count):
            var_count = int(self.rng.integers(1, max_vars + 1))
            system, root = planted_quadratic_system(self.rng, var_count, int(self.rng.integers(1, 3)))
            instance = self.add_instance(experiment, idx)
            instance["system"] = quadratic_system_to_dict(system, var_count, root)


# circuits

def nand_selfloop() -> PureCircuit:
    return PureCircuit(["w"], [Gate(NAND, ("w", "w"), ("w",))])


def purify_chain(length: int) -> PureCircuit:
    """ u0 -> PURIFY -> (u1, v1) -> PURIFY -> (u2, v2) ... """
    wires = ["u0"]
    gates = []
    for i in range(1, length + 1):
        wires += [f"u{i}", f"v{i}"]
        gates.append(Gate(PURIFY, (f"u{i - 1}",), (f"u{i}", f"v{i}")))
    return PureCircuit(wires, gates)


def random_circuit(rng: np.random.Generator, max_gates: int = 8, max_free: int = 2,
                   max_wires: int = 12) -> PureCircuit:
    """ Gates with fresh output wires whose inputs are drawn from all wires, so cycles occur. """
    while True:
        kinds = [NAND if rng.uniform() < 0.6 else PURIFY for _ in range(int(rng.integers(1, max_gates + 1)))]
        free = int(rng.integers(0, max_free + 1))
        wires = [f"x{i}" for i in range(free)]
        outputs = []
        for idx, kind in enumerate(kinds):
            names = (f"g{idx}",) if kind == NAND else (f"g{idx}a", f"g{idx}b")
            outputs.append(names)
            wires += names
        if len(wires) <= max_wires:
            break
    gates = []
    for kind, names in zip(kinds, outputs):
        arity = 2 if kind == NAND else 1
        inputs = tuple(wires[int(rng.integers(0, len(wires)))] for _ in range(arity))
        gates.append(Gate(kind, inputs, names))
    return PureCircuit(wires, gates)


def circuit_corpus(seed: int = RANDOM_SEED, count: int = 20) -> List[Tuple[str, PureCircuit]]:
    """ The NAND self-loop, PURIFY chains of length 1 to 3 and random circuits, `count` in total. """
    rng = np.random.default_rng(seed)
    corpus = [("nand_selfloop", nand_selfloop())]
    corpus += [(f"purify_chain_{length}", purify_chain(length)) for length in (1, 2, 3)]
    idx = 0
    while len(corpus) < count:
        corpus.append((f"random_{idx}", random_circuit(rng)))
        idx += 1
    return corpus[:count]


class CircuitCorpusGenerator(InstanceGenerator):
    name = "circuits"
    default_count = 24

    def on_generate(self, count: int):
        experiment = self.add_experiment("pure_circuit_corpus", max_gates=8)
        for name, circuit in circuit_corpus(self.seed, count):
            instance = self.add_instance(experiment, name)
            instance["circuit"] = circuit_to_dict(circuit)


if __name__ == '__main__':
    for generator in (NetworkInstanceGenerator, PolynomialInstanceGenerator, QuadraticSystemGenerator,
                      CircuitCorpusGenerator):
        generator().generate(dir_path="instances")
