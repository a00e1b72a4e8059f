"""
Solvers for clearing and approximate clearing recovery vectors on small networks.

* iterate_F / iterate_f: damped fixed-point iteration of the update map F (or the continuous map f)
* map_G / map_g / solve_eps_approx: the auxiliary maps with a (1 + eps) solvency threshold and a
  restart search for their almost fixed points, truncated into approximate clearing vectors
* enumerate_patterns: exhaustive case analysis over solvency patterns with interval refutation
* forward_eval: evaluation of feed-forward (gadget shaped) networks in topological order
"""
import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from pyomo.common.errors import InfeasibleConstraintException
from scipy.optimize import least_squares
from tqdm import tqdm

from cdsclear import get_logger, CapExceededError, CyclicDependencyError
from cdsclear import metrics
from cdsclear.bounds import PatternPropagator, FREE, DEFAULT, SOLVENT
from cdsclear.file_utils import load_resource_json
from cdsclear.network import (FinancialNetwork, RecoveryVector, as_recovery, evaluate, update_F, map_f,
                              is_clearing, is_eps_approx_clearing, require_approximation_setting, truncate)

logger = get_logger(__name__)

THREADS_ENV = "CDSCLEAR_THREADS"


@dataclass(frozen=True)
class SolverConfig:
    damping: float = 0.5
    restarts: int = 64
    max_iter: int = 10000
    tol: float = 1e-9
    pattern_cap: int = 16
    brute_cap: int = 12
    slack: float = 1e-9
    propagation_rounds: int = 200
    seed: int = 0

    @classmethod
    def from_dict(cls, config: Dict) -> "SolverConfig":
        unknown = set(config) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"Unknown solver configuration keys: {sorted(unknown)}")
        return cls(**config)


@lru_cache(maxsize=1)
def load_solver_config() -> SolverConfig:
    return SolverConfig.from_dict(load_resource_json("config.json"))


def default_threads() -> int:
    value = os.environ.get(THREADS_ENV, "1")
    try:
        threads = int(value)
    except ValueError:
        logger.warning("Ignoring %s=%r (not an integer)", THREADS_ENV, value)
        return 1
    return max(1, threads)


@dataclass(frozen=True)
class PatternVerdict:
    """
    Verdict for one solvency pattern: the banks asserted solvent (all others default).
    """
    solvent: Tuple[str, ...]
    verdict: str
    r: Optional[Tuple[float, ...]] = None
    reason: str = ""


@dataclass
class SolveReport:
    status: str
    banks: Tuple[str, ...]
    r: Optional[RecoveryVector] = None
    residual: float = float("inf")
    iterations: int = 0
    method: str = ""
    pattern_verdicts: Optional[List[PatternVerdict]] = None
    details: Dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.status == metrics.STATUS_FOUND

    def value_of(self, bank: str) -> float:
        return float(self.r[self.banks.index(bank)])

    def to_dict(self) -> Dict:
        """ Deterministic, JSON-compatible report. """
        report = {
            metrics.KEY_STATUS: self.status,
            metrics.KEY_METHOD: self.method,
            metrics.KEY_BANKS: list(self.banks),
            metrics.KEY_RECOVERY: None if self.r is None else [float(v) for v in self.r],
            metrics.KEY_RESIDUAL: None if not np.isfinite(self.residual) else float(self.residual),
            metrics.KEY_ITERATIONS: int(self.iterations),
        }
        if self.pattern_verdicts is not None:
            counts = {metrics.VERDICT_SOLUTION: 0, metrics.VERDICT_INFEASIBLE: 0, metrics.VERDICT_UNDECIDED: 0}
            for verdict in self.pattern_verdicts:
                counts[verdict.verdict] += 1
            report[metrics.KEY_PATTERN_VERDICTS] = {
                "counts": counts,
                "open": [asdict(v) for v in self.pattern_verdicts if v.verdict != metrics.VERDICT_INFEASIBLE],
            }
        if self.details:
            report["details"] = self.details
        return report


# fixed-point iteration

def _damped_iteration(step, r: np.ndarray, damping: float, max_iter: int, tol: float) -> Tuple[np.ndarray, float, int]:
    residual = float("inf")
    iterations = 0
    for iterations in range(1, max_iter + 1):
        image = step(r)
        residual = float(np.max(np.abs(image - r))) if r.size else 0.0
        if residual <= tol:
            break
        r = (1.0 - damping) * r + damping * image
    return r, residual, iterations


def _settle(net: FinancialNetwork, r: np.ndarray, residual: float, tol: float) -> Optional[np.ndarray]:
    """
    Accepts the first of the images F(r), F(F(r)), ... (at most n + 1 of them) that F leaves in place.
    An iterate inside tol is not enough on its own: a bank whose liability has nearly vanished can be
    pinned at 0 by the iterate and flip back to 1 under F.
    """
    if residual > tol:
        return None
    candidate = r
    for _ in range(net.n + 1):
        candidate = update_F(net, candidate)
        if is_clearing(net, candidate, tol):
            return candidate
    return None


def iterate_F(net: FinancialNetwork, r0=None, damping: float = None, max_iter: int = None,
              tol: float = None) -> SolveReport:
    config = load_solver_config()
    damping = config.damping if damping is None else damping
    max_iter = config.max_iter if max_iter is None else max_iter
    tol = config.tol if tol is None else tol
    if not 0.0 < damping <= 1.0:
        raise ValueError(f"damping must lie in (0, 1], got {damping}")
    r = np.ones(net.n) if r0 is None else as_recovery(net, r0)
    r, residual, iterations = _damped_iteration(lambda x: update_F(net, x), r, damping, max_iter, tol)
    cleared = _settle(net, r, residual, tol)
    status = metrics.STATUS_NOT_FOUND if cleared is None else metrics.STATUS_FOUND
    logger.info("iterate_F on %s: %s after %d iterations (residual %.3g)", net, status, iterations, residual)
    return SolveReport(status, net.banks, r=cleared,
                       residual=residual, iterations=iterations, method="iterate")


def iterate_f(net: FinancialNetwork, r0=None, damping: float = None, max_iter: int = None,
              tol: float = None) -> SolveReport:
    """ Damped iteration of the continuous map f; only meaningful without default costs. """
    config = load_solver_config()
    damping = config.damping if damping is None else damping
    max_iter = config.max_iter if max_iter is None else max_iter
    tol = config.tol if tol is None else tol
    require_approximation_setting(net)
    r = np.ones(net.n) if r0 is None else as_recovery(net, r0)
    r, residual, iterations = _damped_iteration(lambda x: map_f(net, x), r, damping, max_iter, tol)
    cleared = _settle(net, r, residual, tol)
    status = metrics.STATUS_NOT_FOUND if cleared is None else metrics.STATUS_FOUND
    return SolveReport(status, net.banks, r=cleared,
                       residual=residual, iterations=iterations, method="iterate_f")


# auxiliary maps

def _aux_evaluate(net: FinancialNetwork, r) -> Tuple[np.ndarray, np.ndarray]:
    r = truncate(np.asarray(r, dtype=float))
    liabilities, _, assets, _ = evaluate(net, r)
    return assets, liabilities


def map_G(net: FinancialNetwork, r, eps: float) -> np.ndarray:
    """ G(r)_i = 1 + eps when a_i >= (1 + eps) l_i (including l_i = 0), else a_i / l_i, both at the truncation of r. """
    require_approximation_setting(net)
    assets, liabilities = _aux_evaluate(net, r)
    result = np.full(net.n, 1.0 + eps)
    ratio_branch = assets < (1.0 + eps) * liabilities
    result[ratio_branch] = assets[ratio_branch] / liabilities[ratio_branch]
    return result


def _map_g(net: FinancialNetwork, r, eps: float) -> np.ndarray:
    assets, liabilities = _aux_evaluate(net, r)
    both_zero = (assets == 0.0) & (liabilities == 0.0)
    if both_zero.any():
        require_approximation_setting(net)
    return assets / np.maximum(assets / (1.0 + eps), liabilities)


def map_g(net: FinancialNetwork, r, eps: float) -> np.ndarray:
    """ g(r)_i = a_i / max(a_i / (1 + eps), l_i), at the truncation of r. """
    require_approximation_setting(net)
    return _map_g(net, r, eps)


def _search_g(net: FinancialNetwork, eps: float, r0: np.ndarray, damping: float, max_iter: int,
              tol: float) -> Tuple[np.ndarray, float, int]:
    """
    Damped iteration of g with damping halved whenever the residual stalls, followed by a
    least-squares polish of r - g(r) inside [0, 1 + eps]^n.
    """
    def step(x):
        return _map_g(net, x, eps)

    r = np.clip(r0, 0.0, 1.0 + eps)
    best_r, best_residual = r, float("inf")
    window, since_best, iterations = 50, 0, 0
    for iterations in range(1, max_iter + 1):
        image = step(r)
        residual = float(np.max(np.abs(image - r))) if r.size else 0.0
        if residual < best_residual:
            if residual < 0.5 * best_residual:
                since_best = 0
            best_r, best_residual = r, residual
        if residual <= tol:
            break
        since_best += 1
        if since_best >= window:
            if damping <= 1e-3:
                break
            damping = max(damping / 2.0, 1e-3)
            since_best = 0
        r = (1.0 - damping) * r + damping * image

    if best_residual > tol and net.n:
        solution = least_squares(lambda x: x - step(x), np.clip(best_r, 0.0, 1.0 + eps), bounds=(0.0, 1.0 + eps),
                                 xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200 * (net.n + 1))
        polished = solution.x
        polished_residual = float(np.max(np.abs(step(polished) - polished)))
        if polished_residual < best_residual:
            best_r, best_residual = polished, polished_residual
    return best_r, best_residual, iterations


def solve_eps_approx(net: FinancialNetwork, eps: float, budget: int = None, seed: int = None,
                     damping: float = None, max_iter: int = None, threads: int = None,
                     progress: bool = False) -> SolveReport:
    """
    Searches an eps-almost fixed point r of g from uniformly drawn restarts and returns its truncation,
    which is eps-approximately clearing.

    :param budget: number of restarts
    :param seed: restart k draws from numpy's generator seeded with (seed, k)
    """
    config = load_solver_config()
    budget = config.restarts if budget is None else budget
    seed = config.seed if seed is None else seed
    damping = config.damping if damping is None else damping
    max_iter = config.max_iter if max_iter is None else max_iter
    threads = default_threads() if threads is None else threads
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    require_approximation_setting(net)

    def attempt(restart: int):
        rng = np.random.default_rng([seed, restart])
        r0 = np.ones(net.n) if restart == 0 else rng.uniform(0.0, 1.0, net.n)
        r, g_residual, iterations = _search_g(net, eps, r0, damping, max_iter, config.tol)
        candidate = truncate(r)
        ok = g_residual <= eps and is_eps_approx_clearing(net, candidate, eps)
        logger.debug("restart %d: g-residual %.3g after %d iterations (%s)", restart, g_residual, iterations,
                     "accepted" if ok else "rejected")
        return ok, candidate, g_residual, iterations

    best_residual = float("inf")
    total_iterations = 0
    batch = max(1, threads)
    with ThreadPoolExecutor(max_workers=batch) as executor, \
            tqdm(total=budget, desc="Restarts", disable=not progress) as bar:
        for start in range(0, budget, batch):
            restarts = range(start, min(budget, start + batch))
            for restart, (ok, candidate, g_residual, iterations) in zip(restarts, executor.map(attempt, restarts)):
                bar.update(1)
                total_iterations += iterations
                best_residual = min(best_residual, g_residual)
                if ok:
                    residual = float(np.max(np.abs(map_f(net, candidate) - candidate))) if net.n else 0.0
                    logger.info("solve_eps_approx on %s: Found at restart %d", net, restart)
                    return SolveReport(metrics.STATUS_FOUND, net.banks, r=candidate, residual=residual,
                                       iterations=total_iterations, method="approx",
                                       details={"eps": eps, "g_residual": g_residual, "restart": restart})
    logger.info("solve_eps_approx on %s: NotFound (best g-residual %.3g)", net, best_residual)
    return SolveReport(metrics.STATUS_NOT_FOUND, net.banks, residual=best_residual,
                       iterations=total_iterations, method="approx", details={"eps": eps})


# solvency patterns

class _PatternSearch:
    """
    Depth-first enumeration of solvency patterns over the banks that are not always solvent.
    Each node propagates bounds with the banks decided so far; a refuted node settles all of its leaves.
    """

    def __init__(self, net: FinancialNetwork, tol: float, config: SolverConfig, damping: float, max_iter: int):
        self.net = net
        self.tol = tol
        self.damping = damping
        self.max_iter = max_iter
        self.propagator = PatternPropagator(net, slack=config.slack, max_rounds=config.propagation_rounds)
        self.free = [i for i in range(net.n) if not net.always_solvent[i]]
        self.always = [net.banks[i] for i in range(net.n) if net.always_solvent[i]]

    def solvent_names(self, status: np.ndarray) -> Tuple[str, ...]:
        return tuple(bank for i, bank in enumerate(self.net.banks)
                     if self.net.always_solvent[i] or status[i] == SOLVENT)

    def run(self, prefix: Sequence[int]) -> List[PatternVerdict]:
        status = np.full(self.net.n, FREE)
        for position, choice in enumerate(prefix):
            status[self.free[position]] = choice
        verdicts: List[PatternVerdict] = []
        self._visit(status, len(prefix), verdicts)
        return verdicts

    def _visit(self, status: np.ndarray, depth: int, verdicts: List[PatternVerdict]):
        try:
            lo, hi = self.propagator.propagate(status)
        except InfeasibleConstraintException as e:
            remaining = self.free[depth:]
            for choices in itertools.product((DEFAULT, SOLVENT), repeat=len(remaining)):
                leaf = status.copy()
                leaf[remaining] = choices
                verdicts.append(PatternVerdict(self.solvent_names(leaf), metrics.VERDICT_INFEASIBLE, reason=str(e)))
            return
        if depth == len(self.free):
            verdicts.append(self._solve_leaf(status, lo, hi))
            return
        for choice in (DEFAULT, SOLVENT):
            status[self.free[depth]] = choice
            self._visit(status, depth + 1, verdicts)
        status[self.free[depth]] = FREE

    def _solve_leaf(self, status: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> PatternVerdict:
        net = self.net
        solvent = status == SOLVENT
        solvent[net.always_solvent] = True

        def step(r):
            liabilities, _, _, after_costs = evaluate(net, r)
            image = np.ones(net.n)
            default = ~solvent
            positive = default & (liabilities > 0.0)
            image[default] = r[default]
            image[positive] = after_costs[positive] / liabilities[positive]
            return np.clip(image, lo, hi)

        r = np.clip((lo + hi) / 2.0, 0.0, 1.0)
        r[solvent] = 1.0
        r, _, _ = _damped_iteration(step, r, self.damping, self.max_iter, self.tol * 1e-3)
        names = self.solvent_names(status)
        for candidate in (r, update_F(net, r)):
            candidate = truncate(candidate)
            liabilities, _, assets, _ = evaluate(net, candidate)
            branch_ok = bool(np.all((assets >= liabilities) == solvent))
            if branch_ok and is_clearing(net, candidate, self.tol):
                return PatternVerdict(names, metrics.VERDICT_SOLUTION, r=tuple(float(v) for v in candidate))
        return PatternVerdict(names, metrics.VERDICT_UNDECIDED, reason="restricted iteration did not settle")


def enumerate_patterns(net: FinancialNetwork, tol: float = None, cap: int = None, threads: int = None,
                       damping: float = None, max_iter: int = None, progress: bool = False) -> SolveReport:
    """
    Decides every solvency pattern of `net` as solution-found, provably-infeasible or undecided.
    Banks that are solvent at every recovery vector take part in every pattern as solvent banks.
    """
    config = load_solver_config()
    tol = config.tol if tol is None else tol
    cap = config.pattern_cap if cap is None else cap
    threads = default_threads() if threads is None else threads
    damping = config.damping if damping is None else damping
    max_iter = config.max_iter if max_iter is None else max_iter

    search = _PatternSearch(net, tol, config, damping, max_iter)
    if len(search.free) > cap:
        raise CapExceededError("solvency patterns", len(search.free), cap)

    depth = min(len(search.free), max(0, int(np.ceil(np.log2(threads)))) if threads > 1 else 0)
    prefixes = list(itertools.product((DEFAULT, SOLVENT), repeat=depth))

    def run(prefix):
        # each worker owns a propagator
        worker = _PatternSearch(net, tol, config, damping, max_iter)
        return worker.run(prefix)

    verdicts: List[PatternVerdict] = []
    if threads > 1 and len(prefixes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            for part in tqdm(executor.map(run, prefixes), total=len(prefixes), desc="Patterns",
                             disable=not progress):
                verdicts.extend(part)
    else:
        verdicts = search.run(())

    solutions = [v for v in verdicts if v.verdict == metrics.VERDICT_SOLUTION]
    if solutions:
        first = solutions[0]
        r = np.array(first.r)
        status = metrics.STATUS_FOUND
        residual = float(np.max(np.abs(update_F(net, r) - r))) if net.n else 0.0
    elif all(v.verdict == metrics.VERDICT_INFEASIBLE for v in verdicts):
        r, status, residual = None, metrics.STATUS_INFEASIBLE, float("inf")
    else:
        r, status, residual = None, metrics.STATUS_UNDECIDED, float("inf")
    logger.info("enumerate_patterns on %s: %s over %d patterns", net, status, len(verdicts))
    return SolveReport(status, net.banks, r=r, residual=residual, iterations=len(verdicts), method="patterns",
                       pattern_verdicts=verdicts)


# feed-forward evaluation

def _bank_update(net: FinancialNetwork, i: int, r: np.ndarray) -> float:
    liability = 0.0
    for term in net.written_terms[i]:
        liability += term.notional * (1.0 - r[term.reference]) if term.is_cds else term.notional
    incoming = 0.0
    for term in net.held_terms[i]:
        factor = (1.0 - r[term.reference]) if term.is_cds else 1.0
        incoming += r[term.writer] * term.notional * factor
    assets = net.external[i] + incoming
    if assets >= liability:
        return 1.0
    return (net.alpha * net.external[i] + net.beta * incoming) / liability


def forward_eval(net: FinancialNetwork, driven: Mapping[str, float] = None) -> RecoveryVector:
    """
    Evaluates the undriven banks one by one in topological order of their dependencies.
    Banks that are solvent at every recovery vector are set to 1 without evaluation.
    """
    driven = dict(driven or {})
    r = np.ones(net.n)
    known = set()
    for bank, value in driven.items():
        if bank not in net.index:
            raise ValueError(f"Cannot drive unknown bank '{bank}'")
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"Driven value for '{bank}' must lie in [0, 1], got {value}")
        r[net.index[bank]] = value
        known.add(net.index[bank])
    known.update(int(i) for i in np.flatnonzero(net.always_solvent) if int(i) not in known)

    graph = net.dependency_graph(skip=sorted(known))
    try:
        order = list(nx.topological_sort(graph))
    except nx.NetworkXUnfeasible:
        cycle = nx.find_cycle(graph)
        raise CyclicDependencyError([u for u, _ in cycle] + [cycle[0][0]])
    for bank in order:
        i = net.index[bank]
        r[i] = _bank_update(net, i, r)
    return r
