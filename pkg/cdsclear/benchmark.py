""" Command functions behind scripts/cli.py; each returns the process exit code. """
import functools
import json
import os
from datetime import datetime
from typing import Optional, Sequence

import numpy as np

import cdsclear
from cdsclear import (metrics, CapExceededError, DefaultCostsPresentError, DegenerateNetworkError, FormatError,
                      MalformedCircuitError, NetworkValidationError, NotApproximatelyClearingError,
                      PolynomialDegreeError, CyclicDependencyError)
from cdsclear.circuit import brute_solve, format_assignment, is_solution, violated_gates
from cdsclear.diagrams import export_dot as render_dot
from cdsclear.file_utils import load_file, store_file
from cdsclear.formats import (dumps, parse_circuit, parse_network, parse_polynomial,
                              parse_recovery, parse_wire_map, serialize_network, serialize_wire_map)
from cdsclear.gadgets import verify_all
from cdsclear.network import eps_violations, is_clearing, require_approximation_setting, residual
from cdsclear.polynomial import normalize_poly
from cdsclear import reductions, solver

logger = cdsclear.get_logger(__name__)
stdout_logger = cdsclear.get_logger("cdsclear.run")

METHODS = ("iterate", "patterns", "approx")
POLY_MODES = (reductions.KIND_HASCLEARING, reductions.KIND_CANSURVIVE)
GENERATE_KINDS = ("networks", "polynomials", "quadratic", "circuits")


class UsageError(Exception):
    pass


PARSE_ERRORS = (FormatError, NetworkValidationError, MalformedCircuitError, PolynomialDegreeError,
                FileNotFoundError, IsADirectoryError, UnicodeDecodeError)
USAGE_ERRORS = (UsageError, CapExceededError, DefaultCostsPresentError, DegenerateNetworkError,
                CyclicDependencyError, ValueError)


def command(fn):
    """ Maps exceptions escaping a command to exit codes. """

    @functools.wraps(fn)
    def wrapper(*args, **kwargs) -> int:
        time_start = datetime.now()
        try:
            return fn(*args, **kwargs)
        except PARSE_ERRORS as e:
            stdout_logger.error("error: %s", e)
            logger.error(e, exc_info=True)
            return metrics.EXIT_PARSE
        except USAGE_ERRORS as e:
            stdout_logger.error("error: %s", e)
            logger.error(e, exc_info=True)
            return metrics.EXIT_USAGE
        finally:
            logger.info(f"Command {fn.__name__} took {str(datetime.now() - time_start)}")

    return wrapper


def read_network(path: str):
    return parse_network(load_file(path))


def read_recovery(value: str, net=None) -> np.ndarray:
    """ A file holding the vector, or the vector itself as whitespace separated decimals. """
    text = load_file(value) if os.path.isfile(value) else value
    return parse_recovery(text, net)


def _emit(report: dict):
    stdout_logger.info(dumps(report).rstrip("\n"))


@command
def clear(network_path: str, method: str = None, eps: float = None, damping: float = None, tol: float = None,
          seed: int = None, restarts: int = None, threads: int = None, progress: bool = False) -> int:
    if method is None:
        method = "approx" if eps is not None else "iterate"
    if method not in METHODS:
        raise UsageError(f"Unknown method '{method}' (choose from {', '.join(METHODS)})")
    if method == "approx" and eps is None:
        raise UsageError("--method approx needs --eps")
    net = read_network(network_path)
    logger.info("Clearing %s with method %s", net, method)
    if method == "approx":
        report = solver.solve_eps_approx(net, eps, budget=restarts, seed=seed, damping=damping,
                                         threads=threads, progress=progress)
    elif method == "patterns":
        report = solver.enumerate_patterns(net, tol=tol, threads=threads, damping=damping, progress=progress)
    else:
        report = _iterate_with_restarts(net, damping, tol, seed, restarts)
    _emit(report.to_dict())
    return metrics.STATUS_EXIT_CODES[report.status]


def _iterate_with_restarts(net, damping, tol, seed, restarts) -> solver.SolveReport:
    config = solver.load_solver_config()
    seed = config.seed if seed is None else seed
    restarts = 1 if restarts is None else restarts
    report = None
    for restart in range(restarts):
        start = None if restart == 0 else np.random.default_rng([seed, restart]).uniform(0.0, 1.0, net.n)
        report = solver.iterate_F(net, r0=start, damping=damping, tol=tol)
        if report.found:
            break
    return report


@command
def verify(network_path: str, recovery: str, eps: float = None, tol: float = None) -> int:
    net = read_network(network_path)
    r = read_recovery(recovery, net)
    tol = solver.load_solver_config().tol if tol is None else tol
    if eps is None:
        ok = is_clearing(net, r, tol)
        report = {"definition": "clearing", "ok": ok, "tol": tol,
                  "residual": residual(net, r) if np.all((0 <= r) & (r <= 1)) else None}
    else:
        if eps <= 0:
            raise UsageError(f"--eps must be positive, got {eps}")
        require_approximation_setting(net)
        violations = eps_violations(net, r, eps)
        ok = not violations
        report = {"definition": "eps-approximate", "eps": eps, "ok": ok, "violations": violations}
    _emit(report)
    return metrics.EXIT_OK if ok else metrics.EXIT_CHECK_FAILED


def _default_map_path(out_path: str) -> str:
    root, _ = os.path.splitext(out_path)
    return root + ".map.json"


def _store_artifact(art: reductions.CompiledArtifact, out_path: str, map_path: Optional[str]):
    map_path = map_path or _default_map_path(out_path)
    store_file(serialize_network(art.network), out_path)
    store_file(serialize_wire_map(art), map_path)
    _emit({"network": out_path, "map": map_path, "banks": art.network.n, "kind": art.kind})


@command
def compile_circuit(circuit_path: str, out_path: str, map_path: str = None) -> int:
    circuit = parse_circuit(load_file(circuit_path))
    _store_artifact(reductions.compile_circuit(circuit), out_path, map_path)
    return metrics.EXIT_OK


@command
def compile_poly(poly_path: str, mode: str, out_path: str, alpha: float = 0.5, map_path: str = None) -> int:
    if mode not in POLY_MODES:
        raise UsageError(f"Unknown mode '{mode}' (choose from {', '.join(POLY_MODES)})")
    p = parse_polynomial(load_file(poly_path))
    normalized = normalize_poly(p)
    if normalized is not p:
        stdout_logger.info("note: polynomial scaled to |coefficient| <= 1/%d", p.size)
    if mode == reductions.KIND_HASCLEARING:
        art = reductions.compile_hasclearing(normalized, alpha)
    else:
        art = reductions.compile_cansurvive(normalized)
    _store_artifact(art, out_path, map_path)
    return metrics.EXIT_OK


@command
def decode(network_path: str, recovery: str, map_path: str) -> int:
    net = read_network(network_path)
    art = parse_wire_map(load_file(map_path), net)
    if art.kind != reductions.KIND_CIRCUIT or art.circuit is None:
        raise UsageError(f"{map_path} is not the wire map of a compiled circuit")
    r = read_recovery(recovery, net)
    try:
        assignment = reductions.extract_solution(art, r)
    except NotApproximatelyClearingError as e:
        stdout_logger.error("error: %s", e)
        return metrics.EXIT_CHECK_FAILED
    violated = violated_gates(art.circuit, assignment)
    _emit({"assignment": format_assignment(assignment, art.circuit.wires), "satisfies": not violated,
           "violated_gates": violated})
    return metrics.EXIT_OK if not violated else metrics.EXIT_CHECK_FAILED


@command
def brute(circuit_path: str, cap: int = None) -> int:
    circuit = parse_circuit(load_file(circuit_path))
    assignment = brute_solve(circuit, cap=cap)
    _emit({"assignment": format_assignment(assignment, circuit.wires), "satisfies": is_solution(circuit, assignment)})
    return metrics.EXIT_OK


@command
def export_dot(network_path: str, out_path: str = None, hide_scaffolding: bool = False) -> int:
    net = read_network(network_path)
    dot = render_dot(net, hide_scaffolding=hide_scaffolding)
    if out_path:
        store_file(dot, out_path)
        _emit({"file": out_path, "banks": net.n})
    else:
        stdout_logger.info(dot.rstrip("\n"))
    return metrics.EXIT_OK


@command
def check_gadgets(grid_points: int = 21, alphas: Sequence[float] = (0.0, 0.3, 0.7, 1.0), tol: float = 1e-9,
                  progress: bool = False) -> int:
    checks = verify_all(alphas=alphas, grid_points=grid_points, progress=progress)
    failed = 0
    for check in checks:
        ok = check.passed(tol)
        failed += not ok
        stdout_logger.info("%-14s alpha=%-4s points=%-4d worst=%.3e %s", check.name, check.alpha, check.points,
                           check.worst_deviation, "ok" if ok else f"FAILED at {check.worst_point}")
    stdout_logger.info("%d of %d checks passed", len(checks) - failed, len(checks))
    return metrics.EXIT_OK if not failed else metrics.EXIT_CHECK_FAILED


@command
def generate(kind: str, out_dir: str, seed: int = 42, count: int = None) -> int:
    from cdsclear import instancegenerator
    generators = {
        "networks": instancegenerator.NetworkInstanceGenerator,
        "polynomials": instancegenerator.PolynomialInstanceGenerator,
        "quadratic": instancegenerator.QuadraticSystemGenerator,
        "circuits": instancegenerator.CircuitCorpusGenerator,
    }
    if kind not in generators:
        raise UsageError(f"Unknown kind '{kind}' (choose from {', '.join(GENERATE_KINDS)})")
    generator = generators[kind](seed=seed)
    kwargs = {} if count is None else {"count": count}
    path = generator.generate(dir_path=out_dir, **kwargs)
    _emit({"kind": kind, "file": path, "instances": generator.instance_count})
    return metrics.EXIT_OK
