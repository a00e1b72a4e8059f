import argparse
import sys
from typing import Sequence

from cdsclear import BANNER, benchmark, metrics

"""
    Use good old argparse to run the commands.

    To find a clearing recovery vector (iterate, patterns or approx):
    $> python3 scripts/cli.py clear cdsclear/resources/no_clearing.json --method patterns

    To check a recovery vector (exact clearing, or eps-approximate with --eps):
    $> python3 scripts/cli.py verify cdsclear/resources/input_gadget.json "0.37 0.37"

    To compile a PURE-CIRCUIT instance and decode a solution of the compiled network:
    $> python3 scripts/cli.py compile circuit cdsclear/resources/nand_selfloop.json -o out.json
    $> python3 scripts/cli.py clear out.json --method approx --eps 0.101
    $> python3 scripts/cli.py decode out.json "<r>" --map out.map.json

    To compile a polynomial:
    $> python3 scripts/cli.py compile poly p.json --mode hasclearing --alpha 0.5 -o out.json

    To solve a small circuit by brute force:
    $> python3 scripts/cli.py brute circuit cdsclear/resources/nand_selfloop.json

    To export a network as DOT text:
    $> python3 scripts/cli.py export dot out.json

    To check every gadget against its closed form:
    $> python3 scripts/cli.py check gadgets

    To generate instance files:
    $> python3 scripts/cli.py generate circuits -o instances
"""


class ArgumentParser(argparse.ArgumentParser):
    """ Exits with the usage error code. """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(metrics.EXIT_USAGE, f"{self.prog}: error: {message}\n")


def main(args: argparse.Namespace) -> int:
    if args.command_name == "clear":
        return benchmark.clear(args.network, method=args.method, eps=args.eps, damping=args.damping, tol=args.tol,
                               seed=args.seed, restarts=args.restarts, threads=args.threads,
                               progress=not args.no_progress)
    if args.command_name == "verify":
        return benchmark.verify(args.network, args.recovery, eps=args.eps, tol=args.tol)
    if args.command_name == "compile":
        if args.target == "circuit":
            return benchmark.compile_circuit(args.source, args.output, map_path=args.map)
        return benchmark.compile_poly(args.source, args.mode, args.output, alpha=args.alpha, map_path=args.map)
    if args.command_name == "decode":
        return benchmark.decode(args.network, args.recovery, args.map)
    if args.command_name == "brute":
        return benchmark.brute(args.source, cap=args.cap)
    if args.command_name == "export":
        return benchmark.export_dot(args.network, out_path=args.output, hide_scaffolding=args.hide_scaffolding)
    if args.command_name == "check":
        return benchmark.check_gadgets(grid_points=args.grid_points, alphas=args.alphas, tol=args.tol,
                                       progress=not args.no_progress)
    if args.command_name == "generate":
        return benchmark.generate(args.kind, args.output, seed=args.seed, count=args.count)
    return metrics.EXIT_USAGE


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser()
    sub_parsers = parser.add_subparsers(dest="command_name", required=True, parser_class=ArgumentParser)

    clear_parser = sub_parsers.add_parser("clear")
    clear_parser.add_argument("network", type=str, help="A network JSON file.")
    clear_parser.add_argument("--method", type=str, choices=benchmark.METHODS,
                              help="Default: approx when --eps is given, else iterate.")
    clear_parser.add_argument("--eps", type=float, help="Approximation parameter for --method approx.")
    clear_parser.add_argument("--damping", type=float, help="Damping of the fixed-point iteration.")
    clear_parser.add_argument("--tol", type=float, help="Clearing tolerance.")
    clear_parser.add_argument("--seed", type=int, help="Seed of the restart points.")
    clear_parser.add_argument("--restarts", type=int, help="Number of starting points.")
    clear_parser.add_argument("--threads", type=int,
                              help="Worker threads. Default: the CDSCLEAR_THREADS environment variable, else 1.")
    clear_parser.add_argument("--no-progress", action="store_true", help="Hide progress bars.")

    verify_parser = sub_parsers.add_parser("verify")
    verify_parser.add_argument("network", type=str)
    verify_parser.add_argument("recovery", type=str,
                               help="Whitespace separated values in bank order, or a file holding them.")
    verify_parser.add_argument("--eps", type=float, help="Check eps-approximate clearing instead.")
    verify_parser.add_argument("--tol", type=float)

    compile_parser = sub_parsers.add_parser("compile")
    compile_parser.add_argument("target", choices=["circuit", "poly"])
    compile_parser.add_argument("source", type=str, help="A circuit or polynomial JSON file.")
    compile_parser.add_argument("-o", "--output", type=str, required=True, help="Network file to write.")
    compile_parser.add_argument("--map", type=str, help="Wire map file. Default: <output>.map.json")
    compile_parser.add_argument("--mode", type=str, choices=benchmark.POLY_MODES, default="hasclearing")
    compile_parser.add_argument("--alpha", type=float, default=0.5, help="Default costs for hasclearing.")

    decode_parser = sub_parsers.add_parser("decode")
    decode_parser.add_argument("network", type=str)
    decode_parser.add_argument("recovery", type=str)
    decode_parser.add_argument("--map", type=str, required=True)

    brute_parser = sub_parsers.add_parser("brute")
    brute_parser.add_argument("target", choices=["circuit"])
    brute_parser.add_argument("source", type=str)
    brute_parser.add_argument("--cap", type=int, help="Maximal number of wires.")

    export_parser = sub_parsers.add_parser("export")
    export_parser.add_argument("target", choices=["dot"])
    export_parser.add_argument("network", type=str)
    export_parser.add_argument("-o", "--output", type=str, help="Default: print to stdout.")
    export_parser.add_argument("--hide-scaffolding", action="store_true",
                               help="Leave out contracts from source to sink.")

    check_parser = sub_parsers.add_parser("check")
    check_parser.add_argument("target", choices=["gadgets"])
    check_parser.add_argument("--grid-points", type=int, default=21)
    check_parser.add_argument("--alphas", type=float, nargs="+", default=[0.0, 0.3, 0.7, 1.0])
    check_parser.add_argument("--tol", type=float, default=1e-9)
    check_parser.add_argument("--no-progress", action="store_true")

    generate_parser = sub_parsers.add_parser("generate")
    generate_parser.add_argument("kind", choices=benchmark.GENERATE_KINDS)
    generate_parser.add_argument("-o", "--output", type=str, default="instances")
    generate_parser.add_argument("--seed", type=int, default=42)
    generate_parser.add_argument("--count", type=int)
    return parser


def run(argv: Sequence[str] = None) -> int:
    """ The banner goes to stderr; stdout carries only the reports. """
    print(BANNER, file=sys.stderr)
    return main(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(run())
