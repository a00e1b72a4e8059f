import os
import logging
import logging.config
from typing import List, Optional, Sequence

import yaml

BANNER = \
    r"""
               _                 _
   ___ __| |___  ___| | ___  __ _ _ __
  / __/ _` / __|/ __| |/ _ \/ _` | '__|
 | (_| (_| \__ \ (__| |  __/ (_| | |
  \___\__,_|___/\___|_|\___|\__,_|_|
"""

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# Configure logging
with open(os.path.join(project_root, "logging.yaml")) as f:
    conf = yaml.safe_load(f)
    log_fn = conf["handlers"]["file_handler"]["filename"]
    log_fn = os.path.join(project_root, log_fn)
    conf["handlers"]["file_handler"]["filename"] = log_fn
    logging.config.dictConfig(conf)


def get_logger(name):
    return logging.getLogger(name)


class NetworkValidationError(ValueError):
    """
    Raised when a financial network violates one of its structural invariants
    (negative notional, unknown bank, coinciding contract roles, default costs out of range).
    """
    field: str = str()

    def __init__(self, info_str: str, field: str = ""):
        info = f"{field}: {info_str}" if field else info_str
        super().__init__(info)
        self.field = field


class DegenerateNetworkError(Exception):
    """
    Raised by the continuous maps when a bank has neither assets nor liabilities at the evaluated point.
    """
    bank: str = str()

    def __init__(self, bank: str):
        super().__init__(f"Bank '{bank}' has a_i = l_i = 0; the network is degenerate at this point")
        self.bank = bank


class DefaultCostsPresentError(Exception):
    """
    Approximate clearing is only defined without default costs (alpha = beta = 1).
    """

    def __init__(self, alpha: float, beta: float):
        super().__init__(f"Approximate clearing requires alpha = beta = 1, got alpha={alpha}, beta={beta}")
        self.alpha = alpha
        self.beta = beta


class CyclicDependencyError(Exception):
    """
    Raised when the undriven banks of a network cannot be evaluated in topological order.
    """
    cycle: List[str] = list()

    def __init__(self, cycle: Sequence[str]):
        super().__init__(f"No topological order: cycle through {' -> '.join(cycle)}")
        self.cycle = list(cycle)


class CapExceededError(Exception):
    """
    Exhaustive search was asked to enumerate more objects than the configured cap allows.
    """
    size: int = int()
    cap: int = int()

    def __init__(self, what: str, size: int, cap: int):
        super().__init__(f"Cannot enumerate {what}: size {size} exceeds cap {cap}")
        self.size = size
        self.cap = cap


class MalformedCircuitError(ValueError):
    pass


class PolynomialDegreeError(ValueError):
    pass


class UnknownHandleError(KeyError):

    def __init__(self, handle: str, known: Sequence[str]):
        super().__init__(f"Unknown handle '{handle}' (known: {', '.join(sorted(known)) or 'none'})")
        self.handle = handle


class FormatError(ValueError):
    """
    Parse error of one of the JSON documents, with the JSON path of the offending field.
    """
    location: str = str()

    def __init__(self, info_str: str, location: Optional[str] = None):
        info = f"{location}: {info_str}" if location else info_str
        super().__init__(info)
        self.location = location or ""


class NotApproximatelyClearingError(Exception):
    """
    Raised when a recovery vector is decoded although it is not epsilon-approximately clearing.
    """

    def __init__(self, diagnostic: str):
        super().__init__(f"Recovery vector is not approximately clearing: {diagnostic}")
        self.diagnostic = diagnostic
