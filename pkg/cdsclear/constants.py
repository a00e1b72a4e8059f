"""
Numeric constants shared by the gadgets, the decoding function and the circuit reduction.
"""
import math
from dataclasses import dataclass

GAMMA = 3.0 - math.sqrt(6.0)
"""
Upper end of the zero interval of the decoding function, about 0.5505.
"""

EPS = 5.0 - 2.0 * math.sqrt(6.0)
"""
Largest approximation parameter for which the circuit reduction decodes correctly, about 0.1010.
"""

DELTA = EPS
"""
Width of the one interval of the decoding function; it has to equal EPS for the NAND analysis.
"""

PHI = 0.7
"""
First inverter threshold of the PURIFY gadget.
"""


@dataclass(frozen=True)
class ReductionConstants:
    eps: float
    gamma: float
    delta: float
    phi: float

    @property
    def c1(self) -> float:
        return 1.0 / (1.0 - self.gamma)

    @property
    def c2(self) -> float:
        return 1.0 / (1.0 - self.gamma)

    @property
    def eta(self) -> float:
        return (1.0 - self.phi) / (1.0 - self.gamma) + self.eps

    @classmethod
    def default(cls) -> "ReductionConstants":
        return cls(eps=EPS, gamma=GAMMA, delta=DELTA, phi=PHI)

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0 or self.delta < 0.0 or self.gamma + self.delta >= 1.0:
            raise ValueError(f"Need gamma, delta >= 0 and gamma + delta < 1, got {self.gamma}, {self.delta}")
        if self.eps <= 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not 0.0 < self.phi < 1.0:
            raise ValueError(f"phi must lie in (0, 1), got {self.phi}")
