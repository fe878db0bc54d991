"""Containers for eigen-solutions, neutral curves and critical points."""
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from ..basestate import SuspensionParams

EIGEN_TARGETS = ("R_b", "R_T")
MOMENTUM_SIGMA_FORMS = ("prandtl", "lewis_prandtl")


@dataclass(frozen=True)
class StabilityConfig:
    params: SuspensionParams
    eigen_target: str = "R_b"
    k_range: Tuple[float, float] = (0.5, 8.0)
    n_k: int = 31
    branch_count: int = 1
    n_grid: int = 128
    n_mu: int = 24
    n_phi: int = 16
    base_grid: int = 257
    newton_tol: float = 1e-10
    max_newton: int = 50
    chunk_size: int = 8
    collimated_cos_factor: bool = True
    momentum_sigma: str = "prandtl"
    detect_oscillatory: bool = True

    def __post_init__(self):
        lo, hi = self.k_range
        if not (0 < lo < hi <= 20):
            raise ValueError("k_range must satisfy 0 < k_min < k_max <= 20")
        if self.branch_count < 1:
            raise ValueError("branch_count must be >= 1")
        if self.eigen_target not in EIGEN_TARGETS:
            raise ValueError(f"eigen_target must be one of {EIGEN_TARGETS}")
        if self.momentum_sigma not in MOMENTUM_SIGMA_FORMS:
            raise ValueError(f"momentum_sigma must be one of {MOMENTUM_SIGMA_FORMS}")
        if self.n_grid < 16:
            raise ValueError("n_grid must be >= 16")
        if self.n_k < 3:
            raise ValueError("n_k must be >= 3")

    def k_values(self):
        return np.linspace(self.k_range[0], self.k_range[1], self.n_k)

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class EigenSolution:
    k: float
    R: complex
    sigma: complex
    z: np.ndarray
    W: np.ndarray
    Phi: np.ndarray
    Theta: np.ndarray
    T: np.ndarray
    F: Optional[np.ndarray] = None
    state: Optional[np.ndarray] = field(default=None, repr=False)
    normalization: str = "D3W(0)=1"
    iterations: int = 0
    residual: float = 0.0

    @property
    def oscillatory(self):
        return self.sigma.imag != 0.0

    def scaled(self, factor):
        """Same mode with every eigenfunction multiplied by ``factor``."""
        st = None if self.state is None else self.state * factor
        F = None if self.F is None else self.F * factor
        return replace(self, W=self.W * factor, Phi=self.Phi * factor, Theta=self.Theta * factor,
                       T=self.T * factor, F=F, state=st, normalization=f"scaled({factor})")


@dataclass(frozen=True)
class NeutralPoint:
    k: float
    R: float
    im_sigma: float
    branch: str          # "stationary" or "oscillatory"
    mode: int
    branch_id: int = 0


@dataclass
class NeutralCurve:
    points: List[NeutralPoint]
    bifurcation_k: Optional[float] = None
    failures: List[Tuple[float, str]] = field(default_factory=list)
    flagged: List[Tuple[float, float]] = field(default_factory=list)
    solutions: dict = field(default_factory=dict, repr=False, compare=False)
    slopes: List[Tuple[float, float]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: (p.k, p.branch != "stationary", p.branch_id))

    def branch(self, kind, branch_id=None):
        return [p for p in self.points
                if p.branch == kind and (branch_id is None or p.branch_id == branch_id)]

    @property
    def has_oscillatory(self):
        return any(p.branch == "oscillatory" for p in self.points)


@dataclass(frozen=True)
class CriticalPoint:
    k_c: float
    R_c: float
    oscillatory: bool
    im_sigma: float
    mode: int = 1
    bifurcation_k: Optional[float] = None
    boundary_minimum: bool = False

    @property
    def wavelength(self):
        return 2 * np.pi / self.k_c
