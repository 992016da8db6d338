"""Benchmark linear systems and the classical reference solve."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

PIVOT_FLOOR = 1e-12


class SingularMatrix(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class LinearSystem:
    A: np.ndarray
    rhs: np.ndarray
    label: str = ""

    def __post_init__(self):
        A = np.asarray(self.A)
        rhs = np.asarray(self.rhs).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        dim = A.shape[0]
        if dim != rhs.size:
            raise ValueError(f"A is {dim}x{dim} but rhs has {rhs.size} entries")
        if dim < 2 or dim & (dim - 1):
            raise ValueError(f"dimension {dim} is not a power of two")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "rhs", rhs)

    @property
    def num_qubits(self) -> int:
        return self.A.shape[0].bit_length() - 1


@dataclass(frozen=True)
class TridiagSpec:
    n: int
    a: float = 2.0
    b: float = -1.0
    c: float = -1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one qubit")


@dataclass(frozen=True)
class HeleShawSpec:
    grid: int = 4
    p_in: float = 1.0
    p_out: float = 0.0
    spacing: float = 1.0

    def __post_init__(self):
        cells = self.grid * self.grid
        if self.grid < 2 or cells & (cells - 1):
            raise ValueError(f"grid {self.grid}: grid**2 must be a power of two")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")


def tridiag_toeplitz(spec: TridiagSpec, rhs: np.ndarray | None = None) -> LinearSystem:
    dim = 1 << spec.n
    A = (spec.a * np.eye(dim) + spec.b * np.eye(dim, k=1) + spec.c * np.eye(dim, k=-1))
    if rhs is None:
        rhs = np.full(dim, dim ** -0.5)
    return LinearSystem(A, rhs, f"tridiag(n={spec.n}, a={spec.a:g}, b={spec.b:g}, c={spec.c:g})")


def _laplacian(grid: int, h: float, dirichlet_x: bool, dirichlet_y: bool) -> np.ndarray:
    """Negative 5-point Laplacian on a grid x grid interior, row-major (y, x).

    A Dirichlet side keeps the full diagonal (boundary value goes to the rhs);
    a mirror-Neumann side drops that neighbour's contribution from the diagonal.
    """
    N = grid * grid
    A = np.zeros((N, N))
    for iy in range(grid):
        for ix in range(grid):
            r = iy * grid + ix
            for dx, dy in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                jx, jy = ix + dx, iy + dy
                if 0 <= jx < grid and 0 <= jy < grid:
                    A[r, jy * grid + jx] -= 1.0
                    A[r, r] += 1.0
                elif (dx and dirichlet_x) or (dy and dirichlet_y):
                    A[r, r] += 1.0
    return A / h ** 2


def heleshaw_pressure_system(spec: HeleShawSpec | None = None) -> LinearSystem:
    """Laplace equation for pressure: p_in on the left, p_out on the right,
    zero normal derivative on the top and bottom walls."""
    spec = spec or HeleShawSpec()
    if spec.grid != 4:
        raise ValueError(f"unsupported grid size {spec.grid}; the benchmark uses grid=4")
    g, h = spec.grid, spec.spacing
    A = _laplacian(g, h, dirichlet_x=True, dirichlet_y=False)
    rhs = np.zeros((g, g))
    rhs[:, 0] += spec.p_in / h ** 2
    rhs[:, -1] += spec.p_out / h ** 2
    return LinearSystem(A, rhs.reshape(-1), "heleshaw-pressure")


def pressure_gradient(spec: HeleShawSpec, pressure: np.ndarray) -> np.ndarray:
    """Central-difference ∂p/∂x at interior nodes, inlet/outlet values as ghosts."""
    g = spec.grid
    p = np.asarray(pressure, dtype=float).reshape(g, g)
    padded = np.hstack([np.full((g, 1), spec.p_in), p, np.full((g, 1), spec.p_out)])
    return (padded[:, 2:] - padded[:, :-2]) / (2 * spec.spacing)


def heleshaw_velocity_system(spec: HeleShawSpec | None = None, pressure_field: np.ndarray | None = None) -> LinearSystem:
    """Streamwise velocity: −∇²u = −∂p/∂x with no-slip top and bottom walls and
    zero normal derivative at inlet and outlet.

    ``pressure_field`` is the (unnormalised) interior pressure; by default it
    is the direct solution of the matching pressure system.
    """
    spec = spec or HeleShawSpec()
    g = spec.grid
    if pressure_field is None:
        ps = heleshaw_pressure_system(spec)
        pressure_field = np.linalg.solve(ps.A, ps.rhs)
    pressure_field = np.asarray(pressure_field, dtype=float)
    if pressure_field.size != g * g:
        raise ValueError(f"pressure field has {pressure_field.size} values, expected {g * g}")
    A = _laplacian(g, spec.spacing, dirichlet_x=False, dirichlet_y=True)
    rhs = -pressure_gradient(spec, pressure_field)
    return LinearSystem(A, rhs.reshape(-1), "heleshaw-velocity")


def classical_solve(system: LinearSystem, normalize: bool = True) -> np.ndarray:
    """LU with partial pivoting; returns x / ||x|| unless ``normalize`` is False."""
    dtype = complex if np.iscomplexobj(system.A) or np.iscomplexobj(system.rhs) else float
    with warnings.catch_warnings():
        # singular input is reported below as SingularMatrix
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(np.asarray(system.A, dtype=dtype))
    if np.min(np.abs(np.diag(lu))) < PIVOT_FLOOR:
        raise SingularMatrix("matrix is singular to working precision")
    x = lu_solve((lu, piv), system.rhs)
    if not normalize:
        return x
    return x / np.linalg.norm(x)


PROBLEMS = ("tridiag", "heleshaw-pressure", "heleshaw-velocity")


def build_problem(name: str, qubits: int | None = None, a: float = 2.0, b: float = -1.0,
                  c: float = -1.0) -> LinearSystem:
    if name == "tridiag":
        if qubits is None:
            raise ValueError("tridiag needs --qubits")
        return tridiag_toeplitz(TridiagSpec(qubits, a, b, c))
    if name == "heleshaw-pressure":
        return heleshaw_pressure_system()
    if name == "heleshaw-velocity":
        return heleshaw_velocity_system()
    raise ValueError(f"unknown problem {name!r}; choose from {', '.join(PROBLEMS)}")
