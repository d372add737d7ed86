"""
Coin Operators
Unitary coins for hub and rim sites, coin-spec parsing and the block-diagonal
coin operator C over a lattice basis
"""

import ast
import logging
import math
import operator
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, Dict, List, Mapping, Optional, Union

import numpy as np
from scipy import sparse

from src.errors import CoinError
from src.lattice import COORDINATION, KIND_ORDER, Cell, Graph, Lattice, SiteKind

logger = logging.getLogger(__name__)

UNITARITY_TOL = 1e-12

CoinLike = Union[str, np.ndarray]


@dataclass(frozen=True)
class CoinParamsU2:
    """Angles of the generic two-fold coin U2(theta, phi, omega, beta)."""

    theta: float
    phi: float = 0.0
    omega: float = 0.0
    beta: float = 0.0

    def matrix(self) -> np.ndarray:
        return u2(self.theta, self.phi, self.omega, self.beta)


@dataclass(frozen=True)
class CoinParamsR3:
    """Rotation angle alpha about axis(gamma); nonzero omega gives the twisted coin."""

    alpha: float
    gamma: float
    omega: float = 0.0

    @property
    def axis(self) -> np.ndarray:
        return rotation_axis(self.gamma)

    def matrix(self) -> np.ndarray:
        return r3_tilde(self.alpha, self.gamma, self.omega)


def unitarity_defect(matrix: np.ndarray) -> float:
    """max |C^dagger C - I| over all entries."""
    matrix = np.asarray(matrix)
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0]))))


def is_unitary(matrix: np.ndarray, tol: float = UNITARITY_TOL) -> bool:
    return unitarity_defect(matrix) < tol


def u2(theta: float, phi: float = 0.0, omega: float = 0.0, beta: float = 0.0) -> np.ndarray:
    """
    Generic U(2) coin with determinant exp(i phi).

    Args:
        theta: Mixing angle
        phi: Global phase parameter
        omega: Off-diagonal phase (breaks time reversal when b and c differ)
        beta: Diagonal phase

    Returns:
        2x2 complex matrix
    """
    c, s = math.cos(theta), math.sin(theta)
    return np.array([
        [c * np.exp(1j * beta), -s * np.exp(1j * (phi + omega))],
        [s * np.exp(-1j * omega), c * np.exp(1j * (phi - beta))],
    ], dtype=complex)


def grover(n: int) -> np.ndarray:
    """G_n = (2/n) J_n - I_n."""
    if n < 2:
        raise CoinError(f"Grover coin needs n >= 2, got {n}")
    return (2.0 / n) * np.ones((n, n), dtype=complex) - np.eye(n, dtype=complex)


def hadamard(n: int) -> np.ndarray:
    """H2 = U2(pi/4, pi, 0, 0) and H4 = H2 (x) H2."""
    h2 = u2(math.pi / 4.0, math.pi, 0.0, 0.0)
    if n == 2:
        return h2
    if n == 4:
        return np.kron(h2, h2)
    raise CoinError(f"Hadamard coin available for n in (2, 4), got {n}")


def dft(n: int) -> np.ndarray:
    """Discrete Fourier transform coin D_n."""
    if n < 2:
        raise CoinError(f"Fourier coin needs n >= 2, got {n}")
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.exp(2j * math.pi * j * k / n) / math.sqrt(n)


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=complex)


def rotation_axis(gamma: float) -> np.ndarray:
    c = math.cos(gamma) / math.sqrt(2.0)
    return np.array([c, math.sin(gamma), c])


def r3(alpha: float, gamma: float) -> np.ndarray:
    """Rotation by alpha about (cos g/sqrt2, sin g, cos g/sqrt2), Rodrigues form."""
    v = rotation_axis(gamma)
    cross = np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])
    return (
        math.cos(alpha) * np.eye(3)
        + (1.0 - math.cos(alpha)) * np.outer(v, v)
        + math.sin(alpha) * cross
    )


def _levi_civita_row_sums() -> np.ndarray:
    sums = np.zeros((3, 3))
    for perm in permutations(range(3)):
        inversions = sum(1 for a in range(3) for b in range(a + 1, 3) if perm[a] > perm[b])
        sums[perm[0], perm[1]] += -1.0 if inversions % 2 else 1.0
    return sums


_EPSILON_SUMS = _levi_civita_row_sums()


def r3_tilde(alpha: float, gamma: float, omega: float) -> np.ndarray:
    """
    R3 with entry (i, j) multiplied by exp(-i omega sum_k eps_ijk).

    Unitary whenever 3 omega is a multiple of 2 pi; then it is a diagonal
    phase conjugation of r3.
    """
    return r3(alpha, gamma) * np.exp(-1j * omega * _EPSILON_SUMS)


# ---------------------------------------------------------------------------
# Coin-spec parsing
# ---------------------------------------------------------------------------

_BINARY_OPS: Dict[type, Callable[[float, float], float]] = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY_OPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCTIONS = {
    "sqrt": math.sqrt, "sin": math.sin, "cos": math.cos, "tan": math.tan,
    "asin": math.asin, "acos": math.acos, "atan": math.atan,
}


def evaluate_expression(text: str, variables: Optional[Mapping[str, float]] = None) -> float:
    """
    Evaluate an arithmetic angle expression such as "-2*pi/3" or "asin(1/sqrt(3))".

    Args:
        text: Expression using numbers, pi, + - * / **, and sqrt/sin/cos/tan/asin/acos/atan
        variables: Extra names (e.g. the sweep variable x)

    Returns:
        Float value
    """
    names = {"pi": math.pi}
    names.update(variables or {})

    def visit(node: ast.AST) -> float:
        if isinstance(node, ast.Expression):
            return visit(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINARY_OPS:
            return _BINARY_OPS[type(node.op)](visit(node.left), visit(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY_OPS:
            return _UNARY_OPS[type(node.op)](visit(node.operand))
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise CoinError(f"unknown name '{node.id}' in '{text}'")
            return float(names[node.id])
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCTIONS and len(node.args) == 1 and not node.keywords):
            return _FUNCTIONS[node.func.id](visit(node.args[0]))
        raise CoinError(f"unsupported expression '{text}'")

    try:
        return visit(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError) as e:
        raise CoinError(f"cannot evaluate '{text}': {e}") from e


def _split_arguments(text: str) -> List[str]:
    parts, depth, current = [], 0, []
    for char in text:
        if char == "(":
            depth += 1
        elif char == ")":
            depth -= 1
        if char == "," and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(char)
    parts.append("".join(current))
    return [p.strip() for p in parts if p.strip()]


def parse_coin(spec: str, variables: Optional[Mapping[str, float]] = None) -> np.ndarray:
    """
    Parse a coin spec string.

    Accepted forms: "G<n>", "H2", "H4", "D<n>", "I<n>",
    "U2:theta,phi[,omega[,beta]]", "R3:alpha,gamma", "R3t:alpha,gamma,omega".

    Args:
        spec: Coin specification
        variables: Values for free names inside parameter expressions

    Returns:
        Coin matrix
    """
    text = spec.strip()
    if not text:
        raise CoinError("empty coin spec")
    head, _, tail = text.partition(":")
    head = head.strip()
    args = [evaluate_expression(a, variables) for a in _split_arguments(tail)] if tail else []

    if head.upper() == "U2":
        if not 1 <= len(args) <= 4:
            raise CoinError(f"U2 takes 1 to 4 angles, got '{spec}'")
        return u2(*args)
    if head.upper() == "R3T":
        if len(args) != 3:
            raise CoinError(f"R3t takes alpha,gamma,omega, got '{spec}'")
        return r3_tilde(*args)
    if head.upper() == "R3":
        if len(args) != 2:
            raise CoinError(f"R3 takes alpha,gamma, got '{spec}'")
        return r3(*args).astype(complex)

    family, digits = head[:1].upper(), head[1:]
    if args or not digits.isdigit():
        raise CoinError(f"unrecognised coin spec '{spec}'")
    builders = {"G": grover, "H": hadamard, "D": dft, "I": identity}
    if family not in builders:
        raise CoinError(f"unrecognised coin family in '{spec}'")
    return builders[family](int(digits))


def as_coin(coin: CoinLike, variables: Optional[Mapping[str, float]] = None) -> np.ndarray:
    if isinstance(coin, str):
        return parse_coin(coin, variables)
    return np.asarray(coin, dtype=complex)


# ---------------------------------------------------------------------------
# Assignment and operator assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoinAssignment:
    """
    Coins per site kind, with optional per-cell hub overrides.

    Args:
        hub: Coin on hub sites a
        rim_b: Coin on rim sites b
        rim_c: Coin on rim sites c
        hub_overrides: Cell -> hub coin, for superlattices
    """

    hub: np.ndarray
    rim_b: np.ndarray
    rim_c: np.ndarray
    hub_overrides: Mapping[Cell, np.ndarray] = field(default_factory=dict)

    def coin_for(self, kind: SiteKind, cell: Cell) -> np.ndarray:
        if kind is SiteKind.HUB_A:
            return self.hub_overrides.get(tuple(cell), self.hub)
        return self.rim_b if kind is SiteKind.RIM_B else self.rim_c

    def validate(self, graph: Graph, tol: float = UNITARITY_TOL) -> None:
        """Check dimensions against coordinations and unitarity of every coin."""
        coins = [(SiteKind.HUB_A, self.hub), (SiteKind.RIM_B, self.rim_b), (SiteKind.RIM_C, self.rim_c)]
        coins += [(SiteKind.HUB_A, c) for c in self.hub_overrides.values()]
        for kind, coin in coins:
            expected = COORDINATION[graph][kind]
            if coin.shape != (expected, expected):
                raise CoinError(
                    f"{kind.value} coin on {graph.value} must be {expected}x{expected}, got {coin.shape}"
                )
            defect = unitarity_defect(coin)
            if defect > tol:
                raise CoinError(f"{kind.value} coin is not unitary (defect {defect:.2e})")


def create_coin_assignment(
    hub: CoinLike,
    rim_b: CoinLike,
    rim_c: Optional[CoinLike] = None,
    hub_overrides: Optional[Mapping[Cell, CoinLike]] = None,
    variables: Optional[Mapping[str, float]] = None,
) -> CoinAssignment:
    """
    Build a CoinAssignment from matrices or spec strings.

    Args:
        hub: Hub coin
        rim_b: Coin on b sites
        rim_c: Coin on c sites (defaults to the b coin)
        hub_overrides: Per-cell hub coins
        variables: Values for free names inside spec expressions

    Returns:
        CoinAssignment
    """
    rim_b_matrix = as_coin(rim_b, variables)
    rim_c_matrix = as_coin(rim_c, variables) if rim_c is not None else rim_b_matrix
    overrides = {tuple(cell): as_coin(coin, variables) for cell, coin in (hub_overrides or {}).items()}
    return CoinAssignment(as_coin(hub, variables), rim_b_matrix, rim_c_matrix, overrides)


def assemble_coin_operator(assignment: CoinAssignment, lattice: Lattice) -> sparse.csr_matrix:
    """
    Block-diagonal coin operator in the lattice basis order.

    Args:
        assignment: Coins per site
        lattice: Lattice whose basis fixes the block order

    Returns:
        Sparse unitary matrix
    """
    assignment.validate(lattice.graph)
    for cell in assignment.hub_overrides:
        if not lattice.contains(cell):
            logger.warning(f"⚠ Hub override at {cell} lies outside the lattice and is ignored")
    blocks = [
        assignment.coin_for(kind, cell)
        for cell in lattice.cells()
        for kind in KIND_ORDER
    ]
    return sparse.block_diag(blocks, format="csr", dtype=complex)
