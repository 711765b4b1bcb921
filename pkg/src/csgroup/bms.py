"""BMS benchmark family f1-f15 with shift, permutation and block rotation.

Each instance carries its ground-truth grouping so decomposers can be scored.
Multiplicative bases are normalised by a 1/m exponent (m = slice length) so
the product stays in a fixed range at any dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .problem import FeLedger, GroupingResult, ObjectiveProblem

BOUND = 5.0
FIG1_BOUNDS = (
    np.array([-5.0, 0.5, 0.5, 0.5, 0.5, -5.0, -5.0]),
    np.array([5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0]),
)


class UnknownBasis(KeyError):
    pass


# ---------------------------------------------------------------------------
# basis functions; every one takes a 1-D slice z and returns a float


def sphe(z):
    return float(np.dot(z, z))


def elli(z):
    n = z.size
    if n == 1:
        return float(z[0] ** 2)
    w = 10.0 ** (6.0 * np.arange(n) / (n - 1))
    return float(np.dot(w, z * z))


def _rast_terms(z):
    return z * z - 10.0 * np.cos(2.0 * np.pi * z) + 10.0


def rast(z):
    return float(np.sum(_rast_terms(z)))


def rosen(z):
    # shifted by one so the optimum sits at z = 0
    y = z + 1.0
    return float(np.sum(100.0 * (y[:-1] ** 2 - y[1:]) ** 2 + (y[:-1] - 1.0) ** 2))


def schw(z):
    c = np.cumsum(z)
    return float(np.dot(c, c))


def prodsqu(z):
    return float(np.prod((1.0 + z * z) ** (1.0 / z.size)))


def prodras(z):
    return float(np.prod((1.0 + _rast_terms(z)) ** (1.0 / z.size)))


def logabs(z):
    return float(np.log1p(np.sum(np.abs(z))))


def cone(z):
    return float(np.sqrt(np.dot(z, z)))


@dataclass(frozen=True)
class BasisFunction:
    name: str
    separability_class: str
    fn: Callable[[np.ndarray], float]
    rotation: np.ndarray | None = None

    def __call__(self, z) -> float:
        z = np.asarray(z, dtype=float)
        if self.rotation is not None:
            z = self.rotation @ z
        return self.fn(z)


_BASES = {
    "sphe": (sphe, "additive"),
    "elli": (elli, "additive"),
    "rast": (rast, "additive"),
    "rosen": (rosen, "nonseparable"),
    "schw": (schw, "nonseparable"),
    "rot_rast": (rast, "nonseparable"),
    "prodsqu": (prodsqu, "multiplicative"),
    "prodras": (prodras, "multiplicative"),
    "logabs": (logabs, "composite"),
    "cone": (cone, "composite"),
}

BASIS_NAMES = tuple(_BASES)


def make_basis(name: str, params: dict | None = None) -> BasisFunction:
    """Build a basis function. ``rot_rast`` needs ``params={'rotation': Q}``."""
    if name not in _BASES:
        raise UnknownBasis(name)
    fn, cls = _BASES[name]
    rotation = None
    if name == "rot_rast":
        if not params or "rotation" not in params:
            raise ValueError("rot_rast requires a rotation matrix")
        rotation = np.asarray(params["rotation"], dtype=float)
    return BasisFunction(name, cls, fn, rotation)


def random_rotation(size: int, seed) -> np.ndarray:
    """Haar-distributed orthogonal matrix, deterministic per seed."""
    if size < 1:
        raise ValueError("size must be >= 1")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((size, size))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


# ---------------------------------------------------------------------------
# Instance layouts: list of (basis, start_fraction, end_fraction) over the
# permuted index vector. Fractions are in twentieths of D.

_SEPARABLE_LAYOUTS = {
    1: [("rast", 0, 10), ("prodras", 10, 20)],
    2: [("sphe", 0, 10), ("prodsqu", 10, 20)],
    3: [("rast", 0, 10), ("logabs", 10, 20)],
    4: [("sphe", 0, 10), ("cone", 10, 20)],
    5: [("prodsqu", 0, 10), ("logabs", 10, 20)],
    6: [("prodras", 0, 10), ("cone", 10, 20)],
    7: [("rast", 0, 8), ("prodsqu", 8, 14), ("logabs", 14, 20)],
    8: [("elli", 0, 6), ("prodras", 6, 14), ("cone", 14, 20)],
    9: [("sphe", 0, 6), ("prodras", 6, 12), ("logabs", 12, 20)],
}

# f10-f15: additive, multiplicative, composite bases plus the non-separable part
# acting on consecutive quarters of the permutation.
_PARTIAL_LAYOUTS = {
    10: ("sphe", "prodras", "cone", "rosen"),
    11: ("rast", "prodsqu", "logabs", "schw"),
    12: ("rast", "prodsqu", "logabs", "rot_rast"),
    13: ("rast", "prodsqu", "logabs", "schw"),
    14: ("sphe", "prodras", "cone", "rot_rast"),
    15: ("rast", "prodsqu", "logabs", "schw"),
}

_CLASS_KEY = {
    "additive": "additively_separable",
    "multiplicative": "multiplicatively_separable",
    "composite": "generally_separable",
}


def block_size(dimension: int) -> int:
    """Non-separable block size for f12-f15: 50, or D/20 below 1000-D."""
    return 50 if dimension >= 1000 else dimension // 20


@dataclass
class BmsInstance:
    function_id: int
    dimension: int
    seed: int
    shift: np.ndarray
    permutation: np.ndarray
    rotation_blocks: list[np.ndarray]
    ground_truth: GroupingResult
    problem: ObjectiveProblem
    terms: list[tuple[BasisFunction, np.ndarray]] = field(repr=False, default_factory=list)
    optimum_value: float = 0.0

    def fresh_problem(self, budget: int | None = None) -> ObjectiveProblem:
        return self.problem.with_ledger(FeLedger(budget))

    def descriptor(self) -> dict:
        return {
            "function_id": self.function_id,
            "dimension": self.dimension,
            "seed": self.seed,
            "optimum_value": self.optimum_value,
            "ground_truth": self.ground_truth.to_json(),
        }


def _check_args(function_id: int, dimension: int) -> None:
    if function_id not in range(1, 16):
        raise ValueError(f"invalid function id {function_id}; expected 1-15")
    if dimension <= 0 or dimension % 20:
        raise ValueError(f"invalid dimension {dimension}; must be a positive multiple of 20")


def build_bms(function_id: int, dimension: int, seed: int = 0) -> BmsInstance:
    _check_args(function_id, dimension)
    D = dimension
    rng = np.random.default_rng([function_id, D, seed])
    shift = rng.uniform(-BOUND / 2, BOUND / 2, size=D)
    perm = rng.permutation(D)

    terms: list[tuple[BasisFunction, np.ndarray]] = []
    truth = GroupingResult()
    rotations: list[np.ndarray] = []
    outer = None

    if function_id in _SEPARABLE_LAYOUTS:
        for name, a, b in _SEPARABLE_LAYOUTS[function_id]:
            idx = perm[a * D // 20 : b * D // 20]
            basis = make_basis(name)
            terms.append((basis, idx))
            getattr(truth, _CLASS_KEY[basis.separability_class]).extend(int(i) for i in idx)
    else:
        q = D // 4
        add, mul, comp, nonsep = _PARTIAL_LAYOUTS[function_id]
        for k, name in enumerate((add, mul, comp)):
            idx = perm[k * q : (k + 1) * q]
            basis = make_basis(name)
            terms.append((basis, idx))
            getattr(truth, _CLASS_KEY[basis.separability_class]).extend(int(i) for i in idx)
        ns_idx = perm[3 * q :]
        if function_id in (10, 11):
            terms.append((make_basis(nonsep), ns_idx))
            truth.nonseparable_groups.append([int(i) for i in ns_idx])
        else:
            m = block_size(D)
            blocks = []
            for k in range(q // m):
                idx = ns_idx[k * m : (k + 1) * m]
                if nonsep == "rot_rast":
                    Q = random_rotation(m, rng)
                    rotations.append(Q)
                    basis = make_basis("rot_rast", {"rotation": Q})
                else:
                    basis = make_basis(nonsep)
                blocks.append((basis, idx))
                truth.nonseparable_groups.append([int(i) for i in idx])
            if function_id in (12, 13):
                terms.extend(blocks)
            else:
                outer = (np.sqrt if function_id == 14 else np.log1p, blocks)

    def objective(x: np.ndarray) -> float:
        z = x - shift
        total = 0.0
        for basis, idx in terms:
            total += basis(z[idx])
        if outer is not None:
            fn, blocks = outer
            total += float(fn(sum(basis(z[idx]) for basis, idx in blocks)))
        return total

    # every product basis equals 1 at z = 0; every other term is 0
    optimum = float(sum(1.0 for b, _ in terms if b.separability_class == "multiplicative"))
    problem = ObjectiveProblem(
        objective,
        np.full(D, -BOUND),
        np.full(D, BOUND),
        name=f"bms_f{function_id}_d{D}_s{seed}",
    )
    return BmsInstance(
        function_id, D, seed, shift, perm, rotations, truth, problem, terms, optimum
    )


def fig1_example() -> tuple[ObjectiveProblem, GroupingResult]:
    """f(x) = x1 + x2*x3 + sqrt(x4 + x5) + (x6 - x7 - 1)^2, zero-based indices."""

    def f(x):
        return float(x[0] + x[1] * x[2] + np.sqrt(x[3] + x[4]) + (x[5] - x[6] - 1.0) ** 2)

    lb, ub = FIG1_BOUNDS
    truth = GroupingResult([0], [1, 2], [3, 4], [[5, 6]])
    return ObjectiveProblem(f, lb, ub, name="fig1"), truth
