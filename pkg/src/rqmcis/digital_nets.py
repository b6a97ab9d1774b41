"""Base-2 digital nets (Sobol') and Owen-style nested uniform scrambling.

Points are generated as 32-bit integer lattices and mapped to (0,1) with a
half-cell offset, so no coordinate is ever exactly 0 or 1:

* unscrambled nets place each point at the centre of its dyadic cell of
  width ``2**-m`` (the all-zeros first Sobol' point becomes the cube centre
  for ``m=0``);
* scrambled points carry 32 random output bits and are offset by ``2**-33``,
  the half-cell at full resolution, then clamped to
  ``[2**-33, 1 - 2**-33]``.

Scrambling is nested uniform (Owen) scrambling realised lazily: the random
permutation tree is never stored, each flip bit is drawn from a seeded
counter-based hash of the digit prefix, so point sets are deterministic in
``(spec, seed)`` and replicates can be generated in parallel from distinct
seeds.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

__all__ = [
    "NetSpec",
    "PointSet",
    "sobol_net",
    "owen_scramble",
    "elementary_interval_histogram",
    "max_table_dimension",
    "net_quality_bound",
]

_BITS = 32
_SCALE = float(2.0**-_BITS)
_HALF_LSB = float(2.0**-33)

# splitmix64 finalizer constants
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@dataclass(frozen=True)
class NetSpec:
    """Parameters of a base-2 (t,m,d)-net: ``N = 2**m`` points in d dimensions.

    ``t_param`` is the quality bound reported by the direction-number table
    (sum of polynomial degrees minus d, capped at m); it is recorded, not
    verified for minimality.
    """

    m: int
    d: int
    t_param: int | None = None
    base: int = 2

    def __post_init__(self) -> None:
        if self.base != 2:
            raise ValueError("only base-2 nets are supported")
        if not 0 <= self.m <= 32:
            raise ValueError(f"m must be in [0, 32], got {self.m}")
        if self.d < 1:
            raise ValueError(f"dimension must be positive, got {self.d}")

    @property
    def n(self) -> int:
        return 1 << self.m


@dataclass(frozen=True, eq=False)
class PointSet:
    """N x d matrix of points strictly inside (0,1), plus its generating spec.

    ``lattice`` holds the raw 32-bit integers the float points were derived
    from; it is what scrambling and exact cell-counting operate on.
    """

    points: np.ndarray
    spec: NetSpec
    scramble_seed: int | None = None
    lattice: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def take_dims(self, dims) -> "PointSet":
        """Project onto a subset of coordinates (order preserved)."""
        dims = list(dims)
        return PointSet(
            points=self.points[:, dims],
            spec=replace(self.spec, d=len(dims)),
            scramble_seed=self.scramble_seed,
            lattice=self.lattice[:, dims],
        )


def _load_direction_table() -> list[tuple[int, int, list[int]]]:
    """Parse the embedded Joe-Kuo table into (degree, poly_a, m-values) rows."""
    text = (
        importlib.resources.files("rqmcis.data")
        .joinpath("direction_numbers.txt")
        .read_text()
    )
    rows = []
    expected_dim = 2
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("d "):
            continue
        parts = [int(tok) for tok in line.split()]
        dim, s, a, m_init = parts[0], parts[1], parts[2], parts[3:]
        if dim != expected_dim or len(m_init) != s:
            raise ValueError(f"malformed direction-number row: {line!r}")
        rows.append((s, a, m_init))
        expected_dim += 1
    return rows


@lru_cache(maxsize=1)
def _direction_matrix() -> np.ndarray:
    """(max_dim, 32) array of direction integers, bit k at position 32-k."""
    table = _load_direction_table()
    dmax = len(table) + 1
    v = np.zeros((dmax, _BITS), dtype=np.uint64)
    # dimension 1: van der Corput, m_k = 1 for all k
    for k in range(1, _BITS + 1):
        v[0, k - 1] = np.uint64(1 << (_BITS - k))
    for j, (s, a, m_init) in enumerate(table, start=1):
        m = list(m_init)
        for k in range(s + 1, _BITS + 1):
            mk = m[k - s - 1] ^ (m[k - s - 1] << s)
            for i in range(1, s):
                mk ^= ((a >> (s - 1 - i)) & 1) * (m[k - i - 1] << i)
            m.append(mk)
        for k in range(1, _BITS + 1):
            v[j, k - 1] = np.uint64(m[k - 1] << (_BITS - k))
    return v


def max_table_dimension() -> int:
    """Highest dimension supported by the embedded direction-number table."""
    return _direction_matrix().shape[0]


def net_quality_bound(d: int, m: int) -> int:
    """Classical t-parameter bound for the first d Sobol' dimensions.

    Sum of (polynomial degree - 1) over the coordinates, capped at m.
    """
    table = _load_direction_table()
    if d - 1 > len(table):
        raise ValueError(
            f"dimension {d} exceeds the direction-number table "
            f"({len(table) + 1} dimensions)"
        )
    total = sum(table[j][0] - 1 for j in range(d - 1))  # dim 1 has degree 1
    return min(m, total)


@lru_cache(maxsize=32)
def _sobol_lattice(m: int, d: int) -> np.ndarray:
    """First 2**m Sobol' points as 32-bit integers, shape (2**m, d)."""
    v = _direction_matrix()
    if d > v.shape[0]:
        raise ValueError(
            f"dimension {d} exceeds the direction-number table ({v.shape[0]} dimensions)"
        )
    n = 1 << m
    idx = np.arange(n, dtype=np.uint64)
    x = np.zeros((n, d), dtype=np.uint64)
    for k in range(m):
        hit = ((idx >> np.uint64(k)) & np.uint64(1)).astype(bool)
        x[hit] ^= v[:d, k]
    x.setflags(write=False)
    return x


def sobol_net(spec: NetSpec) -> PointSet:
    """Generate the first ``2**m`` unscrambled Sobol' points.

    Deterministic in ``spec``.  Every coordinate of the integer lattice is a
    multiple of ``2**-m``; the returned floats add the half-cell offset
    ``2**-(m+1)`` so each point sits at the centre of its dyadic cell and no
    coordinate is 0.
    """
    lattice = _sobol_lattice(spec.m, spec.d)
    offset = 2.0 ** -(min(spec.m, _BITS) + 1)
    points = lattice.astype(np.float64) * _SCALE + offset
    points.setflags(write=False)
    if spec.t_param is None:
        spec = replace(spec, t_param=net_quality_bound(spec.d, spec.m))
    return PointSet(points=points, spec=spec, scramble_seed=None, lattice=lattice)


def _mix64(x: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """splitmix64 finalizer; wraps modulo 2**64."""
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * _MIX1
        x = (x ^ (x >> np.uint64(27))) * _MIX2
        return x ^ (x >> np.uint64(31))


def _scramble_keys(seed: int, d: int) -> np.ndarray:
    """(33, d) per-level, per-dimension hash keys derived from the seed."""
    with np.errstate(over="ignore"):
        base = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN)
        dims = _mix64(base ^ (np.arange(d, dtype=np.uint64) + np.uint64(1)) * _GOLDEN)
        levels = _mix64(
            base ^ (np.arange(_BITS + 1, dtype=np.uint64) + np.uint64(101)) * _MIX1
        )
    return _mix64(levels[:, None] ^ dims[None, :])


def owen_scramble(ps: PointSet, seed: int) -> PointSet:
    """Apply nested uniform scrambling to an unscrambled net.

    Each output digit is the input digit XOR a hash bit keyed by
    ``(seed, dimension, digit level, preceding input digits)`` - a lazy
    random permutation tree over 32 output bits.  Marginally each point is
    uniform; elementary-interval counts are preserved exactly.
    """
    if ps.scramble_seed is not None:
        raise ValueError("point set is already scrambled; scramble the base net")
    x = ps.lattice
    keys = _scramble_keys(seed, ps.d)
    out = np.zeros_like(x)
    one = np.uint64(1)
    for j in range(1, _BITS + 1):
        shift = np.uint64(_BITS - j)
        prefix = x >> np.uint64(_BITS - j + 1)
        flips = _mix64(prefix ^ keys[j]) >> np.uint64(63)
        out |= (((x >> shift) & one) ^ flips) << shift
    points = out.astype(np.float64) * _SCALE + _HALF_LSB
    points.setflags(write=False)
    out.setflags(write=False)
    return PointSet(points=points, spec=ps.spec, scramble_seed=seed, lattice=out)


def elementary_interval_histogram(ps: PointSet, split) -> np.ndarray:
    """Count points per dyadic cell for per-dimension depths ``split``.

    ``split`` is a sequence of d nonnegative depths ``k_i`` with
    ``sum(k_i) <= m``; the cell of a point is read off the top ``k_i`` bits
    of each integer coordinate, so counting is exact.  Returns an array of
    shape ``(2**k_1, ..., 2**k_d)``.
    """
    split = [int(k) for k in split]
    if len(split) != ps.d:
        raise ValueError(f"split has {len(split)} entries for {ps.d} dimensions")
    if any(k < 0 for k in split):
        raise ValueError("split depths must be nonnegative")
    if sum(split) > ps.spec.m:
        raise ValueError(
            f"total split depth {sum(split)} exceeds m={ps.spec.m}"
        )
    flat = np.zeros(ps.n, dtype=np.int64)
    for i, k in enumerate(split):
        if k:
            cell = (ps.lattice[:, i] >> np.uint64(_BITS - k)).astype(np.int64)
            flat = (flat << k) | cell
    counts = np.bincount(flat, minlength=1 << sum(split))
    return counts.reshape([1 << k for k in split])
