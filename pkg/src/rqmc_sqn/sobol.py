"""Sobol' points with optional linear matrix scrambling and digital shift.

Points are generated in natural (not Gray-code) order, so dimension 1 of the
unrandomized sequence is the base-2 radical inverse of the index.

Randomized samplers hand out a *fresh* randomization on every
:meth:`SobolSampler.draw_batch` call. Each batch is the first ``n`` points of
an independently scrambled copy of the sequence; successive batches never
continue deeper into one randomization.
"""

from __future__ import annotations

import copy
import io
import os
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

import numpy as np

from ._backend import lms_scramble, sobol_block

BITS = 32
MAX_INDEX = 2**BITS
DIRECTION_FILE = "new-joe-kuo-6.1111"


class DirectionNumberError(ValueError):
    pass


class SobolIndexError(OverflowError):
    pass


class Randomization(str, Enum):
    NONE = "none"
    SHIFT = "shift"
    SCRAMBLE = "scramble"  # linear matrix scramble followed by a digital shift


@dataclass(frozen=True)
class DirectionNumbers:
    """Primitive polynomials and initial direction integers per dimension.

    ``degree[j]``, ``coeff[j]`` and ``m[j]`` describe dimension ``j + 1``.
    Dimension 1 is the van der Corput sequence and carries degree 0.
    """

    degree: tuple[int, ...]
    coeff: tuple[int, ...]
    m: tuple[tuple[int, ...], ...]

    @property
    def dimension(self) -> int:
        return len(self.degree)

    def matrix(self, dim: int | None = None, bits: int = BITS) -> np.ndarray:
        """Direction numbers ``v[j, k] = m_{k+1} << (bits - k - 1)`` as uint32."""
        dim = self.dimension if dim is None else dim
        if dim > self.dimension:
            raise DirectionNumberError(
                f"requested dimension {dim} exceeds table dimension {self.dimension}"
            )
        v = np.zeros((dim, bits), dtype=np.uint32)
        for j in range(dim):
            deg = self.degree[j]
            if deg == 0:
                mk = [1] * bits
            else:
                mk = list(self.m[j][:bits])
                a = self.coeff[j]
                for k in range(deg, bits):
                    # m_k = 2a_1 m_{k-1} ^ ... ^ 2^{s-1} a_{s-1} m_{k-s+1} ^ 2^s m_{k-s} ^ m_{k-s}
                    new = mk[k - deg] ^ (mk[k - deg] << deg)
                    for i in range(1, deg):
                        if (a >> (deg - 1 - i)) & 1:
                            new ^= mk[k - i] << i
                    mk.append(new)
            for k in range(bits):
                v[j, k] = mk[k] << (bits - k - 1)
        return v


def load_direction_numbers(source=None, dimension: int | None = None) -> DirectionNumbers:
    """Parse a Joe-Kuo table: one header line then rows ``d s a m_1 ... m_s``.

    ``source`` may be a path, a text or binary stream, or ``None`` for the
    bundled 1111-dimension table. When ``dimension`` is given the table must
    cover it; rows past it are ignored.
    """
    if source is None:
        text = resources.files("rqmc_sqn").joinpath("data", DIRECTION_FILE).read_text()
    elif isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            text = fh.read()
    else:
        raw = source.read()
        text = raw.decode("ascii") if isinstance(raw, bytes) else raw

    degree, coeff, m = [0], [0], [()]
    lines = io.StringIO(text).read().splitlines()
    for lineno, line in enumerate(lines[1:], start=2):
        if dimension is not None and len(degree) >= dimension:
            break
        parts = line.split()
        if not parts:
            continue
        try:
            vals = [int(p) for p in parts]
        except ValueError:
            raise DirectionNumberError(f"line {lineno}: non-integer field in {line!r}") from None
        if len(vals) < 4:
            raise DirectionNumberError(f"line {lineno}: expected 'd s a m_1 ... m_s'")
        d, s, a, mi = vals[0], vals[1], vals[2], vals[3:]
        if d != len(degree) + 1:
            raise DirectionNumberError(f"line {lineno}: expected dimension {len(degree) + 1}, got {d}")
        if s < 1 or len(mi) != s:
            raise DirectionNumberError(f"line {lineno}: degree {s} but {len(mi)} direction integers")
        if not 0 <= a < 2 ** (s - 1):
            raise DirectionNumberError(f"line {lineno}: coefficient word {a} out of range")
        for i, mv in enumerate(mi, start=1):
            if mv % 2 == 0 or not 0 < mv < 2**i:
                raise DirectionNumberError(
                    f"line {lineno}: m_{i}={mv} must be odd and below 2^{i}"
                )
        degree.append(s)
        coeff.append(a)
        m.append(tuple(mi))
    if dimension is not None and len(degree) < dimension:
        raise DirectionNumberError(
            f"requested dimension {dimension} exceeds table dimension {len(degree)}"
        )
    return DirectionNumbers(tuple(degree), tuple(coeff), tuple(m))


_DEFAULT_TABLE: DirectionNumbers | None = None


def default_direction_numbers() -> DirectionNumbers:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = load_direction_numbers()
    return _DEFAULT_TABLE


@dataclass
class SampleBatch:
    """``n`` points in ``[0, 1)^s`` drawn for iteration ``k``."""

    points: np.ndarray
    k: int = 0

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _scramble_directions(v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Left-multiply each dimension's generator matrix by a random unit lower-triangular L.

    Column ``c`` of L (digit ``c`` counted from the most significant bit) is the
    integer with bit ``BITS-1-c`` set and uniformly random bits below it.
    """
    s = v.shape[0]
    top = np.uint32(1) << (np.uint32(BITS - 1) - np.arange(BITS, dtype=np.uint32))
    below = top - np.uint32(1)
    noise = rng.integers(0, 2**BITS, size=(s, BITS), dtype=np.uint64).astype(np.uint32)
    return lms_scramble(v, top[None, :] | (noise & below[None, :]))


@dataclass
class SobolSampler:
    """Stateful generator of (randomized) Sobol' points in ``[0, 1)^dim``.

    Not safe to share between threads; create one instance per consumer.
    """

    dim: int
    randomization: Randomization = Randomization.SCRAMBLE
    seed: int = 0
    directions: DirectionNumbers | None = None
    index: int = 0
    draws: int = 0
    _base: np.ndarray = field(init=False, repr=False)
    _dirs: np.ndarray = field(init=False, repr=False)
    _shift: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        self.randomization = Randomization(self.randomization)
        table = self.directions or default_direction_numbers()
        self._base = table.matrix(self.dim)
        self._randomize(0)

    def _randomize(self, counter: int) -> None:
        if self.randomization is Randomization.NONE:
            self._dirs = self._base
            self._shift = np.zeros(self.dim, dtype=np.uint32)
            return
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, counter]))
        if self.randomization is Randomization.SCRAMBLE:
            self._dirs = _scramble_directions(self._base, rng)
        else:
            self._dirs = self._base
        self._shift = rng.integers(0, 2**BITS, size=self.dim, dtype=np.uint64).astype(np.uint32)

    def clone(self) -> "SobolSampler":
        return copy.deepcopy(self)

    def _emit(self, n: int) -> np.ndarray:
        if self.index + n > MAX_INDEX:
            raise SobolIndexError(f"index {self.index + n - 1} exceeds 2^{BITS} - 1")
        pts = sobol_block(self._dirs, self._shift, self.index, n)
        self.index += n
        return pts

    def next_point(self) -> np.ndarray:
        """Next point of the current randomization."""
        return self._emit(1)[0]

    def draw_batch(self, n: int) -> SampleBatch:
        """``n`` points for a new iteration.

        Randomized modes re-randomize first and restart at index 0; the
        deterministic mode continues from the current index.
        """
        if n < 1:
            raise ValueError("batch size must be at least 1")
        k = self.draws
        self.draws += 1
        if self.randomization is not Randomization.NONE:
            self._randomize(self.draws)
            self.index = 0
        return SampleBatch(self._emit(n), k)


@dataclass
class MCSampler:
    """IID uniform points from a seeded PCG64 stream; same interface as SobolSampler."""

    dim: int
    seed: int = 0
    draws: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self._rng = np.random.default_rng(self.seed)

    def draw_batch(self, n: int) -> SampleBatch:
        if n < 1:
            raise ValueError("batch size must be at least 1")
        k = self.draws
        self.draws += 1
        return SampleBatch(self._rng.random((n, self.dim)), k)


def next_point(sampler: SobolSampler) -> np.ndarray:
    return sampler.next_point()


def draw_batch(sampler, n: int) -> SampleBatch:
    return sampler.draw_batch(n)


def mc_batch(seed: int, n: int, s: int) -> SampleBatch:
    return MCSampler(s, seed).draw_batch(n)


def make_sampler(kind: str, dim: int, seed: int = 0, stream: int = 0):
    """Sampler factory used by the optimizers and the harness.

    ``kind`` is ``"mc"``, ``"rqmc"`` (scramble + shift), ``"shift"`` or
    ``"qmc"`` (unrandomized). ``stream`` separates independent consumers that
    share one user seed, e.g. the gradient and Hessian samples of SQN.
    """
    derived = int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])
    if kind == "mc":
        return MCSampler(dim, derived)
    if kind == "rqmc":
        return SobolSampler(dim, Randomization.SCRAMBLE, derived)
    if kind == "shift":
        return SobolSampler(dim, Randomization.SHIFT, derived)
    if kind == "qmc":
        return SobolSampler(dim, Randomization.NONE, derived)
    raise ValueError(f"unknown sampler kind {kind!r}")
