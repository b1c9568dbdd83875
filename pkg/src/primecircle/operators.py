"""Spatial-side operators on finitely supported lattice functions.

Exact prime averages (direct and FFT convolution), dyadic maximal and
linearized operators, multiplier application by periodized DFT, and the
closed-form smooth/exceptional kernels with their definitional oracles.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import kernels, ntheory
from .errors import DomainError, RangeError
from .multiplier import bump_inv_kernel
from .ntheory import ArithmeticTables, ExceptionalRegistry, EMPTY_REGISTRY

_DIRECT_CONV_MAX = 1 << 22  # len(f) * N above this switches to FFT


# ---------------------------------------------------------------------------
# Lattice functions and intervals
# ---------------------------------------------------------------------------

@dataclass
class LatticeFunction:
    """Finitely supported function on Z: dense values on
    [offset, offset + len(values))."""

    offset: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)

    @classmethod
    def delta(cls, x: int = 0, value: float = 1.0) -> "LatticeFunction":
        return cls(x, np.array([value], dtype=np.float64))

    @classmethod
    def indicator(cls, points) -> "LatticeFunction":
        pts = np.asarray(sorted(set(int(p) for p in points)), dtype=np.int64)
        if pts.size == 0:
            return cls(0, np.zeros(0, dtype=np.float64))
        vals = np.zeros(int(pts[-1] - pts[0]) + 1, dtype=np.float64)
        vals[pts - pts[0]] = 1.0
        return cls(int(pts[0]), vals)

    @property
    def end(self) -> int:
        return self.offset + len(self.values)

    def at(self, x: int):
        if self.offset <= x < self.end:
            return self.values[x - self.offset]
        return self.values.dtype.type(0)

    __call__ = at

    def l1(self) -> float:
        return float(np.abs(self.values).sum())

    def l2(self) -> float:
        return float(np.sqrt((np.abs(self.values) ** 2).sum()))

    def linf(self) -> float:
        return float(np.abs(self.values).max()) if len(self.values) else 0.0

    def bracket_average(self, interval: "Interval", r: float = 1.0) -> float:
        """(|I|^{-1} sum_{x in I} |f(x)|^r)^{1/r}."""
        lo = max(interval.start, self.offset)
        hi = min(interval.start + interval.length, self.end)
        total = 0.0
        if hi > lo:
            total = float((np.abs(self.values[lo - self.offset:hi - self.offset]) ** r).sum())
        return (total / interval.length) ** (1.0 / r)

    def shifted(self, dx: int) -> "LatticeFunction":
        return LatticeFunction(self.offset + dx, self.values.copy())

    def reflected(self) -> "LatticeFunction":
        """The function x -> f(-x)."""
        return LatticeFunction(-(self.end - 1), self.values[::-1].copy())

    def _binary(self, other: "LatticeFunction", op) -> "LatticeFunction":
        lo = min(self.offset, other.offset)
        hi = max(self.end, other.end)
        dtype = np.result_type(self.values.dtype, other.values.dtype)
        a = np.zeros(hi - lo, dtype=dtype)
        b = np.zeros(hi - lo, dtype=dtype)
        a[self.offset - lo:self.end - lo] = self.values
        b[other.offset - lo:other.end - lo] = other.values
        return LatticeFunction(lo, op(a, b))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return LatticeFunction(self.offset, self.values * scalar)

    __rmul__ = __mul__

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "value"])
            for i, v in enumerate(self.values):
                w.writerow([self.offset + i, repr(complex(v)) if np.iscomplexobj(self.values) else repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "LatticeFunction":
        xs, vs = [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                xs.append(int(row["x"]))
                vs.append(complex(row["value"]))
        vals = np.array(vs)
        if np.abs(vals.imag).max(initial=0.0) == 0.0:
            vals = vals.real
        return cls(xs[0] if xs else 0, vals)

    def to_json_dict(self) -> dict:
        if np.iscomplexobj(self.values):
            payload = [[float(v.real), float(v.imag)] for v in self.values]
        else:
            payload = [float(v) for v in self.values]
        return {"offset": self.offset, "values": payload}

    @classmethod
    def from_json_dict(cls, d: dict) -> "LatticeFunction":
        vals = d["values"]
        if vals and isinstance(vals[0], list):
            arr = np.array([complex(a, b) for a, b in vals])
        else:
            arr = np.array(vals, dtype=np.float64)
        return cls(int(d["offset"]), arr)


@dataclass(frozen=True)
class Interval:
    """Consecutive integers [start, start + length)."""

    start: int
    length: int

    def __post_init__(self):
        if self.length <= 0:
            raise DomainError("interval length must be positive")

    @property
    def stop(self) -> int:
        return self.start + self.length

    def contains(self, x: int) -> bool:
        return self.start <= x < self.stop

    def triple(self) -> "Interval":
        return Interval(self.start - self.length, 3 * self.length)

    def halves(self) -> tuple["Interval", "Interval"]:
        h = self.length // 2
        return Interval(self.start, h), Interval(self.start + h, self.length - h)


@dataclass(frozen=True)
class DyadicScaleSet:
    """Sorted powers of two."""

    scales: tuple[int, ...]

    def __post_init__(self):
        if list(self.scales) != sorted(set(self.scales)):
            raise DomainError("scales must be sorted and distinct")
        for s in self.scales:
            if s < 1 or s & (s - 1):
                raise DomainError(f"scale {s} is not a power of two")

    @classmethod
    def up_to(cls, n_max: int) -> "DyadicScaleSet":
        k = int(math.log2(n_max))
        return cls(tuple(2 ** j for j in range(k + 1)))


# ---------------------------------------------------------------------------
# Convolution averages
# ---------------------------------------------------------------------------

def _convolve(values: np.ndarray, kern: np.ndarray) -> np.ndarray:
    """Full linear convolution, direct for small problems, FFT above the
    size threshold; the two agree to ~1e-15 relative."""
    n_out = len(values) + len(kern) - 1
    if len(values) * len(kern) <= _DIRECT_CONV_MAX:
        return np.convolve(values, kern)
    L = 1 << (n_out - 1).bit_length()
    if np.iscomplexobj(values):
        return np.fft.ifft(np.fft.fft(values, L) * np.fft.fft(kern, L))[:n_out]
    return np.fft.irfft(np.fft.rfft(values, L) * np.fft.rfft(kern, L), L)[:n_out]


def average(f: LatticeFunction, N: int, tables: ArithmeticTables,
            force: str | None = None) -> LatticeFunction:
    """Prime average: (1/N) sum_{n<=N} mangoldt(n) f(x-n)."""
    if N > tables.limit:
        raise RangeError(f"N={N} beyond table limit {tables.limit}")
    kern = tables.mangoldt[1:N + 1] / N
    if force == "direct":
        out = np.convolve(f.values, kern)
    elif force == "fft":
        n_out = len(f.values) + N - 1
        L = 1 << (n_out - 1).bit_length()
        out = np.fft.irfft(np.fft.rfft(f.values, L) * np.fft.rfft(kern, L), L)[:n_out]
    else:
        out = _convolve(f.values, kern)
    return LatticeFunction(f.offset + 1, out)


def flat_average_weights(N: int, beta: float) -> np.ndarray:
    """Kernel weights of the tilted average: (n^b - (n-1)^b) / (N b)."""
    if not (0.5 < beta <= 1.0):
        raise DomainError("beta must lie in (1/2, 1]")
    n = np.arange(N + 1, dtype=np.float64)
    return (n[1:] ** beta - n[:-1] ** beta) / (N * beta)


def mobius_average(f: LatticeFunction, N: int, beta: float = 1.0) -> LatticeFunction:
    """Convolution with the tilted-average kernel; beta=1 is the plain mean."""
    return LatticeFunction(f.offset + 1, _convolve(f.values, flat_average_weights(N, beta)))


def maximal(f: LatticeFunction, scales: DyadicScaleSet,
            tables: ArithmeticTables) -> LatticeFunction:
    """Pointwise sup of |A_N f| over the scale set."""
    n_max = scales.scales[-1]
    out = LatticeFunction(f.offset + 1, np.zeros(len(f.values) + n_max - 1))
    for N in scales.scales:
        g = average(f, N, tables)
        seg = out.values[:len(g.values)]
        np.maximum(seg, np.abs(g.values), out=seg)
    return out


def average_values_dyadic(points, sources, N_max: int,
                          tables: ArithmeticTables) -> np.ndarray:
    """A_{2^k} 1_F at the given points for k = 0..log2(N_max), computed by
    bucketed pair sums (no full-range convolution).

    Returns shape (len(points), kmax+1)."""
    kmax = int(math.log2(N_max))
    if N_max != 2 ** kmax:
        raise DomainError("N_max must be a power of two")
    if N_max > tables.limit:
        raise RangeError("N_max beyond table limit")
    pts = np.asarray(points, dtype=np.int64)
    src = np.asarray(sorted(sources), dtype=np.int64)
    blocks = kernels.dyadic_block_sums(pts, src, tables.mangoldt, kmax)
    csum = np.cumsum(blocks, axis=1)
    return csum * (2.0 ** -np.arange(kmax + 1))


def maximal_on_points(points, sources, N_max: int,
                      tables: ArithmeticTables) -> np.ndarray:
    """Maximal dyadic prime average of the indicator of ``sources``,
    evaluated only at ``points``."""
    return average_values_dyadic(points, sources, N_max, tables).max(axis=1)


# ---------------------------------------------------------------------------
# Admissible linearization
# ---------------------------------------------------------------------------

def _window_averages(f: LatticeFunction, xs: np.ndarray, N: int) -> np.ndarray:
    """Plain averages (1/N) sum_{n=1..N} f(x-n) via prefix sums."""
    prefix = np.concatenate([[0.0], np.cumsum(f.values)])

    def total_upto(t):  # sum of f over (-inf, t]
        idx = np.clip(t - f.offset + 1, 0, len(f.values))
        return prefix[idx]

    return (total_upto(xs - 1) - total_upto(xs - N - 1)) / N


def admissible_tau(f: LatticeFunction, I0: Interval) -> np.ndarray:
    """Smallest dyadic stopping scale per point of I0: tau(x) is the least
    power of two such that every dyadic plain average at scale >= tau(x)
    stays below 10 times the global average over 3*I0.

    Output is a dense int64 array aligned to I0 (tau <= |I0| always holds
    since coarse averages of a function supported in 3*I0 are at most
    three times the global average).
    """
    if np.any(f.values < 0):
        raise DomainError("admissible_tau requires a nonnegative function")
    if I0.length & (I0.length - 1):
        raise DomainError("|I0| must be a power of two")
    t3 = I0.triple()
    if f.offset < t3.start or f.end > t3.stop:
        raise DomainError("support of f must lie in 3*I0")
    thresh = 10.0 * f.bracket_average(t3, 1.0)
    xs = np.arange(I0.start, I0.stop, dtype=np.int64)
    tau = np.ones(len(xs), dtype=np.int64)
    if thresh == 0.0:
        return tau
    # scales at or above |I0| are automatically controlled (average of a
    # function living on 3*I0 is at most 3x the global average there), so
    # only scan the dyadic scales below |I0| for violations
    k_top = max(int(math.log2(I0.length)) - 1, 0)
    for k in range(k_top + 1):
        bad = _window_averages(f, xs, 2 ** k) > thresh
        tau[bad] = np.maximum(tau[bad], 2 ** (k + 1))
    return tau


def linearized(f: LatticeFunction, tau: np.ndarray, I0: Interval,
               tables: ArithmeticTables) -> LatticeFunction:
    """Pointwise A_{tau(x)} f(x) on I0, for a dyadic-valued scale map."""
    tau = np.asarray(tau, dtype=np.int64)
    if len(tau) != I0.length:
        raise DomainError("tau must be aligned to I0")
    out = np.zeros(I0.length, dtype=np.float64)
    for N in np.unique(tau):
        if N < 1 or N & (N - 1):
            raise DomainError(f"tau value {N} is not dyadic")
        g = average(f, int(N), tables)
        sel = np.nonzero(tau == N)[0]
        xs = I0.start + sel
        inside = (xs >= g.offset) & (xs < g.end)
        out[sel[inside]] = g.values[xs[inside] - g.offset].real
    return LatticeFunction(I0.start, out)


# ---------------------------------------------------------------------------
# Multiplier application by periodized DFT
# ---------------------------------------------------------------------------

def apply_multiplier(f: LatticeFunction, model, L: int | None = None) -> LatticeFunction:
    """DFT of length L, multiply by the model at j/L, inverse DFT.

    This periodizes the true lattice operator with period L; tails of the
    operator kernel wrap around, so errors decay as L grows (halving per
    doubling for the kernels used here, which decay like x^-2).
    """
    N = getattr(model, "N", 0)
    min_L = 2 * (len(f.values) + N)
    if L is None:
        L = 1 << (8 * (len(f.values) + max(N, 1)) - 1).bit_length()
    if L < min_L:
        raise DomainError(f"transform length {L} < required {min_L}")
    freqs = np.arange(L, dtype=np.float64) / L
    mult = model.values(freqs)
    spec = np.fft.fft(f.values, L)
    out = np.fft.ifft(spec * mult)
    return LatticeFunction(f.offset, out)


# ---------------------------------------------------------------------------
# Smooth-denominator kernel and its closed form
# ---------------------------------------------------------------------------

def _primes_below(Q: int) -> list[int]:
    return [p for p in range(2, Q) if ntheory.factorize(p) == ((p, 1),)]


@lru_cache(maxsize=32)
def _smooth_mask_arrays(Q: int):
    """Per-subset products over the primes below Q, indexed by bitmask:
    sign (parity), products of (p-1), and the common-denominator split."""
    primes = _primes_below(Q)
    K = len(primes)
    if K > 20:
        raise DomainError(f"oracle limited to < 2^20 subsets, got 2^{K}")
    size = 1 << K
    phiprod = np.ones(size, dtype=object)
    for i, p in enumerate(primes):
        bit = 1 << i
        for m in range(bit):
            phiprod[m | bit] = phiprod[m] * (p - 1)
    total = int(phiprod[size - 1])
    return primes, phiprod, total


def _divisor_mask(x: int, primes: list[int]) -> int:
    if x == 0:
        return (1 << len(primes)) - 1
    m = 0
    for i, p in enumerate(primes):
        if x % p == 0:
            m |= 1 << i
    return m


@lru_cache(maxsize=1 << 16)
def _s_oracle_by_mask(Q: int, dmask: int) -> Fraction:
    """Literal sum over the square-free Q-smooth denominators of
    mu(q) c_q(x) / phi(q), with c_q exact via gcd structure; depends on x
    only through the set of primes < Q dividing x (encoded in dmask)."""
    primes, phiprod, total = _smooth_mask_arrays(Q)
    size = 1 << len(primes)
    # each term is sign * phiprod[m & dmask] * (total // phiprod[m]); the
    # vectorized two-limb path is exact as long as the accumulators stay
    # within int64 (see the bound below), otherwise fall back to big ints
    if total < (1 << 62) and int(phiprod[dmask]) * size < (1 << 29):
        phi64 = phiprod.astype(np.int64)
        qdiv = (total // phiprod).astype(np.int64)
        masks = np.arange(size, dtype=np.int64)
        inter = masks & dmask
        c_part = phi64[inter]
        sign = np.where(np.bitwise_count(inter.astype(np.uint64)) % 2 == 1, -1, 1)
        hi, lo = qdiv >> 32, qdiv & 0xFFFFFFFF
        term = sign * c_part
        s_hi = int(np.sum(term * hi, dtype=np.int64))
        s_lo = int(np.sum(term * lo, dtype=np.int64))
        return Fraction((s_hi << 32) + s_lo, total)
    acc = 0
    for m in range(size):
        inter = m & dmask
        sign = -1 if bin(inter).count("1") % 2 else 1
        acc += sign * int(phiprod[inter]) * (total // int(phiprod[m]))
    return Fraction(acc, total)


def s_function_oracle_exact(x: int, Q: int) -> Fraction:
    """Exact-rational literal sum over the smooth square-free denominators."""
    primes = _primes_below(Q)
    return _s_oracle_by_mask(Q, _divisor_mask(abs(x), primes))


def s_function_exact(x: int, Q: int) -> Fraction:
    """Closed form: product of p/(p-1) over primes p < Q when none divides
    x, else 0.  (x = 0 counts every prime as a divisor; see the oracle.)"""
    primes = _primes_below(Q)
    if x == 0:
        return Fraction(1) if not primes else Fraction(0)
    out = Fraction(1)
    for p in primes:
        if abs(x) % p == 0:
            return Fraction(0)
        out *= Fraction(p, p - 1)
    return out


def s_function(x: int, Q: int) -> float:
    return float(s_function_exact(x, Q))


def s_function_oracle(x: int, Q: int) -> float:
    return float(s_function_oracle_exact(x, Q))


def _scaled_bump_kernel(s: int, y: np.ndarray) -> np.ndarray:
    """K_s(y) = 4^{-s} k(4^{-s} y) for the trapezoid inverse transform k."""
    scale = 0.25 ** s
    return scale * bump_inv_kernel(scale * y)


def _flat_window_kernel_sums(xs: np.ndarray, s: int, N: int) -> np.ndarray:
    """(M_N * K_s)(x) = (1/N) sum_{m=1..N} K_s(x - m) via one cumulative sum."""
    lo = int(xs.min()) - N
    hi = int(xs.max()) - 1
    grid = np.arange(lo, hi + 1, dtype=np.float64)
    csum = np.concatenate([[0.0], np.cumsum(_scaled_bump_kernel(s, grid))])
    hi_idx = xs - 1 - lo + 1
    lo_idx = xs - N - lo
    return (csum[hi_idx] - csum[lo_idx]) / N


def low_kernel(x, Q: int, N: int) -> np.ndarray | float:
    """Spatial kernel of the smooth-denominator part: for each square-free
    Q-smooth q, (mu(q)/phi(q)) c_q(-x) times the flat average convolved
    with the level-s(q) bump kernel."""
    scalar = np.isscalar(x)
    xs = np.atleast_1d(np.asarray(x, dtype=np.int64))
    primes = _primes_below(Q)
    div = {p: (np.abs(xs) % p == 0) for p in primes}
    window = {}
    out = np.zeros(len(xs), dtype=np.float64)
    for q in ntheory.smooth_squarefree(Q):
        s = max(q.bit_length() - 1, 0)
        if s not in window:
            window[s] = _flat_window_kernel_sums(xs, s, N)
        coeff = np.full(len(xs), ntheory.mu_of(q) / ntheory.phi_of(q))
        for p, _ in ntheory.factorize(q):
            coeff = coeff * np.where(div[p], p - 1, -1)
        out += coeff * window[s]
    return float(out[0]) if scalar else out


def _tilted_window_kernel_sums(xs: np.ndarray, s: int, N: int, beta: float) -> np.ndarray:
    """(M_N^beta * K_s)(x) = sum_m w_m K_s(x - m) with the tilted weights."""
    w = flat_average_weights(N, beta)
    out = np.empty(len(xs), dtype=np.float64)
    m = np.arange(1, N + 1, dtype=np.float64)
    step = max(1, (1 << 22) // (N + 1))
    for i in range(0, len(xs), step):
        chunk = xs[i:i + step, None] - m[None, :]
        out[i:i + step] = _scaled_bump_kernel(s, chunk) @ w
    return out


def ex_kernel(x, Q: int, N: int, registry: ExceptionalRegistry = EMPTY_REGISTRY) -> np.ndarray | float:
    """Spatial kernel of the exceptional part: for each registered modulus
    q < Q, the closed character sum (q/phi(q)) chi(x) times the tilted
    average convolved with the level-s_q bump kernel."""
    scalar = np.isscalar(x)
    xs = np.atleast_1d(np.asarray(x, dtype=np.int64))
    out = np.zeros(len(xs), dtype=np.float64)
    for entry in registry.entries:
        q = entry.modulus
        if q >= Q:
            continue
        s_q = max(q.bit_length() - 1, 0)
        chi_x = entry.character.values[xs % q].real
        inner = (q / ntheory.phi_of(q)) * chi_x
        out += inner * _tilted_window_kernel_sums(xs, s_q, N, entry.beta)
    return float(out[0]) if scalar else out
