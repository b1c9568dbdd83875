"""Exact arithmetic-function infrastructure.

Sieved tables (von Mangoldt, Moebius, totient, smallest prime factor),
Dirichlet characters with Gauss sums, Ramanujan sums in closed form and
as a definitional oracle, smooth square-free denominator sets, Farey
levels, and continued-fraction rational approximation.

Everything here is deterministic and immutable after construction, and
the integer-valued functions (mu, phi, Ramanujan sums) are exact.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import CapacityError, DomainError, NumericalConsistencyError, RangeError

# Size budgets; generous for desk scale, guard against runaway requests.
MAX_TABLE_LIMIT = 1 << 25
MAX_CHARACTER_MODULUS = 10_000
MAX_SMOOTH_COUNT = 1 << 21
MAX_FAREY_DENOMINATOR = 1 << 16

CACHE_MAGIC = b"PCL1"


# ---------------------------------------------------------------------------
# Sieved tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArithmeticTables:
    """Sieved arithmetic functions on 1..limit (index 0 unused).

    mangoldt[n] = log p if n = p^a for a prime p, else 0.
    moebius[n] in {-1, 0, 1}; totient[n] = phi(n); spf[n] = smallest
    prime factor of n (spf[1] = 1).  psi_prefix[x] = sum_{n<=x} mangoldt[n].
    """

    limit: int
    mangoldt: np.ndarray
    moebius: np.ndarray
    totient: np.ndarray
    spf: np.ndarray
    primes: np.ndarray
    psi_prefix: np.ndarray

    def psi(self, x: int) -> float:
        """Chebyshev psi(x) = sum of mangoldt over n <= x."""
        if x > self.limit:
            raise RangeError(f"psi({x}) beyond table limit {self.limit}")
        return float(self.psi_prefix[max(x, 0)])

    def mangoldt_support(self, n_max: int) -> tuple[np.ndarray, np.ndarray]:
        """Indices and values of the nonzero mangoldt entries up to n_max."""
        if n_max > self.limit:
            raise RangeError(f"support({n_max}) beyond table limit {self.limit}")
        idx = np.nonzero(self.mangoldt[: n_max + 1])[0]
        return idx, self.mangoldt[idx]

    def factorize(self, n: int) -> list[tuple[int, int]]:
        """Prime factorization via the spf table, as (p, exponent) pairs."""
        if n < 1 or n > self.limit:
            raise RangeError(f"factorize({n}) beyond table limit")
        out = []
        while n > 1:
            p = int(self.spf[n])
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
        return out


def build_tables(limit: int, max_limit: int = MAX_TABLE_LIMIT) -> ArithmeticTables:
    """Sieve all tables up to ``limit``.

    Uses primes up to sqrt(limit) for the vectorized passes and a
    residual-cofactor array to account for the at most one prime factor
    above sqrt(limit).
    """
    if limit < 2:
        raise DomainError("limit must be >= 2")
    if limit > max_limit:
        raise CapacityError(f"limit {limit} exceeds budget {max_limit}")

    n = limit + 1
    spf = np.zeros(n, dtype=np.int64)
    moebius = np.ones(n, dtype=np.int8)
    totient = np.arange(n, dtype=np.int64)
    rem = np.arange(n, dtype=np.int64)  # cofactor after removing primes <= sqrt
    root = math.isqrt(limit)

    for p in range(2, root + 1):
        if spf[p] != 0:
            continue
        sl = spf[p::p]
        sl[sl == 0] = p
        moebius[p::p] = -moebius[p::p]
        p2 = p * p
        moebius[p2::p2] = 0
        tv = totient[p::p]
        tv -= tv // p
        q = p
        while q <= limit:
            rv = rem[q::q]
            rv //= p
            q *= p

    # Entries untouched by the sieve are primes above sqrt(limit).
    unmarked = np.nonzero(spf[2:] == 0)[0] + 2
    spf[unmarked] = unmarked
    spf[1] = 1

    big = np.nonzero(rem[2:] > 1)[0] + 2
    bigp = rem[big]
    moebius[big] = -moebius[big]
    totient[big] = totient[big] // bigp * (bigp - 1)
    moebius[0] = 0
    totient[0] = 0

    primes = np.nonzero(spf[2:] == np.arange(2, n))[0] + 2

    mangoldt = np.zeros(n, dtype=np.float64)
    mangoldt[primes] = np.log(primes)
    for p in primes[primes <= root]:
        q = int(p) * int(p)
        logp = math.log(int(p))
        while q <= limit:
            mangoldt[q] = logp
            q *= int(p)

    psi_prefix = np.cumsum(mangoldt)

    for arr in (mangoldt, moebius, totient, spf, primes, psi_prefix):
        arr.setflags(write=False)
    return ArithmeticTables(limit, mangoldt, moebius, totient, spf,
                            primes.astype(np.int64), psi_prefix)


def psi_count(x: int, q: int, a: int, tables: ArithmeticTables) -> float:
    """Sum of mangoldt[n] over n <= x with n = a mod q."""
    if x > tables.limit:
        raise RangeError(f"x={x} beyond table limit {tables.limit}")
    if not (0 <= a < q):
        raise DomainError("residue a must satisfy 0 <= a < q")
    start = a if a >= 1 else q
    if start > x:
        return 0.0
    return float(tables.mangoldt[start:x + 1:q].sum())


# ---------------------------------------------------------------------------
# Standalone multiplicative helpers (trial division; small arguments)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1 << 16)
def factorize(n: int) -> tuple[tuple[int, int], ...]:
    """Trial-division factorization as (prime, exponent) pairs."""
    if n < 1:
        raise DomainError("factorize requires n >= 1")
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            out.append((d, e))
        d += 1 if d == 2 else 2
    if n > 1:
        out.append((n, 1))
    return tuple(out)


def mu_of(n: int) -> int:
    f = factorize(n)
    if any(e > 1 for _, e in f):
        return 0
    return -1 if len(f) % 2 else 1


def phi_of(n: int) -> int:
    out = n
    for p, _ in factorize(n):
        out = out // p * (p - 1)
    return out


def is_squarefree_smooth(q: int, smooth_bound: int) -> bool:
    """True iff q is square-free with all prime factors < smooth_bound."""
    return all(e == 1 and p < smooth_bound for p, e in factorize(q))


# ---------------------------------------------------------------------------
# Ramanujan sums
# ---------------------------------------------------------------------------

def ramanujan_sum(q: int, n: int) -> int:
    """c_q(n) in closed form: mu(q/g) * phi(q) / phi(q/g) with g = gcd(n, q)."""
    if q < 1:
        raise DomainError("q must be >= 1")
    g = math.gcd(abs(n), q)
    qg = q // g
    m = mu_of(qg)
    if m == 0:
        return 0
    return m * phi_of(q) // phi_of(qg)


def coprime_residues(q: int) -> np.ndarray:
    """Residues 0 <= a < q with gcd(a, q) = 1 (so [0] for q = 1)."""
    if q == 1:
        return np.array([0], dtype=np.int64)
    r = np.arange(q, dtype=np.int64)
    return r[np.gcd(r, q) == 1]


def ramanujan_sum_oracle(q: int, n: int) -> int:
    """Definitional c_q(n): sum of e(r n / q) over residues r coprime to q.

    Evaluated in floating point, checked for negligible imaginary part,
    and rounded to the nearest integer.
    """
    if q < 1:
        raise DomainError("q must be >= 1")
    r = coprime_residues(q)
    z = np.exp(2j * np.pi * ((r * (n % q)) % q) / q).sum()
    if abs(z.imag) >= 1e-9:
        raise NumericalConsistencyError(f"c_{q}({n}): imaginary residue {z.imag:.3g}")
    val = round(z.real)
    if abs(z.real - val) > 1e-6:
        raise NumericalConsistencyError(f"c_{q}({n}): rounding residue {z.real - val:.3g}")
    return int(val)


# ---------------------------------------------------------------------------
# Dirichlet characters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirichletCharacter:
    """Value table of a character mod q with structure flags."""

    modulus: int
    values: np.ndarray  # complex128, length q
    is_principal: bool
    is_real: bool
    is_primitive: bool

    def __call__(self, n: int) -> complex:
        return complex(self.values[n % self.modulus])


def _primitive_root(p: int) -> int:
    """Smallest primitive root mod an odd prime p."""
    order = p - 1
    fac = [f for f, _ in factorize(order)]
    for g in range(2, p):
        if all(pow(g, order // f, p) != 1 for f in fac):
            return g
    raise DomainError(f"no primitive root mod {p}")  # unreachable for prime p


def _unit_group_generators(p: int, e: int) -> list[tuple[int, int]]:
    """Generators (g, order) of (Z / p^e Z)* for a prime power p^e."""
    m = p ** e
    if p == 2:
        if e == 1:
            return []
        if e == 2:
            return [(3, 2)]
        return [(m - 1, 2), (5, m // 4)]
    g = _primitive_root(p)
    if e > 1 and pow(g, p - 1, p * p) == 1:
        g += p
    return [(g % m, phi_of(m))]


def _character_tables_prime_power(p: int, e: int) -> list[np.ndarray]:
    """All phi(p^e) character value tables mod p^e via generator exponents."""
    m = p ** e
    gens = _unit_group_generators(p, e)
    # discrete logs: index residues by generator exponents
    logs = np.full((m, len(gens)), -1, dtype=np.int64)
    orders = [o for _, o in gens]

    def fill(idx: int, val: int, exps: list[int]):
        if idx == len(gens):
            logs[val] = exps
            return
        g, order = gens[idx]
        cur = val
        for k in range(order):
            fill(idx + 1, cur, exps + [k])
            cur = (cur * g) % m

    fill(0, 1, [])
    units = np.nonzero(logs[:, 0] >= 0)[0] if gens else np.array([1 % m])
    tables = []

    def build(kvec: list[int]):
        vals = np.zeros(m, dtype=np.complex128)
        if gens:
            ang = np.zeros(m, dtype=np.float64)
            for j, order in enumerate(orders):
                ang[units] += kvec[j] * logs[units, j] / order
            vals[units] = np.exp(2j * np.pi * ang[units])
        else:
            vals[1 % m] = 1.0
        return vals

    def rec(idx: int, kvec: list[int]):
        if idx == len(gens):
            tables.append(build(kvec))
            return
        for k in range(orders[idx]):
            rec(idx + 1, kvec + [k])

    rec(0, [])
    return tables


def _is_primitive(q: int, values: np.ndarray) -> bool:
    """Primitive iff no prime p | q leaves the character trivial on
    the units congruent to 1 mod q/p."""
    if q == 1:
        return True
    for p, _ in factorize(q):
        d = q // p
        trivial = True
        for x in range(1 + d, q, d):
            if math.gcd(x, q) == 1 and abs(values[x] - 1.0) > 1e-12:
                trivial = False
                break
        if trivial:
            return False
    return True


def characters_mod(q: int, max_modulus: int = MAX_CHARACTER_MODULUS) -> list[DirichletCharacter]:
    """All phi(q) Dirichlet characters mod q, built by CRT from the
    prime-power unit groups."""
    if q < 1:
        raise DomainError("q must be >= 1")
    if q > max_modulus:
        raise CapacityError(f"modulus {q} exceeds bound {max_modulus}")
    if q == 1:
        vals = np.ones(1, dtype=np.complex128)
        return [DirichletCharacter(1, vals, True, True, True)]

    parts = factorize(q)
    part_tables = [_character_tables_prime_power(p, e) for p, e in parts]
    moduli = [p ** e for p, e in parts]

    idx = np.arange(q, dtype=np.int64)
    residues = [idx % m for m in moduli]

    chars: list[DirichletCharacter] = []

    def rec(j: int, cur: np.ndarray):
        if j == len(parts):
            vals = cur.copy()
            vals.setflags(write=False)
            principal = bool(np.allclose(vals[np.gcd(idx, q) == 1], 1.0, atol=1e-12))
            real = bool(np.max(np.abs(vals.imag)) < 1e-12)
            chars.append(DirichletCharacter(q, vals, principal, real,
                                            _is_primitive(q, vals)))
            return
        for tab in part_tables[j]:
            rec(j + 1, cur * tab[residues[j]])

    rec(0, np.ones(q, dtype=np.complex128))
    return chars


def _kronecker_symbol(a: int, n: int) -> int:
    """Kronecker symbol (a|n) for arbitrary integers."""
    if n == 0:
        return 1 if a in (1, -1) else 0
    sign = 1
    if n < 0:
        n = -n
        if a < 0:
            sign = -1
    # factor out twos of n
    t = 0
    while n % 2 == 0:
        n //= 2
        t += 1
    if t and a % 2 == 0:
        return 0
    if t % 2 == 1 and a % 8 in (3, 5):
        sign = -sign
    a %= n
    # Jacobi symbol loop
    result = sign
    while a != 0:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def is_fundamental_discriminant(d: int) -> bool:
    if d == 0 or d == 1:
        return False
    if d % 4 == 1:
        return mu_of(abs(d)) != 0
    if d % 4 == 0:
        m = d // 4
        return m % 4 in (2, 3) and mu_of(abs(m)) != 0
    return False


def kronecker_character(d: int) -> DirichletCharacter:
    """The real primitive character mod |d| attached to a fundamental
    discriminant d (|d| > 1)."""
    if not is_fundamental_discriminant(d):
        raise DomainError(f"{d} is not a fundamental discriminant")
    q = abs(d)
    vals = np.array([_kronecker_symbol(d, n) for n in range(q)], dtype=np.complex128)
    vals.setflags(write=False)
    return DirichletCharacter(q, vals, False, True, True)


def gauss_sum(chi: DirichletCharacter, a: int) -> complex:
    """Normalized character sum (1/phi(q)) * sum_r chi(r) e(r a / q)."""
    q = chi.modulus
    r = coprime_residues(q)
    z = (chi.values[r] * np.exp(2j * np.pi * (r * (a % q)) / q)).sum()
    return complex(z) / phi_of(q)


def gauss_sum_table(chi: DirichletCharacter) -> np.ndarray:
    """gauss_sum(chi, a) for all residues a mod q, via one inverse DFT."""
    q = chi.modulus
    tau = q * np.fft.ifft(chi.values)
    return tau / phi_of(q)


# ---------------------------------------------------------------------------
# Exceptional-character registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExceptionalEntry:
    modulus: int
    beta: float
    character: DirichletCharacter


@dataclass(frozen=True)
class ExceptionalRegistry:
    """Hypothetical exceptional characters with their real zeros beta.

    None are known numerically, so the default registry is empty; entries
    are user-injected (real, primitive, non-principal) for code-path tests.
    """

    entries: tuple[ExceptionalEntry, ...] = field(default=())

    def __post_init__(self):
        last = 0
        for e in self.entries:
            chi = e.character
            if chi.modulus != e.modulus:
                raise DomainError("entry modulus does not match character")
            if chi.is_principal or not chi.is_real or not chi.is_primitive:
                raise DomainError("exceptional character must be real, primitive, non-principal")
            if not (0.5 < e.beta < 1.0):
                raise DomainError("beta must lie in (1/2, 1)")
            if e.modulus <= last:
                raise DomainError("moduli must be strictly increasing")
            last = e.modulus

    def lookup(self, q: int) -> ExceptionalEntry | None:
        for e in self.entries:
            if e.modulus == q:
                return e
        return None

    @staticmethod
    def from_pairs(pairs) -> "ExceptionalRegistry":
        """Build from (fundamental discriminant, beta) pairs."""
        entries = tuple(
            ExceptionalEntry(abs(d), beta, kronecker_character(d))
            for d, beta in sorted(pairs, key=lambda t: abs(t[0]))
        )
        return ExceptionalRegistry(entries)


EMPTY_REGISTRY = ExceptionalRegistry()


def page_prediction(x: int, q: int, a: int, registry: ExceptionalRegistry) -> float:
    """Main terms of the prime count psi(x; q, a): x/phi(q), minus the
    exceptional-zero correction chi(a) x^beta / (beta phi(q)) when modulus
    q carries a registered character."""
    if q < 1 or not (0 <= a < q):
        raise DomainError("need q >= 1 and 0 <= a < q")
    if math.gcd(a, q) != 1 and q > 1:
        raise DomainError(f"residue {a} not coprime to modulus {q}")
    main = x / phi_of(q)
    entry = registry.lookup(q)
    if entry is None:
        return main
    chi_a = entry.character(a).real
    return main - chi_a * x ** entry.beta / (entry.beta * phi_of(q))


# ---------------------------------------------------------------------------
# Smooth square-free denominators, Farey levels, rational approximation
# ---------------------------------------------------------------------------

def smooth_squarefree(smooth_bound: int, max_count: int = MAX_SMOOTH_COUNT) -> list[int]:
    """All square-free integers whose prime factors are all < smooth_bound
    (strict), sorted ascending; contains 1."""
    if smooth_bound < 1:
        raise DomainError("bound must be >= 1")
    primes = [p for p in range(2, smooth_bound) if factorize(p) == ((p, 1),)]
    if 2 ** len(primes) > max_count:
        raise CapacityError(f"2^{len(primes)} smooth square-free values exceed cap {max_count}")
    out = [1]
    for p in primes:
        out += [p * v for v in out]
    return sorted(out)


@dataclass(frozen=True, order=True)
class Rational:
    """Reduced fraction a/q with 0 <= a < q; (0, 1) is the zero rational."""

    a: int
    q: int

    def __post_init__(self):
        if self.q < 1 or not (0 <= self.a < self.q) or math.gcd(self.a, self.q) != 1:
            if not (self.a == 0 and self.q == 1):
                raise DomainError(f"not a reduced fraction in [0,1): {self.a}/{self.q}")

    @property
    def value(self) -> float:
        return self.a / self.q

    def __str__(self):
        return f"{self.a}/{self.q}"


def circle_distance(x: float, y: float) -> float:
    """Distance between x and y on R/Z."""
    d = abs(x - y) % 1.0
    return min(d, 1.0 - d)


def _convergents_within(x: float, bound: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Last continued-fraction convergent (h, k) of x with k <= bound,
    together with the preceding convergent (may be the formal (1, 0))."""
    hm1, km1 = 1, 0
    h, k = 0, 1  # first convergent of x in [0, 1)
    val = x
    for _ in range(64):
        frac = val - math.floor(val)
        if frac < 1e-15:
            break
        val = 1.0 / frac
        a = math.floor(val)
        hn, kn = a * h + hm1, a * k + km1
        if kn > bound:
            break
        hm1, km1, h, k = h, k, hn, kn
    return (h, k), (hm1, km1)


def dirichlet_approx(xi: float, Q: int) -> Rational:
    """Continued-fraction witness of Dirichlet's theorem: a reduced a/q
    with q <= Q and |xi - a/q| <= 1/(q(Q+1)) (distance on the circle)."""
    if Q < 1:
        raise DomainError("Q must be >= 1")
    (h, k), _ = _convergents_within(xi % 1.0, Q)
    return Rational(h % k if k > 1 else 0, k)


def farey_bracket(x: float, bound: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Consecutive fractions L <= x <= R of the order-``bound`` Farey
    sequence bracketing x, as unreduced (numerator, denominator) pairs.

    R pairs the last convergent within the bound with its extremal
    semiconvergent; the two always satisfy |cross product| = 1.
    """
    (h, k), (hm1, km1) = _convergents_within(x, bound)
    if km1 == 0:
        # x indistinguishable from an integer: bracket is 0/1, 1/bound
        return (0, 1), (1, bound)
    t = (bound - km1) // k
    semi = (hm1 + t * h, km1 + t * k)
    if h / k <= x <= semi[0] / semi[1]:
        return (h, k), semi
    if semi[0] / semi[1] <= x <= h / k:
        return semi, (h, k)
    # x equals the convergent up to rounding; order the pair around it
    return ((h, k), semi) if h / k <= semi[0] / semi[1] else (semi, (h, k))


def fractions_near(x: float, bound: int, radius: float) -> list[Rational]:
    """All reduced fractions a/q with q <= bound within circle distance
    ``radius`` (<= 1/2) of x, found by walking Farey neighbors outward
    from the bracketing pair rather than enumerating a whole level."""
    x = x % 1.0
    left, right = farey_bracket(x, bound)
    found: dict[tuple[int, int], Rational] = {}

    def record(u, v):
        # real-line distance; wrapped candidates are met by the other walk
        if abs(x - u / v) > radius:
            return False
        uu = u % v
        g = math.gcd(uu, v)
        if g > 1:
            uu, v = uu // g, v // g
        found[(uu, v)] = Rational(uu, v)
        return True

    cur, nxt = left, right
    while record(*cur):
        k = (bound + nxt[1]) // cur[1]
        cur, nxt = (k * cur[0] - nxt[0], k * cur[1] - nxt[1]), cur
    cur, prv = right, left
    while record(*cur):
        k = (bound + prv[1]) // cur[1]
        cur, prv = (k * cur[0] - prv[0], k * cur[1] - prv[1]), cur
    return sorted(found.values(), key=lambda r: (r.q, r.a))


def farey_level(s: int, max_denominator: int = MAX_FAREY_DENOMINATOR) -> list[Rational]:
    """Level-s rationals: {0/1} for s = 0, else all a/q with gcd(a,q)=1
    and 2^s <= q < 2^(s+1)."""
    if s < 0:
        raise DomainError("level must be >= 0")
    if 2 ** (s + 1) > max_denominator:
        raise CapacityError(f"level {s} needs denominators beyond cap {max_denominator}")
    if s == 0:
        return [Rational(0, 1)]
    out = []
    for q in range(2 ** s, 2 ** (s + 1)):
        for a in coprime_residues(q):
            out.append(Rational(int(a), q))
    return out


# ---------------------------------------------------------------------------
# Sieve cache file
# ---------------------------------------------------------------------------

def save_tables(tables: ArithmeticTables, path) -> None:
    """Binary cache: magic "PCL1", limit as 8-byte little-endian, then the
    mangoldt/moebius/totient/spf arrays in declaration order."""
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<Q", tables.limit))
        fh.write(tables.mangoldt.astype("<f8").tobytes())
        fh.write(tables.moebius.astype("<i1").tobytes())
        fh.write(tables.totient.astype("<i8").tobytes())
        fh.write(tables.spf.astype("<i8").tobytes())


def load_tables(path) -> ArithmeticTables:
    data = Path(path).read_bytes()
    if data[:4] != CACHE_MAGIC:
        raise DomainError(f"{path}: bad cache magic {data[:4]!r}")
    (limit,) = struct.unpack("<Q", data[4:12])
    n = limit + 1
    off = 12
    mangoldt = np.frombuffer(data, "<f8", n, off).copy()
    off += 8 * n
    moebius = np.frombuffer(data, "<i1", n, off).copy()
    off += n
    totient = np.frombuffer(data, "<i8", n, off).copy()
    off += 8 * n
    spf = np.frombuffer(data, "<i8", n, off).copy()
    if off + 8 * n != len(data):
        raise DomainError(f"{path}: truncated cache file")
    primes = np.nonzero(spf[2:] == np.arange(2, n))[0] + 2
    psi_prefix = np.cumsum(mangoldt)
    for arr in (mangoldt, moebius, totient, spf, primes, psi_prefix):
        arr.setflags(write=False)
    return ArithmeticTables(int(limit), mangoldt, moebius, totient, spf,
                            primes.astype(np.int64), psi_prefix)
