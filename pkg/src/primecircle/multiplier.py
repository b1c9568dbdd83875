"""Frequency-side engine.

Evaluates the transform of the weighted prime average together with its
rational-frequency approximants (level atoms, smooth/rough/exceptional
regroupings, error terms) at arbitrary points of [0, 1), and scans
sup-norms of differences on refined grids.

All model values are 1-periodic complex numbers; every kernel involved
is real, so each transform is conjugate-symmetric about 1/2 and scans
only need [0, 1/2].
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import kernels, ntheory
from .errors import DomainError, RangeError
from .ntheory import ArithmeticTables, ExceptionalRegistry, EMPTY_REGISTRY, Rational

MODEL_KINDS = ("A_hat", "M_hat", "M_beta_hat", "L_aq", "V", "V_lo", "V_hi", "W",
               "B", "Lo", "Hi", "Ex", "Err", "ErrPrime")


# ---------------------------------------------------------------------------
# Cutoff parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CutoffParams:
    """Knobs of the approximation: mode, smoothness bound Q, and the
    level cutoff exponents.

    ``tilde_n`` is N**grh_exponent in GRH mode and exp(c*sqrt(log2 N)/4)
    unconditionally.  The level sum runs over 2**s < tilde_n**alpha_cut.
    The paper-faithful regime (grh_exponent=1/5, alpha_cut=1/400) keeps
    at most the level-0 atom at desk scale, so experiments default to the
    ``scaled`` preset which widens the cutoff to sqrt(N) and labels every
    report accordingly.
    """

    mode: str = "grh"  # "grh" | "uncond"
    c: float = 1.0
    epsilon: float = 0.05
    alpha_cut: float = 1.0 / 400.0
    Q: int = 2
    grh_exponent: float = 0.2
    regime: str = "paper"

    def __post_init__(self):
        if self.mode not in ("grh", "uncond"):
            raise DomainError(f"unknown mode {self.mode!r}")
        if not (0 < self.epsilon < 0.25):
            raise DomainError("epsilon must lie in (0, 0.25)")
        if self.Q < 1:
            raise DomainError("Q must be >= 1")

    def tilde_n(self, N: int) -> float:
        if self.mode == "grh":
            return float(N) ** self.grh_exponent
        return math.exp(self.c * math.sqrt(math.log2(N)) / 4.0)

    def level_cut(self, N: int) -> float:
        return self.tilde_n(N) ** self.alpha_cut

    def levels_main(self, N: int) -> range:
        """Levels s with 2**s < level_cut(N)."""
        cut = self.level_cut(N)
        if cut <= 1.0:
            return range(0)
        return range(0, math.ceil(math.log2(cut) - 1e-12))

    def levels_rough(self, N: int) -> range:
        """Levels s with Q <= 2**s <= level_cut(N)."""
        cut = self.level_cut(N)
        lo = math.ceil(math.log2(self.Q))
        hi = math.floor(math.log2(cut) + 1e-12) if cut >= 1 else -1
        return range(max(lo, 0), hi + 1)

    def levels_exceptional(self) -> range:
        """Levels s with 2**s <= Q."""
        return range(0, math.floor(math.log2(self.Q) + 1e-12) + 1)

    def validate_Q(self, N: int) -> None:
        if self.Q > self.tilde_n(N):
            raise DomainError(
                f"Q={self.Q} exceeds tilde_n={self.tilde_n(N):.3f} at N={N}")

    @staticmethod
    def scaled(Q: int = 2, mode: str = "grh") -> "CutoffParams":
        """Desk-scale preset: levels up to sqrt(N), clearly labeled."""
        return CutoffParams(mode=mode, alpha_cut=1.0, Q=Q,
                            grh_exponent=0.5, regime="scaled")


# ---------------------------------------------------------------------------
# Bump and elementary transforms
# ---------------------------------------------------------------------------

def bump(xi):
    """Trapezoid cutoff: 1 on |xi| <= 1/4, linear flanks, 0 beyond 1/2."""
    return np.clip(2.0 - 4.0 * np.abs(xi), 0.0, 1.0)


def bump_inv_kernel(x):
    """Exact inverse transform of the trapezoid:
    4 sin(3 pi x / 4) sin(pi x / 4) / (pi x)^2, with value 3/4 at x = 0."""
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    val = 4.0 * np.sin(0.75 * np.pi * safe) * np.sin(0.25 * np.pi * safe) / (
        np.pi * np.pi * safe * safe)
    out = np.where(small, 0.75, val)
    return float(out) if out.ndim == 0 else out


def wrap_half(xi):
    """Reduce to the fundamental window [-1/2, 1/2)."""
    return (np.asarray(xi, dtype=np.float64) + 0.5) % 1.0 - 0.5


def m_hat(xi, N: int):
    """Transform of the flat average: (1/N) sum_{n<=N} e(-n xi)."""
    xi = np.asarray(xi, dtype=np.float64)
    num = np.sin(np.pi * N * xi)
    den = N * np.sin(np.pi * xi)
    flat = np.abs(den) < 1e-300
    ratio = np.where(flat, 1.0, num / np.where(flat, 1.0, den))
    out = np.exp(-1j * np.pi * (N + 1) * xi) * ratio
    out = np.where(flat, 1.0 + 0.0j, out)
    return complex(out) if out.ndim == 0 else out


@lru_cache(maxsize=64)
def _beta_weights(N: int, beta: float) -> np.ndarray:
    n = np.arange(N + 1, dtype=np.float64)
    w = (n[1:] ** beta - n[:-1] ** beta) / (N * beta)
    w.setflags(write=False)
    return w


def m_beta_hat(xi, N: int, beta: float):
    """Transform of the tilted average with increments (n^b - (n-1)^b)/(N b)."""
    if not (0.5 < beta <= 1.0):
        raise DomainError("beta must lie in (1/2, 1]")
    if beta == 1.0:
        return m_hat(xi, N)
    scalar = np.isscalar(xi) or np.ndim(xi) == 0
    xis = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    support = np.arange(1, N + 1, dtype=np.int64)
    out = kernels.exp_sums(support, _beta_weights(N, beta), xis)
    return complex(out[0]) if scalar else out


def a_hat(xi, N: int, tables: ArithmeticTables):
    """Transform of the prime average: (1/N) sum_{n<=N} mangoldt(n) e(-n xi)."""
    if N > tables.limit:
        raise RangeError(f"N={N} beyond table limit {tables.limit}")
    scalar = np.isscalar(xi) or np.ndim(xi) == 0
    xis = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    idx, vals = tables.mangoldt_support(N)
    out = kernels.exp_sums(idx.astype(np.int64), vals, xis) / N
    return complex(out[0]) if scalar else out


def a_hat_rfft(N: int, L: int, tables: ArithmeticTables) -> np.ndarray:
    """a_hat at the grid j/L for j = 0..L//2, via one real FFT."""
    if N > tables.limit:
        raise RangeError(f"N={N} beyond table limit {tables.limit}")
    if L < N + 1:
        raise DomainError("grid length must exceed N")
    buf = np.zeros(L, dtype=np.float64)
    buf[1:N + 1] = tables.mangoldt[1:N + 1]
    return np.fft.rfft(buf) / N


# ---------------------------------------------------------------------------
# Gauss-coefficient caches
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4096)
def principal_coeff(q: int) -> float:
    """Normalized principal coefficient mu(q)/phi(q); vanishes unless q
    is square-free."""
    return ntheory.mu_of(q) / ntheory.phi_of(q)


@lru_cache(maxsize=512)
def _coprime_mask(q: int) -> np.ndarray:
    m = np.gcd(np.arange(q, dtype=np.int64), q) == 1
    m.setflags(write=False)
    return m


def _registry_gauss_table(registry: ExceptionalRegistry, q: int) -> np.ndarray | None:
    entry = registry.lookup(q)
    if entry is None:
        return None
    return ntheory.gauss_sum_table(entry.character)


# ---------------------------------------------------------------------------
# Atom evaluation
# ---------------------------------------------------------------------------

def _principal_term(xis: np.ndarray, q: int, s: int, N: int) -> np.ndarray:
    """Contribution of modulus q viewed at level s: coefficient times the
    flat-average transform times the level bump, at the nearest reduced
    fraction with denominator q (at most one can be in-window)."""
    coeff = principal_coeff(q)
    out = np.zeros(xis.shape, dtype=np.complex128)
    if coeff == 0.0:
        return out
    a = np.rint(xis * q)
    delta = xis - a / q
    radius = 0.5 * 0.25 ** s
    mask = np.abs(delta) < radius
    if q > 1:
        mask &= _coprime_mask(q)[(a.astype(np.int64)) % q]
    if not mask.any():
        return out
    d = delta[mask]
    out[mask] = coeff * m_hat(d, N) * bump((4.0 ** s) * d)
    return out


def _exceptional_term(xis: np.ndarray, q: int, s: int, N: int,
                      registry: ExceptionalRegistry) -> np.ndarray:
    out = np.zeros(xis.shape, dtype=np.complex128)
    entry = registry.lookup(q)
    if entry is None:
        return out
    gtab = ntheory.gauss_sum_table(entry.character)
    a = np.rint(xis * q)
    delta = xis - a / q
    radius = 0.5 * 0.25 ** s
    mask = np.abs(delta) < radius
    if q > 1:
        mask &= _coprime_mask(q)[(a.astype(np.int64)) % q]
    if not mask.any():
        return out
    d = delta[mask]
    coeffs = gtab[(a[mask].astype(np.int64)) % q]
    out[mask] = coeffs * m_beta_hat(d, N, entry.beta) * bump((4.0 ** s) * d)
    return out


def _level_moduli(s: int) -> range:
    return range(1, 2) if s == 0 else range(2 ** s, 2 ** (s + 1))


def atom_values(xis: np.ndarray, s: int, N: int, filt: str,
                params: CutoffParams, registry: ExceptionalRegistry) -> np.ndarray:
    """Level-s atom on an array of frequencies.

    filt: 'all' (every reduced denominator at the level), 'lo' (square-free
    Q-smooth only), 'hi' (the complement), 'exceptional' (registry moduli,
    tilted transform with the registered character weights).
    """
    xis = np.asarray(xis, dtype=np.float64) % 1.0
    out = np.zeros(xis.shape, dtype=np.complex128)
    if filt == "exceptional":
        for entry in registry.entries:
            q = entry.modulus
            if (2 ** s <= q < 2 ** (s + 1)) or (s == 0 and q == 1):
                out += _exceptional_term(xis, q, s, N, registry)
        return out
    for q in _level_moduli(s):
        smooth = ntheory.is_squarefree_smooth(q, params.Q)
        if filt == "lo" and not smooth:
            continue
        if filt == "hi" and smooth:
            continue
        out += _principal_term(xis, q, s, N)
    return out


def atom_hat(xi: float, s: int, N: int, filt: str, params: CutoffParams,
             registry: ExceptionalRegistry = EMPTY_REGISTRY) -> complex:
    """Scalar level-s atom, locating candidate fractions by the
    continued-fraction/Farey walk instead of looping over the level."""
    x = float(xi) % 1.0
    radius = 0.5 * 0.25 ** s
    total = 0.0 + 0.0j
    if filt == "exceptional":
        for entry in registry.entries:
            q = entry.modulus
            if not ((2 ** s <= q < 2 ** (s + 1)) or (s == 0 and q == 1)):
                continue
            a = round(x * q)
            delta = x - a / q
            if abs(delta) < radius and math.gcd(a % q, q) == 1:
                gtab = ntheory.gauss_sum_table(entry.character)
                total += (gtab[a % q] * m_beta_hat(delta, N, entry.beta)
                          * bump((4.0 ** s) * delta))
        return complex(total)
    for frac in ntheory.fractions_near(x, 2 ** (s + 1) - 1, radius):
        q = frac.q
        if not ((2 ** s <= q < 2 ** (s + 1)) or (s == 0 and q == 1)):
            continue
        smooth = ntheory.is_squarefree_smooth(q, params.Q)
        if filt == "lo" and not smooth:
            continue
        if filt == "hi" and smooth:
            continue
        # real-line offset to the nearest representative of the fraction
        delta = x - frac.value
        if delta > 0.5:
            delta -= 1.0
        elif delta < -0.5:
            delta += 1.0
        if abs(delta) >= radius:
            continue
        total += principal_coeff(q) * m_hat(delta, N) * bump((4.0 ** s) * delta)
    return complex(total)


# ---------------------------------------------------------------------------
# Assembled models
# ---------------------------------------------------------------------------

def l_aq_hat(xi, a_q: Rational, N: int,
             registry: ExceptionalRegistry = EMPTY_REGISTRY):
    """Major-arc approximant at offset xi from the rational a/q:
    principal coefficient times the flat transform, minus the registered
    character coefficient times the tilted transform."""
    out = principal_coeff(a_q.q) * np.asarray(m_hat(xi, N))
    entry = registry.lookup(a_q.q)
    if entry is not None:
        g = ntheory.gauss_sum_table(entry.character)[a_q.a % a_q.q]
        out = out - g * np.asarray(m_beta_hat(xi, N, entry.beta))
    return complex(out) if np.ndim(out) == 0 else out


def model_values(kind: str, xis, N: int, params: CutoffParams,
                 registry: ExceptionalRegistry = EMPTY_REGISTRY,
                 tables: ArithmeticTables | None = None,
                 level: int = 0, beta: float = 1.0,
                 a_q: Rational | None = None) -> np.ndarray:
    """Evaluate a named model on an array of frequencies."""
    if kind not in MODEL_KINDS:
        raise DomainError(f"unknown model kind {kind!r}")
    xis = np.atleast_1d(np.asarray(xis, dtype=np.float64))

    if kind == "A_hat":
        if tables is None:
            raise DomainError("A_hat requires tables")
        return a_hat(xis, N, tables)
    if kind == "M_hat":
        return np.asarray(m_hat(xis, N))
    if kind == "M_beta_hat":
        return np.asarray(m_beta_hat(xis, N, beta))
    if kind == "L_aq":
        if a_q is None:
            raise DomainError("L_aq requires a rational")
        return np.asarray(l_aq_hat(xis, a_q, N, registry))
    if kind in ("V", "V_lo", "V_hi", "W"):
        filt = {"V": "all", "V_lo": "lo", "V_hi": "hi", "W": "exceptional"}[kind]
        return atom_values(xis % 1.0, level, N, filt, params, registry)

    x = xis % 1.0
    if kind == "B":
        out = np.zeros(x.shape, dtype=np.complex128)
        for s in params.levels_main(N):
            out += atom_values(x, s, N, "all", params, registry)
            out -= atom_values(x, s, N, "exceptional", params, registry)
        return out
    if kind == "Err":
        return (model_values("A_hat", x, N, params, registry, tables)
                - model_values("B", x, N, params, registry, tables))

    params.validate_Q(N)
    if kind == "Lo":
        out = np.zeros(x.shape, dtype=np.complex128)
        for q in ntheory.smooth_squarefree(params.Q):
            out += _principal_term(x, q, max(q.bit_length() - 1, 0), N)
        return out
    if kind == "Hi":
        out = np.zeros(x.shape, dtype=np.complex128)
        for s in params.levels_rough(N):
            out += atom_values(x, s, N, "hi", params, registry)
            out -= atom_values(x, s, N, "exceptional", params, registry)
        return out
    if kind == "Ex":
        out = np.zeros(x.shape, dtype=np.complex128)
        for s in params.levels_exceptional():
            out += atom_values(x, s, N, "exceptional", params, registry)
        return out
    # ErrPrime: the remainder making A_hat = Lo + Hi - Ex + ErrPrime
    return (model_values("A_hat", x, N, params, registry, tables)
            - model_values("Lo", x, N, params, registry, tables)
            - model_values("Hi", x, N, params, registry, tables)
            + model_values("Ex", x, N, params, registry, tables))


@dataclass(frozen=True)
class MultiplierModel:
    """A named frequency-side function bound to its scale and parameters."""

    kind: str
    N: int
    params: CutoffParams = field(default_factory=CutoffParams)
    registry: ExceptionalRegistry = EMPTY_REGISTRY
    tables: ArithmeticTables | None = None
    level: int = 0
    beta: float = 1.0
    a_q: Rational | None = None

    def values(self, xis) -> np.ndarray:
        return model_values(self.kind, xis, self.N, self.params, self.registry,
                            self.tables, self.level, self.beta, self.a_q)

    def value(self, xi: float) -> complex:
        return complex(self.values([xi])[0])


class ConstantModel:
    """Constant multiplier; apply_multiplier(f, ConstantModel(1)) == f."""

    def __init__(self, value: complex = 1.0):
        self.kind = "const"
        self.const = complex(value)

    def values(self, xis) -> np.ndarray:
        xis = np.atleast_1d(np.asarray(xis, dtype=np.float64))
        return np.full(xis.shape, self.const, dtype=np.complex128)


# ---------------------------------------------------------------------------
# Sup scans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Scan grid: uniform base of >= 4N points plus x64-refined windows
    around every reduced fraction with denominator <= refine_cap."""

    base_size: int = 0            # 0 -> 4N
    refine_factor: int = 64
    refine_cap: int = 64
    refine_halfwidth_cells: int = 2
    fine_fft_max: int = 1 << 25   # beyond this, refined values use direct sums

    def resolve_base(self, N: int) -> int:
        base = self.base_size if self.base_size else 4 * N
        if base < 4 * N:
            raise DomainError("base grid must have at least 4N points")
        return base


@dataclass
class SupReport:
    kindA: str
    kindB: str
    N: int
    Q: int
    mode: str
    sup: float
    argmax_xi: float
    grid_points: int
    refined_points: int
    curve_reference: dict
    fitted_constant: float
    regime: str = "paper"
    regions: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kindA": self.kindA, "kindB": self.kindB, "N": self.N, "Q": self.Q,
            "mode": self.mode, "sup": self.sup, "argmax_xi": self.argmax_xi,
            "grid_points": self.grid_points, "refined_points": self.refined_points,
            "curve_reference": self.curve_reference,
            "fitted_constant": self.fitted_constant,
            "regime": self.regime, "regions": self.regions,
        }


def vinogradov_reference(q: int, N: int) -> float:
    """Classical minor-arc reference curve
    (q^(-1/2) + (q/N)^(1/2) + N^(-1/5)) * log(N)^3."""
    return (q ** -0.5 + (q / N) ** 0.5 + N ** -0.2) * math.log(N) ** 3


def _model_on_uniform_grid(kind: str, L: int, N: int, params, registry, tables,
                           **kw) -> np.ndarray:
    """Model values at j/L for j = 0..L//2 (conjugate symmetry covers the
    rest: every kernel here is real)."""
    if kind == "A_hat":
        return a_hat_rfft(N, L, tables)
    xis = np.arange(L // 2 + 1, dtype=np.float64) / L
    return model_values(kind, xis, N, params, registry, tables, **kw)


def _chunked_points(kind, xis, N, params, registry, tables, threads, **kw):
    if threads <= 1 or xis.size < 4096:
        return model_values(kind, xis, N, params, registry, tables, **kw)
    chunks = np.array_split(xis, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(
            lambda c: model_values(kind, c, N, params, registry, tables, **kw),
            chunks))
    return np.concatenate(parts)


def sup_scan(kindA: str, kindB: str, N: int, params: CutoffParams,
             registry: ExceptionalRegistry = EMPTY_REGISTRY,
             tables: ArithmeticTables | None = None,
             grid: GridSpec = GridSpec(), threads: int = 1) -> SupReport:
    """Max of |model_A - model_B| over a uniform base grid plus refined
    windows near rationals, where the extrema cluster."""
    L = grid.resolve_base(N)
    va = _model_on_uniform_grid(kindA, L, N, params, registry, tables)
    vb = _model_on_uniform_grid(kindB, L, N, params, registry, tables)
    diff = np.abs(va - vb)
    best = float(diff.max())
    arg = float(np.argmax(diff) / L)
    grid_points = L // 2 + 1

    # refined windows around a/q <= 1/2, q <= refine_cap
    fine_L = L * grid.refine_factor
    halfw = grid.refine_halfwidth_cells * grid.refine_factor
    idx = []
    owners = []
    for q in range(1, grid.refine_cap + 1):
        for a in range(q // 2 + 1):
            if math.gcd(a, q) != 1:
                continue
            center = round(a * fine_L / q)
            lo, hi = max(center - halfw, 0), min(center + halfw, fine_L // 2)
            idx.append(np.arange(lo, hi + 1, dtype=np.int64))
            owners.append((q, a, lo, hi))
    regions = []
    refined_points = 0
    if idx:
        take = np.unique(np.concatenate(idx))
        refined_points = int(take.size)
        xis = take.astype(np.float64) / fine_L
        if kindA == "A_hat" and fine_L <= grid.fine_fft_max:
            fa = a_hat_rfft(N, fine_L, tables)[take]
        else:
            fa = _chunked_points(kindA, xis, N, params, registry, tables, threads)
        fb = _chunked_points(kindB, xis, N, params, registry, tables, threads)
        fdiff = np.abs(fa - fb)
        fbest = float(fdiff.max())
        if fbest > best:
            best = fbest
            arg = float(take[int(np.argmax(fdiff))] / fine_L)
        pos = {int(t): i for i, t in enumerate(take)}
        qmax: dict[int, float] = {}
        for (q, a, lo, hi) in owners:
            m = max(fdiff[pos[j]] for j in range(lo, hi + 1))
            qmax[q] = max(qmax.get(q, 0.0), float(m))
        regions = [{"q": q, "max_near": v} for q, v in sorted(qmax.items())]

    curve = {"name": "vinogradov_minor_arc",
             "q": grid.refine_cap, "value": vinogradov_reference(grid.refine_cap, N)}
    fitted = best / curve["value"] if curve["value"] else float("nan")
    return SupReport(kindA, kindB, N, params.Q, params.mode, best, arg,
                     grid_points, refined_points, curve, fitted,
                     regime=params.regime, regions=regions)
