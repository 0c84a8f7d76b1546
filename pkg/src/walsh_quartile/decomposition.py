"""Tree selection, the iterated size decomposition and the exceptional-set machinery."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import exact
from .dyadic import ZERO, DyadicRational, dyadic_pow
from .forest import EnergyTable, Forest, Tree
from .stepfunction import DyadicSet, StepFunction
from .tiles import Bitile, NotConvexError, Tile, TileUniverse, bitile, is_convex, rect_le, tile
from .walsh import coefficient, projection


class SelectionError(RuntimeError):
    """A hard invariant of tree selection failed."""


class SizePreconditionError(ValueError):
    pass


class MajorityError(ValueError):
    pass


class SupportError(ValueError):
    pass


# ---- tree selection ------------------------------------------------------------------

@dataclass
class Selection:
    forest: Forest
    remainder: set
    remainder_size_sq: DyadicRational

    def to_json(self) -> dict:
        return {"forest": self.forest.to_json(),
                "remainder": sorted(P.to_json() for P in self.remainder),
                "remainder_size_sq": self.remainder_size_sq.to_json()}


def _exceeds(E: np.ndarray, unit_exp: int, t: int) -> np.ndarray:
    """Elementwise ``E * 2^unit_exp > 2^t`` for an array of non-negative ints."""
    s = t - unit_exp
    if s >= 0:
        return E > (1 << s)
    return E * (1 << -s) > 1


def _violators(values: dict[int, np.ndarray], masks: dict[int, np.ndarray], unit_exp: int,
               bound_exp: int) -> list[Bitile]:
    """Masked bitiles ``P`` with ``values[P] > 2^bound_exp |I_P|``."""
    out = []
    for j, V in values.items():
        m = masks[j]
        if not m.any():
            continue
        hit = _exceeds(V, unit_exp, bound_exp + j) & m
        for n, l in np.argwhere(hit):
            out.append(bitile(j, int(n), int(l)))
    return out


def _downset(top: Bitile, pool: set) -> frozenset:
    return frozenset(P for P in pool if rect_le(P, top))


def _left_end(P: Bitile) -> Fraction:
    return Fraction(P.l) * Fraction(2) ** P.kf


def _right_end(P: Bitile) -> Fraction:
    return Fraction(P.l + 1) * Fraction(2) ** P.kf


_KEYS = {
    "default": {
        1: lambda P: (-P.k, P.n, P.l),
        2: lambda P: (_left_end(P), -P.k, P.n),
        3: lambda P: (-_right_end(P), -P.k, P.n),
    },
    # reversed secondary orders, used to check that the conclusions do not depend on them
    "alternate": {
        1: lambda P: (-P.k, -P.n, -P.l),
        2: lambda P: (_left_end(P), P.k, -P.n),
        3: lambda P: (-_right_end(P), P.k, -P.n),
    },
}


def select_trees(bitiles: Iterable[Bitile], f: StepFunction, k: int, L: int,
                 universe: TileUniverse | None = None, table: EnergyTable | None = None,
                 tie_break: str = "default", check_precondition: bool = True,
                 thresholds: tuple[int, int] = (-8, -4)) -> Selection:
    """Split a convex collection into a forest and a remainder of half the size.

    Thresholds are those of the selection lemma at level ``k``: single
    bitiles with ``size^2 > 2^(-8-2k)`` are peeled first (largest interval
    first), then trees whose ``T_u`` energy exceeds ``2^(-4-2k) |I_T|``
    (smallest left frequency endpoint first), then the mirror condition on
    ``T_d`` (largest right frequency endpoint first).

    ``thresholds`` overrides the exponents ``(-8, -4)``; any pair with
    ``2^a + 2^(b+1) < 1/4`` keeps the halving guarantee.
    """
    single_exp, tree_exp = thresholds
    if Fraction(2) ** single_exp + Fraction(2) ** (tree_exp + 1) >= Fraction(1, 4):
        raise ValueError("thresholds too large to halve the size")
    pool = set(bitiles)
    if not is_convex(pool):
        raise NotConvexError("tree selection needs a convex collection")
    if table is None:
        table = _table_for(pool, f, L, universe)
    keys = _KEYS[tie_break]
    if check_precondition and pool:
        s = _size_sq(table, pool)
        if s > DyadicRational.pow2(-2 * k):
            raise SizePreconditionError(f"size^2 = {s} exceeds 2^{-2 * k}")
    trees, phases = [], []
    scales = list(table.universe.bitile_scales())
    single = {j: table.bitile_energy(j) for j in scales}
    for phase, bound in ((1, single_exp - 2 * k), (2, tree_exp - 2 * k), (3, tree_exp - 2 * k)):
        while pool:
            masks = table.masks(pool)
            if phase == 1:
                values = single
            else:
                values = table.downset_sums(masks, parity=1 if phase == 2 else 0, include_top=False)
            cands = _violators(values, masks, table.unit_exp, bound)
            if not cands:
                break
            top = min(cands, key=keys[phase])
            members = _downset(top, pool)
            trees.append(Tree(top, members))
            phases.append(phase)
            pool -= members
    rem = _size_sq(table, pool)
    if rem > DyadicRational.pow2(-2 * k - 2):
        raise SelectionError(f"remainder size^2 {rem} above 2^{-2 * k - 2}")
    return Selection(Forest(trees, k, phases), pool, rem)


def _table_for(pool, f, L, universe) -> EnergyTable:
    if universe is None:
        from .forest import _universe_for
        universe = _universe_for(pool, f, L) if pool else TileUniverse(1, f.support, 2)
    return EnergyTable(f, L, universe)


def _size_sq(table: EnergyTable, pool) -> DyadicRational:
    from .forest import _max_over
    if not pool:
        return ZERO
    masks = table.masks(pool)
    return _max_over(table.downset_sums(masks), masks, table.unit_exp)[0]


def start_level(size_sq: DyadicRational) -> int:
    """Largest ``k`` with ``size_sq <= 2^(-2k)`` (``size_sq > 0``)."""
    m, e = size_sq.mantissa, size_sq.exponent
    c = e + m.bit_length() - (1 if m == 1 else 0)  # ceil(log2 size_sq)
    return (-c) // 2


@dataclass
class DecompositionTrace:
    initial: set
    levels: list = field(default_factory=list)  # (k, Forest, remainder)

    @property
    def remainder(self) -> set:
        return self.levels[-1][2] if self.levels else set(self.initial)

    def trees(self) -> list[Tree]:
        return [T for _, F, _ in self.levels for T in F.trees]

    def check_partition(self) -> bool:
        seen: set = set()
        for T in self.trees():
            if seen & T.members:
                return False
            seen |= T.members
        if seen & self.remainder:
            return False
        return seen | self.remainder == set(self.initial)

    def to_json(self) -> dict:
        return {"initial": sorted(P.to_json() for P in self.initial),
                "levels": [{"k": k, "forest": F.to_json(),
                            "remainder": sorted(P.to_json() for P in R)}
                           for k, F, R in self.levels]}


def full_decomposition(bitiles: Iterable[Bitile], f: StepFunction, L: int, k_max: int,
                       universe: TileUniverse | None = None,
                       tie_break: str = "default",
                       thresholds: tuple[int, int] = (-8, -4)) -> DecompositionTrace:
    """Iterate tree selection from the tightest admissible level up to ``k_max``.

    At least one level is always produced; iteration stops early once the
    remainder is empty.
    """
    pool = set(bitiles)
    trace = DecompositionTrace(set(pool))
    if not is_convex(pool):
        raise NotConvexError("decomposition needs a convex collection")
    table = _table_for(pool, f, L, universe)
    s = _size_sq(table, pool)
    k = start_level(s) if s else k_max
    while True:
        sel = select_trees(pool, f, k, L, table=table, tie_break=tie_break,
                           check_precondition=False, thresholds=thresholds)
        trace.levels.append((k, sel.forest, sel.remainder))
        pool = sel.remainder
        k += 1
        if not pool or k > k_max:
            return trace


def counting_bounds(forest: Forest, f: StepFunction, k: int, support: int,
                    constant_exp: int = 9) -> dict:
    """Check ``sum |I_T| <= 2^c 2^(2k) ||f||^2`` and its localized form on every dyadic ``J``."""
    bound = DyadicRational.pow2(constant_exp + 2 * k)
    total = sum((DyadicRational.pow2(T.top.k) for T in forest), ZERO)
    global_ok = total <= bound * f.norm_sq()
    g = f if f.support == support else f.extend(support)
    worst = None
    local_ok = True
    # localized form: intervals J at every scale that can hold a tree top
    for s in sorted({T.top.k for T in forest}):
        for s_J in range(s, support + 1):
            for q in range(1 << (support - s_J)):
                inside = [T for T in forest
                          if T.top.k <= s_J and (T.top.n >> (s_J - T.top.k)) == q]
                if not inside:
                    continue
                lhs = sum((DyadicRational.pow2(T.top.k) for T in inside), ZERO)
                energy = _local_energy(g, s_J, q)
                if lhs > bound * energy:
                    local_ok = False
                    worst = (s_J, q)
    return {"sum_IT": total, "bound": bound * f.norm_sq(), "global_ok": global_ok,
            "local_ok": local_ok, "witness": worst}


def _local_energy(f: StepFunction, s: int, q: int) -> DyadicRational:
    if s + f.resolution < 0:
        raise ValueError("interval finer than the function resolution")
    w = 1 << (s + f.resolution)
    seg = f.num[q * w:(q + 1) * w]
    return DyadicRational(exact.total(exact.mul(seg, seg)), 2 * f.exp - f.resolution)


# ---- maximal functions and exceptional sets -------------------------------------------

def _cell_powers(f: StepFunction, q: Fraction) -> tuple[np.ndarray, int]:
    """``|f|^q`` on cells as integers over a common exponent."""
    vals = {}
    for v in set(int(x) for x in np.abs(f.num).flat):
        vals[v] = dyadic_pow(DyadicRational(v, f.exp), q.numerator, q.denominator)
    nonzero = [d for d in vals.values() if d]
    e = min((d.exponent for d in nonzero), default=0)
    lookup = {v: (d.mantissa << (d.exponent - e)) if d else 0 for v, d in vals.items()}
    out = np.array([lookup[int(x)] for x in np.abs(f.num).flat], dtype=object)
    return exact.shrink(out), e


def dyadic_maximal_pow(f: StepFunction, q_num: int = 1, q_den: int = 1) -> StepFunction:
    """``x -> sup_{J dyadic, x in J} avg_J |f|^q`` with ``J`` inside ``[0, 2^support)``."""
    q = Fraction(q_num, q_den)
    if q <= 0:
        raise ValueError("exponent must be positive")
    vals, e = _cell_powers(f, q)
    n = vals.size
    S = n.bit_length() - 1
    best = exact.lshift(vals, S)
    s = 1
    while (1 << s) <= n:
        blocks = exact.total(vals.reshape(-1, 1 << s), axis=1)
        # average over 2^s cells, expressed over the common denominator 2^S
        cand = np.repeat(exact.lshift(blocks, S - s), 1 << s)
        best = np.maximum(best, cand) if best.dtype != object else \
            np.array([max(a, b) for a, b in zip(best, cand)], dtype=object)
        s += 1
    return StepFunction(exact.shrink(best), e - S, f.resolution, f.support).canonical()


def _gt_scaled(x: DyadicRational, c: Fraction, y: DyadicRational, p: Fraction) -> bool:
    """``x > 2^c * y^p`` exactly, for rational ``c`` and ``p`` and positive ``y``."""
    D = math.lcm(Fraction(c).denominator, Fraction(p).denominator)
    lhs = x ** D if x.sign() > 0 else None
    if lhs is None:
        return False
    pD = int(p * D)
    cD = int(c * D)
    if pD >= 0:
        return lhs > (y ** pD).shift(cD)
    return lhs * y ** (-pD) > DyadicRational.pow2(cD)


@dataclass
class ExceptionalSet:
    F: DyadicSet
    intervals: list  # maximal dyadic intervals (scale, position)

    def measure(self) -> DyadicRational:
        return self.F.measure()

    def multiplicities(self, forest: Iterable[Tree]) -> dict:
        """``N_I``: the counting function of the forest on each interval of the set."""
        trees = list(forest)
        out = {}
        for s, q in self.intervals:
            out[(s, q)] = sum(1 for T in trees
                              if T.top.k >= s and (q >> (T.top.k - s)) == T.top.n)
        return out

    def contains_interval(self, k: int, n: int) -> bool:
        return self.F.contains_interval(k, n)

    def to_json(self) -> dict:
        return {"F": self.F.to_json(), "intervals": [list(I) for I in self.intervals]}


def exceptional_set(entries: Sequence, threshold_exp: Fraction | int = 10) -> ExceptionalSet:
    """Union over ``(E, q, beta)`` of ``{M_q(1_E / |E|^beta) > 2^threshold_exp}``.

    ``M_q g = (M |g|^q)^(1/q)``, so each level set is ``{M 1_E > 2^(q t) |E|^(q beta)}``
    and is decided exactly.
    """
    if not entries:
        raise ValueError("need at least one set")
    res = max(E.resolution for E, _, _ in entries)
    sup = max(E.support for E, _, _ in entries)
    t = Fraction(threshold_exp)
    F = DyadicSet.empty(sup, res)
    for E, q, beta in entries:
        E = E.at_resolution(res, sup)
        q, beta = Fraction(q), Fraction(beta)
        if E.is_empty():
            continue
        Mf = dyadic_maximal_pow(E.indicator(), 1, 1)
        size = E.measure()
        hits = {}
        mask = np.zeros(Mf.n_cells, dtype=bool)
        for j, v in enumerate(Mf.num.flat):
            v = int(v)
            if v not in hits:
                hits[v] = _gt_scaled(DyadicRational(v, Mf.exp), q * t, size, q * beta)
            mask[j] = hits[v]
        F = F | DyadicSet(mask, Mf.resolution, sup).at_resolution(res, sup)
    return ExceptionalSet(F, F.maximal_intervals())


def major_subset(E: DyadicSet, F: ExceptionalSet) -> DyadicSet:
    """``E \\ F``, checked to keep at least half of ``E``."""
    Fs = F.F
    res = max(E.resolution, Fs.resolution)
    sup = max(E.support, Fs.support)
    E2, F2 = E.at_resolution(res, sup), Fs.at_resolution(res, sup)
    lost = (E2 & F2).measure()
    if lost.shift(1) > E2.measure():
        raise MajorityError(f"exceptional set removes {lost} of {E2.measure()}")
    return E2 - F2


def bitiles_outside(universe: TileUniverse, F: ExceptionalSet) -> set:
    """Bitiles of the universe whose interval is not contained in ``F``."""
    return {P for P in universe.bitiles() if not F.contains_interval(P.k, P.n)}


# ---- multi-frequency decomposition --------------------------------------------------

@dataclass
class MultiFrequency:
    a: StepFunction
    pieces: dict      # interval -> a_I
    packets: dict     # interval -> sorted list of tiles
    counts: dict      # interval -> N_I
    levels: dict      # m -> a_m

    def level_of(self, I) -> int:
        for m, (_, members) in self.levels.items():
            if I in members:
                return m
        raise KeyError(I)


def _split_level(N: int, k: int) -> int:
    if N <= 0 or Fraction(N) <= Fraction(4) ** k:
        return 0
    m = 1
    while Fraction(N) > Fraction(4) ** (k + m):
        m += 1
    return m


def multi_frequency_decomposition(forest: Forest, g3: StepFunction, F: ExceptionalSet,
                                  k: int, L: int) -> MultiFrequency:
    """Projection of ``g3`` onto the few packets per bad interval that a forest can see."""
    outside = ~F.F.at_resolution(max(F.F.resolution, g3.resolution), g3.support).mask
    res = max(F.F.resolution, g3.resolution)
    if np.any(g3.refine(res).num[outside] != 0):
        raise SupportError("g3 must vanish off the exceptional set")
    packets: dict = {I: set() for I in F.intervals}
    for T in forest:
        for P in T.members:
            ks = P.k - L
            for i in range(1 << L):
                n = (P.n << L) + i
                if F.contains_interval(ks, n):
                    continue
                # the minimal tile p' = (ks, n, 2l) of 2^L P_d; its ancestors over bad intervals
                for s, q in F.intervals:
                    if s < ks and (q >> (ks - s)) == n:
                        packets[(s, q)].add(tile(s, q, (2 * P.l) >> (ks - s)))
    counts = F.multiplicities(forest)
    pieces = {}
    total = StepFunction.zeros(g3.support, g3.resolution)
    levels: dict = {}
    for I in F.intervals:
        tiles = sorted(packets[I])
        packets[I] = tiles
        aI = projection(g3, tiles) if tiles else StepFunction.zeros(g3.support, g3.resolution)
        pieces[I] = aI
        total = total + aI
        m = _split_level(counts[I], k)
        acc, members = levels.get(m, (StepFunction.zeros(g3.support, g3.resolution), []))
        levels[m] = (acc + aI, members + [I])
    return MultiFrequency(total, pieces, packets, counts, levels)


def parseval_piece(g3: StepFunction, tiles: Iterable[Tile]) -> DyadicRational:
    """``sum_p |I_p|^-1 <g3, w_p>^2``."""
    total = ZERO
    for p in tiles:
        c = coefficient(g3, p)
        total = total + (c * c).shift(-p.k)
    return total
