"""Trees, forests, enlarged trees, size and counting functions."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .dyadic import ZERO, DyadicRational
from .stepfunction import StepFunction
from .tiles import (Bitile, InvalidTreeError, NotConvexError, Rect, Tile, TileUniverse,
                    bitile, dilate_rect, is_convex, minimal_tiles, rect_le, tree_parts,
                    tree_tiling)
from .walsh import PacketTable, projection


@dataclass(frozen=True)
class Tree:
    top: Bitile
    members: frozenset

    def __post_init__(self):
        members = frozenset(self.members)
        object.__setattr__(self, "members", members)
        if self.top not in members:
            raise InvalidTreeError("the top must belong to the tree")
        for P in members:
            if not rect_le(P, self.top):
                raise InvalidTreeError(f"{P} is not below the top {self.top}")

    @classmethod
    def downset(cls, top: Bitile, pool: Iterable[Bitile]) -> "Tree":
        return cls(top, frozenset(P for P in pool if rect_le(P, top)))

    @property
    def interval(self):
        return self.top.time

    @property
    def scale(self) -> int:
        return self.top.k

    def is_convex(self) -> bool:
        return is_convex(self.members)

    def tiling(self) -> list[Tile]:
        return tree_tiling(self.top, self.members)

    def __len__(self):
        return len(self.members)

    def to_json(self) -> dict:
        return {"top": self.top.to_json(),
                "members": sorted(P.to_json() for P in self.members)}

    @classmethod
    def from_json(cls, obj) -> "Tree":
        from .tiles import rect_from_json
        return cls(rect_from_json(obj["top"]),
                   frozenset(rect_from_json(q) for q in obj["members"]))


@dataclass
class Forest:
    trees: list[Tree]
    level: int = 0
    # selection phase (1, 2 or 3) of each tree; empty when unknown
    phases: list[int] = field(default_factory=list)

    def __post_init__(self):
        seen: set = set()
        for T in self.trees:
            if seen & T.members:
                raise InvalidTreeError("trees of a forest must be disjoint")
            seen |= T.members

    def bitiles(self) -> set[Bitile]:
        out: set = set()
        for T in self.trees:
            out |= T.members
        return out

    def __len__(self):
        return len(self.trees)

    def __iter__(self):
        return iter(self.trees)

    def to_json(self) -> dict:
        return {"level": self.level, "phases": list(self.phases),
                "trees": [T.to_json() for T in self.trees]}

    @classmethod
    def from_json(cls, obj) -> "Forest":
        return cls([Tree.from_json(t) for t in obj["trees"]], obj.get("level", 0),
                   list(obj.get("phases", [])))


def tree_split(T: Tree) -> tuple[Bitile, set[Bitile], set[Bitile]]:
    """``(P_T, T_u, T_d)``."""
    up, down = tree_parts(T.top, T.members)
    return T.top, set(up), set(down)


def enlarged_tree(T: Tree, L: int, xi=None) -> Tree:
    """The tree ``T^(L)`` of bitiles at frequency ``2^L xi`` inside some ``2^L P'``.

    ``xi`` defaults to the left endpoint of ``omega_T``; any point of
    ``omega_T`` gives the same union of bitiles.
    """
    if L < 0:
        raise ValueError("L must be non-negative")
    top = T.top
    if xi is None:
        target = Fraction(top.l * 2 ** L) * Fraction(2) ** top.kf
    else:
        xi = DyadicRational.coerce(xi).to_fraction()
        lo = Fraction(top.l) * Fraction(2) ** top.kf
        if not lo <= xi < lo + Fraction(2) ** top.kf:
            raise ValueError("xi must lie in the frequency interval of the top")
        target = xi * 2 ** L
    members = set()
    for Pp in T.members:
        for k in range(Pp.k - L, Pp.k + 1):
            # bitile frequency intervals at scale k have length 2^(1-k)
            l = int(target / Fraction(2) ** (1 - k))
            shift = Pp.k - k
            for n in range(Pp.n << shift, (Pp.n + 1) << shift):
                members.add(bitile(k, n, l))
    new_top = bitile(top.k, top.n, int(target / Fraction(2) ** (1 - top.k)))
    return Tree(new_top, frozenset(members))


def enlarged_region(T: Tree, L: int) -> list[Rect]:
    """Disjoint rectangles ``2^L p`` over the tree tiling; their union is ``T^(L)``'s."""
    return [dilate_rect(p, L) for p in tree_tiling(T.top, T.members, check_convex=False)]


def enlarged_projection(f: StepFunction, T: Tree, L: int) -> StepFunction:
    tiles = [q for R in enlarged_region(T, L) for q in minimal_tiles(R)]
    return projection(f, tiles, check_disjoint=False)


class EnergyTable:
    """Dilated tile energies ``D_L(p) = ||Pi_{2^L p} f||^2`` over a universe.

    ``energy[j]`` is an object array ``[position, frequency]`` over the tiles of
    time scale ``j`` of the bitile halves, in units of ``2**unit_exp``.
    """

    def __init__(self, f: StepFunction, L: int, universe: TileUniverse):
        if f.support < universe.M:
            f = f.extend(universe.M)
        if f.support != universe.M:
            raise ValueError("function support exceeds the universe")
        self.universe = universe
        self.L = L
        self.f = f
        table = PacketTable(f)
        raw = {}
        for j in universe.bitile_scales():
            ncols = 1 << (universe.N + j)
            arr, e = table.level(j - L, ncols)
            arr = arr.astype(object).reshape(1 << (universe.M - j), 1 << L, ncols)
            # sum over the 2^L minimal tiles, each weighted by |I|^-1 = 2^(L-j)
            raw[j] = ((arr * arr).sum(axis=1), 2 * e + L - j)
        self.unit_exp = min(e for _, e in raw.values())
        self.energy = {j: _lshift_obj(a, e - self.unit_exp) for j, (a, e) in raw.items()}

    def value(self, p: Rect) -> DyadicRational:
        return DyadicRational(int(self.energy[p.k][p.n, p.l]), self.unit_exp)

    def bitile_energy(self, j: int) -> np.ndarray:
        """``D_L(P_u) + D_L(P_d)`` for every bitile of scale ``j``."""
        E = self.energy[j]
        return E[:, 0::2] + E[:, 1::2]

    def masks(self, bitiles: Iterable[Bitile]) -> dict[int, np.ndarray]:
        U = self.universe
        out = {j: np.zeros((1 << (U.M - j), 1 << (U.N - 1 + j)), dtype=bool)
               for j in U.bitile_scales()}
        for P in bitiles:
            out[P.k][P.n, P.l] = True
        return out

    def downset_sums(self, masks: dict[int, np.ndarray], parity: int | None = None,
                     include_top: bool = True) -> dict[int, np.ndarray]:
        """Per bitile ``P``, energies of the tree tiling of ``{Q in set: Q <= P}``.

        The members strictly below ``P`` contribute ``D_L(Q_d)`` when in
        ``T_u`` and ``D_L(Q_u)`` when in ``T_d``.  ``parity=1`` keeps only the
        ``T_u`` part, ``parity=0`` only the ``T_d`` part.
        """
        scales = list(self.universe.bitile_scales())
        G = {}
        for j in scales:
            E = self.energy[j]
            # tile t at scale j holds omega_P; the opposite half t^1 is the one counted
            opp = np.empty_like(E)
            opp[:, 0::2] = E[:, 1::2]
            opp[:, 1::2] = E[:, 0::2]
            g = opp * np.repeat(masks[j], 2, axis=1)
            if parity is not None:
                g[:, 1 - parity::2] = 0
            G[j] = g
        out = {}
        for k in scales:
            nrows, ncols = masks[k].shape
            acc = np.zeros((nrows, ncols), dtype=object)
            if include_top:
                acc = acc + self.bitile_energy(k)
            cols = np.arange(ncols)
            for j in scales:
                if j >= k:
                    break
                g = G[j]
                blocks = g.reshape(nrows, 1 << (k - j), g.shape[1]).sum(axis=1)
                acc = acc + blocks[:, cols >> (k - j - 1)]
            out[k] = acc
        return out


def _lshift_obj(a: np.ndarray, s: int) -> np.ndarray:
    return a * (1 << s) if s else a


def _max_over(sums: dict[int, np.ndarray], masks: dict[int, np.ndarray], unit_exp: int,
              ) -> tuple[DyadicRational, Bitile | None]:
    """Largest ``|I_P|^-1 * sums[P]`` over the masked bitiles."""
    best, arg = ZERO, None
    for k, S in sums.items():
        m = masks[k]
        if not m.any():
            continue
        vals = np.where(m, S, 0)
        idx = np.unravel_index(int(np.argmax(vals)), vals.shape)
        v = DyadicRational(int(vals[idx]), unit_exp - k)
        if v > best:
            best, arg = v, bitile(k, int(idx[0]), int(idx[1]))
    return best, arg


def size_sq(bitiles: Iterable[Bitile], f: StepFunction, L: int,
            universe: TileUniverse | None = None, table: EnergyTable | None = None,
            check_convex: bool = True) -> DyadicRational:
    """Square of ``size^(L)``: max over members ``P`` of ``|I_P|^-1 ||Pi_{(T_P)^(L)} f||^2``."""
    bitiles = set(bitiles)
    if not bitiles:
        return ZERO
    if check_convex and not is_convex(bitiles):
        raise NotConvexError("size is defined on convex collections")
    if table is None:
        if universe is None:
            universe = _universe_for(bitiles, f, L)
        table = EnergyTable(f, L, universe)
    masks = table.masks(bitiles)
    return _max_over(table.downset_sums(masks), masks, table.unit_exp)[0]


def _universe_for(bitiles, f: StepFunction, L: int) -> TileUniverse:
    N = max(max(1 - P.k for P in bitiles), max(P.kf + P.l.bit_length() for P in bitiles), 1)
    M = max(f.support, max(P.k for P in bitiles))
    return TileUniverse(N, M, max(L, 2), max(f.resolution, N + L))


def tree_size_sq(T: Tree, f: StepFunction, L: int) -> DyadicRational:
    """``|I_T|^-1 ||Pi_{T^(L)} f||^2`` by explicit projection."""
    return enlarged_projection(f, T, L).norm_sq().shift(-T.top.k)


def counting_function(forest: Forest | Iterable[Tree], support: int) -> StepFunction:
    """``sum_T 1_{I_T}`` with integer values."""
    trees = list(forest)
    res = max([0] + [-T.top.k for T in trees])
    num = np.zeros(1 << (support + res), dtype=np.int64)
    for T in trees:
        w = 1 << (T.top.k + res)
        num[T.top.n * w:(T.top.n + 1) * w] += 1
    return StepFunction(num, 0, res, support)


def dyadic_bmo_norm(g: StepFunction) -> DyadicRational:
    """``sup_J |J|^-1 int_J |g - avg_J g|`` over dyadic ``J`` inside the support window."""
    num = g.num.astype(object)
    best = ZERO
    s = 0
    while (1 << s) <= num.size:
        B = 1 << s
        blocks = num.reshape(-1, B)
        S = blocks.sum(axis=1)
        dev = np.abs(blocks * B - S[:, None]).sum(axis=1)
        v = DyadicRational(int(dev.max()), g.exp - 2 * s)
        if v > best:
            best = v
        s += 1
    return best
