"""Dyadic intervals, tiles, bitiles and their combinatorics.

A dyadic rectangle is stored as four integers ``(k, n, kf, l)``: time
interval ``[2**k n, 2**k (n+1))`` and frequency interval
``[2**kf l, 2**kf (l+1))``.  Its area is ``2**(k + kf)``; tiles have
``k + kf == 0`` and bitiles ``k + kf == 1``.  The JSON form is the
quadruple ``[k, n, k', l]`` with ``k' = -kf``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator

from .dyadic import DyadicRational


class GeometryError(ValueError):
    pass


class UniverseOverflowError(GeometryError):
    pass


class NotConvexError(GeometryError):
    pass


class UntileableRegionError(GeometryError):
    pass


class InvalidTreeError(GeometryError):
    pass


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """``[2**scale * position, 2**scale * (position + 1))``."""

    scale: int
    position: int

    def __post_init__(self):
        if self.position < 0:
            raise GeometryError("dyadic intervals live in [0, inf)")

    @property
    def length(self) -> DyadicRational:
        return DyadicRational.pow2(self.scale)

    @property
    def left(self) -> DyadicRational:
        return DyadicRational(self.position, self.scale)

    @property
    def right(self) -> DyadicRational:
        return DyadicRational(self.position + 1, self.scale)

    def contains(self, other: "DyadicInterval") -> bool:
        return interval_contains(self.scale, self.position, other.scale, other.position)

    def intersects(self, other: "DyadicInterval") -> bool:
        return self.contains(other) or other.contains(self)

    def parent(self) -> "DyadicInterval":
        return DyadicInterval(self.scale + 1, self.position >> 1)

    def ancestor(self, scale: int) -> "DyadicInterval":
        if scale < self.scale:
            raise GeometryError("ancestor must be at a coarser scale")
        return DyadicInterval(scale, self.position >> (scale - self.scale))

    def children(self) -> tuple["DyadicInterval", "DyadicInterval"]:
        return (DyadicInterval(self.scale - 1, 2 * self.position),
                DyadicInterval(self.scale - 1, 2 * self.position + 1))

    def descendants(self, scale: int) -> Iterator["DyadicInterval"]:
        d = self.scale - scale
        if d < 0:
            raise GeometryError("descendant scale must be finer")
        base = self.position << d
        for i in range(1 << d):
            yield DyadicInterval(scale, base + i)

    def contains_point(self, x: DyadicRational) -> bool:
        return self.left <= x < self.right

    def __str__(self):
        return f"[{self.left},{self.right})"


def interval_contains(k1: int, n1: int, k2: int, n2: int) -> bool:
    """Is ``[2^k2 n2, ...)`` inside ``[2^k1 n1, ...)``."""
    return k2 <= k1 and (n2 >> (k1 - k2)) == n1


def _inside(k: int, n: int, top: int) -> bool:
    # [2^k n, 2^k (n+1)) inside [0, 2^top)
    return k <= top and n + 1 <= 1 << (top - k)


def interval_at(x: DyadicRational, scale: int) -> DyadicInterval:
    """The dyadic interval of length ``2**scale`` containing the point ``x >= 0``."""
    x = DyadicRational.coerce(x)
    if x < 0:
        raise GeometryError("points of the phase plane are non-negative")
    # floor(x / 2^scale)
    shift = x.exponent - scale
    pos = x.mantissa << shift if shift >= 0 else x.mantissa >> -shift
    return DyadicInterval(scale, pos)


@dataclass(frozen=True, order=True)
class Rect:
    """Dyadic rectangle ``I x omega`` with integer keys."""

    k: int
    n: int
    kf: int
    l: int

    def __post_init__(self):
        if self.n < 0 or self.l < 0:
            raise GeometryError("rectangles live in the closed first quadrant")

    @property
    def area_exp(self) -> int:
        return self.k + self.kf

    @property
    def area(self) -> DyadicRational:
        return DyadicRational.pow2(self.area_exp)

    @cached_property
    def time(self) -> DyadicInterval:
        return DyadicInterval(self.k, self.n)

    @cached_property
    def freq(self) -> DyadicInterval:
        return DyadicInterval(self.kf, self.l)

    def contains(self, other: "Rect") -> bool:
        """Set containment of rectangles."""
        return (interval_contains(self.k, self.n, other.k, other.n)
                and interval_contains(self.kf, self.l, other.kf, other.l))

    def intersects(self, other: "Rect") -> bool:
        return ((interval_contains(self.k, self.n, other.k, other.n)
                 or interval_contains(other.k, other.n, self.k, self.n))
                and (interval_contains(self.kf, self.l, other.kf, other.l)
                     or interval_contains(other.kf, other.l, self.kf, self.l)))

    def intersection(self, other: "Rect") -> "Rect | None":
        if not self.intersects(other):
            return None
        tk, tn = (self.k, self.n) if self.k <= other.k else (other.k, other.n)
        fk, fl = (self.kf, self.l) if self.kf <= other.kf else (other.kf, other.l)
        return make_rect(tk, tn, fk, fl)

    def to_json(self) -> list[int]:
        return [self.k, self.n, -self.kf, self.l]

    def __str__(self):
        return f"{self.time}x{self.freq}"


class Tile(Rect):
    """Dyadic rectangle of area one."""

    def __post_init__(self):
        super().__post_init__()
        if self.k + self.kf != 0:
            raise GeometryError(f"{self!r} does not have area one")


class Bitile(Rect):
    """Dyadic rectangle of area two."""

    def __post_init__(self):
        super().__post_init__()
        if self.k + self.kf != 1:
            raise GeometryError(f"{self!r} does not have area two")

    @property
    def upper(self) -> Tile:
        return Tile(self.k, self.n, self.kf - 1, 2 * self.l + 1)

    @property
    def lower(self) -> Tile:
        return Tile(self.k, self.n, self.kf - 1, 2 * self.l)

    @property
    def left(self) -> Tile:
        return Tile(self.k - 1, 2 * self.n, self.kf, self.l)

    @property
    def right(self) -> Tile:
        return Tile(self.k - 1, 2 * self.n + 1, self.kf, self.l)


def make_rect(k: int, n: int, kf: int, l: int) -> Rect:
    """Build the most specific rectangle class for these keys."""
    a = k + kf
    if a == 0:
        return Tile(k, n, kf, l)
    if a == 1:
        return Bitile(k, n, kf, l)
    return Rect(k, n, kf, l)


def tile(k: int, n: int, l: int) -> Tile:
    """Tile with time interval ``[2^k n, 2^k (n+1))`` and frequency index ``l``."""
    return Tile(k, n, -k, l)


def bitile(k: int, n: int, l: int) -> Bitile:
    """Bitile with time interval ``[2^k n, 2^k (n+1))`` and frequency index ``l``."""
    return Bitile(k, n, 1 - k, l)


def rect_from_json(q) -> Rect:
    k, n, kp, l = (int(v) for v in q)
    return make_rect(k, n, -kp, l)


def rect_from_bounds(t0, t1, w0, w1) -> Rect:
    """Rectangle ``[t0, t1) x [w0, w1)`` from dyadic endpoints; checks it is dyadic."""
    def interval(a, b):
        a, b = DyadicRational.coerce(a), DyadicRational.coerce(b)
        length = b - a
        if length.mantissa != 1:
            raise GeometryError(f"[{a},{b}) is not dyadic")
        iv = interval_at(a, length.exponent)
        if iv.left != a:
            raise GeometryError(f"[{a},{b}) is not dyadic")
        return iv
    ti, fi = interval(t0, t1), interval(w0, w1)
    return make_rect(ti.scale, ti.position, fi.scale, fi.position)


@dataclass(frozen=True)
class TileUniverse:
    """Finite window of the phase plane.

    Bitiles have frequency inside ``[0, 2**N)`` and time inside
    ``[0, 2**M)``; ``L`` is the dilation parameter and ``r`` the cell
    resolution exponent (cells have width ``2**-r``).
    """

    N: int
    M: int
    L: int = 2
    r: int | None = None

    def __post_init__(self):
        if self.r is None:
            object.__setattr__(self, "r", self.N + self.L)
        if self.N < 0 or self.M < 0:
            raise GeometryError("N and M must be non-negative")
        if self.L < 2:
            raise GeometryError("the dilation parameter L must be at least 2")
        if self.r < self.N + self.L:
            raise GeometryError(f"resolution r={self.r} must be at least N+L={self.N + self.L}")

    @property
    def n_cells(self) -> int:
        return 1 << (self.M + self.r)

    def with_L(self, L: int, r: int | None = None) -> "TileUniverse":
        return TileUniverse(self.N, self.M, L, max(self.r, self.N + L) if r is None else r)

    def bitile_scales(self) -> range:
        return range(1 - self.N, self.M + 1)

    def bitiles(self) -> list[Bitile]:
        out = []
        for k in self.bitile_scales():
            for n in range(1 << (self.M - k)):
                for l in range(1 << (self.N - 1 + k)):
                    out.append(Bitile(k, n, 1 - k, l))
        return out

    def tiles(self, freq_exp: int | None = None) -> list[Tile]:
        """Tiles inside ``[0, 2**M) x [0, 2**freq_exp)`` (default ``freq_exp = N``)."""
        F = self.N if freq_exp is None else freq_exp
        out = []
        for k in range(-F, self.M + 1):
            for n in range(1 << (self.M - k)):
                for l in range(1 << (F + k)):
                    out.append(Tile(k, n, -k, l))
        return out

    def contains(self, R: Rect, freq_exp: int | None = None) -> bool:
        """Is ``R`` inside ``[0, 2**M) x [0, 2**freq_exp)`` (default ``freq_exp = N``)."""
        F = self.N if freq_exp is None else freq_exp
        return _inside(R.k, R.n, self.M) and _inside(R.kf, R.l, F)

    def to_json(self) -> dict:
        return {"N": self.N, "M": self.M, "L": self.L, "r": self.r}

    @classmethod
    def from_json(cls, obj) -> "TileUniverse":
        return cls(int(obj["N"]), int(obj["M"]), int(obj.get("L", 2)),
                   None if obj.get("r") is None else int(obj["r"]))


# -- basic operations -------------------------------------------------------

def split_bitile(P: Bitile, part: str) -> Tile:
    """Return ``P_u``, ``P_d``, ``P_left`` or ``P_right``."""
    if not isinstance(P, Bitile):
        P = Bitile(P.k, P.n, P.kf, P.l)
    if part in ("upper", "u"):
        return P.upper
    if part in ("lower", "d", "l"):
        return P.lower
    if part == "left":
        return P.left
    if part == "right":
        return P.right
    raise ValueError(f"unknown part {part!r}")


def rect_le(P: Rect, Q: Rect) -> bool:
    """``P <= Q``: time of P inside time of Q and frequency of Q inside frequency of P."""
    return (interval_contains(Q.k, Q.n, P.k, P.n)
            and interval_contains(P.kf, P.l, Q.kf, Q.l))


def rect_lt(P: Rect, Q: Rect) -> bool:
    return P != Q and rect_le(P, Q)


def dilate(S: Iterable[Rect], L: int, freq_limit_exp: int | None = None) -> list[Rect]:
    """Map each ``I x omega`` to ``I x 2^L omega``.

    With ``freq_limit_exp`` set, images reaching beyond ``2**freq_limit_exp``
    raise :class:`UniverseOverflowError`.
    """
    if L < 0:
        raise GeometryError("dilation exponent must be non-negative")
    out = []
    for R in S:
        D = make_rect(R.k, R.n, R.kf + L, R.l)
        if freq_limit_exp is not None and not _inside(D.kf, D.l, freq_limit_exp):
            raise UniverseOverflowError(f"{D} leaves [0, 2^{freq_limit_exp})")
        out.append(D)
    return out


def dilate_rect(R: Rect, L: int) -> Rect:
    return make_rect(R.k, R.n, R.kf + L, R.l)


def minimal_tiles(R: Rect) -> list[Tile]:
    """The ``2**j`` tiles of shortest time length partitioning ``R`` (area ``2**j``)."""
    j = R.area_exp
    if j < 0:
        raise GeometryError("rectangle has area below one")
    base = R.n << j
    return [Tile(R.k - j, base + i, R.kf, R.l) for i in range(1 << j)]


def maximal_tiles(R: Rect) -> list[Tile]:
    """The ``2**j`` full-width tiles partitioning ``R`` (split in frequency)."""
    j = R.area_exp
    if j < 0:
        raise GeometryError("rectangle has area below one")
    base = R.l << j
    return [Tile(R.k, R.n, R.kf - j, base + i) for i in range(1 << j)]


# -- convexity -------------------------------------------------------------

def intermediate_bitiles(P1: Bitile, P2: Bitile) -> list[Bitile]:
    """All bitiles ``P`` with ``P1 < P < P2`` (one per strictly intermediate scale)."""
    if not rect_le(P1, P2) or P1 == P2:
        return []
    out = []
    for k in range(P1.k + 1, P2.k):
        # time: ancestor of I_{P1}; frequency: ancestor of omega_{P2}
        kf = 1 - k
        out.append(Bitile(k, P1.n >> (k - P1.k), kf, P2.l >> (kf - P2.kf)))
    return out


def is_convex(S: Iterable[Bitile]) -> bool:
    S = set(S)
    by_scale: dict[int, list[Bitile]] = {}
    for P in S:
        by_scale.setdefault(P.k, []).append(P)
    scales = sorted(by_scale)
    for i, k1 in enumerate(scales):
        for k2 in scales[i + 1:]:
            if k2 - k1 < 2:
                continue
            for P1 in by_scale[k1]:
                for P2 in by_scale[k2]:
                    if rect_le(P1, P2):
                        for P in intermediate_bitiles(P1, P2):
                            if P not in S:
                                return False
    return True


def convex_hull(S: Iterable[Bitile]) -> set[Bitile]:
    """Smallest convex set of bitiles containing ``S``."""
    S = set(S)
    out = set(S)
    items = list(S)
    for P1 in items:
        for P2 in items:
            out.update(intermediate_bitiles(P1, P2))
    return out


# -- tilings ---------------------------------------------------------------

def _bounding_rect(rects: list[Rect]) -> Rect:
    """A dyadic rectangle of the form [0, 2^a) x [0, 2^b) containing all rects."""
    a = max(R.k + (R.n + 1).bit_length() for R in rects)
    b = max(R.kf + (R.l + 1).bit_length() for R in rects)
    # (n+1).bit_length() bounds log2(n+1) from above
    return make_rect(a, 0, b, 0)


def tile_region(rects: Iterable[Rect], prefer: str = "time") -> list[Tile]:
    """Disjoint tiling of the union of dyadic rectangles of area at least one.

    Recursive on dyadic sub-rectangles of a bounding box: a tileable region
    inside ``R`` either has every tile in a time half of ``R`` or every tile
    in a frequency half of ``R`` (a full-width tile and a full-height tile
    always meet).  ``prefer`` selects which split is tried first, which
    yields different tilings of the same region.
    """
    if prefer not in ("time", "frequency"):
        raise ValueError("prefer must be 'time' or 'frequency'")
    rects = list(dict.fromkeys(rects))
    if not rects:
        return []
    for R in rects:
        if R.area_exp < 0:
            raise UntileableRegionError(f"{R} has area below one")
    box = _bounding_rect(rects)
    memo: dict[Rect, list[Tile] | None] = {}
    fill = minimal_tiles if prefer == "time" else maximal_tiles

    def solve(R: Rect, inside: list[Rect]) -> list[Tile] | None:
        if not inside:
            return []
        if R in memo:
            return memo[R]
        if any(Q.contains(R) for Q in inside):
            res = fill(R)
        elif R.area_exp == 0:
            res = None
        else:
            res = None
            halves = {
                "time": ((R.k - 1, 2 * R.n, R.kf, R.l), (R.k - 1, 2 * R.n + 1, R.kf, R.l)),
                "frequency": ((R.k, R.n, R.kf - 1, 2 * R.l), (R.k, R.n, R.kf - 1, 2 * R.l + 1)),
            }
            order = ("time", "frequency") if prefer == "time" else ("frequency", "time")
            for how in order:
                parts = []
                for keys in halves[how]:
                    H = make_rect(*keys)
                    sub = [Q.intersection(H) for Q in inside]
                    sub = [Q for Q in sub if Q is not None]
                    t = solve(H, sub)
                    if t is None:
                        break
                    parts.extend(t)
                else:
                    res = parts
                    break
        memo[R] = res
        return res

    clipped = [Q.intersection(box) for Q in rects]
    result = solve(box, [Q for Q in clipped if Q is not None])
    if result is None:
        raise UntileableRegionError("region is not a disjoint union of tiles")
    return result


def convex_union_tiling(S: Iterable[Bitile], prefer: str = "time") -> list[Tile]:
    """Disjoint tiles whose union is the union of the convex bitile set ``S``."""
    S = list(dict.fromkeys(S))
    if not is_convex(S):
        raise NotConvexError("bitile collection is not convex")
    return tile_region(S, prefer=prefer)


def tree_parts(top: Bitile, members: Iterable[Bitile]) -> tuple[list[Bitile], list[Bitile]]:
    """Split the non-top members into ``T_u`` and ``T_d``.

    ``P`` goes to ``T_d`` when its lower half sits under the top
    (``P_d <= P_T``, i.e. ``omega_T`` inside ``omega_{P_d}``), to ``T_u``
    when its upper half does.
    """
    up, down = [], []
    for P in members:
        if P == top:
            continue
        if rect_le(P.lower, top):
            down.append(P)
        elif rect_le(P.upper, top):
            up.append(P)
        else:
            raise InvalidTreeError(f"{P} is not below the top {top}")
    return up, down


def tree_tiling(top: Bitile, members: Iterable[Bitile], check_convex: bool = True) -> list[Tile]:
    """Tiles ``(P_T)_u, (P_T)_d``, ``P_d`` for ``P`` in ``T_u`` and ``P_u`` for ``P`` in ``T_d``."""
    members = set(members)
    if top not in members:
        raise InvalidTreeError("the top must belong to the tree")
    if check_convex and not is_convex(members):
        raise NotConvexError("tree is not convex")
    up, down = tree_parts(top, members)
    return [top.upper, top.lower] + [P.lower for P in up] + [P.upper for P in down]


def cell_cover(rects: Iterable[Rect], t_exp: int, f_exp: int, M: int, F: int):
    """Boolean coverage grid of the rectangles at cell size ``2^t_exp x 2^f_exp``.

    Returns an integer count array of shape ``(2^(M-t_exp), 2^(F-f_exp))``
    so overlaps show up as values above one.
    """
    import numpy as np

    grid = np.zeros((1 << (M - t_exp), 1 << (F - f_exp)), dtype=np.int64)
    for R in rects:
        if R.k < t_exp or R.kf < f_exp:
            raise GeometryError("cell grid too coarse for this rectangle")
        t0, t1 = R.n << (R.k - t_exp), (R.n + 1) << (R.k - t_exp)
        f0, f1 = R.l << (R.kf - f_exp), (R.l + 1) << (R.kf - f_exp)
        grid[t0:t1, f0:f1] += 1
    return grid
