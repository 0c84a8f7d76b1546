"""Walsh wave packets, coefficients and phase-plane projections.

Packets are kept in L-infinity normalization: the packet of a tile ``p``
takes the values ``+1/-1`` on ``I_p`` and ``0`` elsewhere.  The L2
normalized packet is ``|I_p|**-1/2`` times that, so a projection reads
``sum_p |I_p|**-1 <f, packet_p> packet_p`` and stays dyadic-rational.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import exact
from .dyadic import DyadicRational
from .stepfunction import ResolutionError, StepFunction
from .tiles import Rect, Tile, TileUniverse, GeometryError, tile_region


class OverlappingTilesError(GeometryError):
    pass


@lru_cache(maxsize=4096)
def walsh_pattern(depth: int, l: int) -> np.ndarray:
    """Values of the frequency-``l`` packet on the ``2**depth`` cells of its interval.

    Built top-down from the constant packet: the lower tile of a bitile is
    ``left + right`` and the upper tile ``left - right`` (L2 forms
    ``(w_left +- w_right)/sqrt 2``), each half carrying the packet of the
    parent frequency interval.
    """
    if l < 0 or depth < 0:
        raise ValueError("negative depth or frequency index")
    if l >> depth:
        raise ResolutionError(f"frequency index {l} needs more than {depth} binary digits")
    if l == 0:
        out = np.ones(1 << depth, dtype=np.int8)
    else:
        half = walsh_pattern(depth - 1, l >> 1)
        out = np.concatenate([half, half if l & 1 == 0 else -half])
    out.setflags(write=False)
    return out


def _depth_for(p: Rect) -> int:
    return max(p.l.bit_length() - p.k, -p.k)


def packet(p: Tile, support: int, resolution: int) -> StepFunction:
    """The L-infinity normalized packet of ``p`` on ``[0, 2**support)``."""
    if p.area_exp != 0:
        raise GeometryError(f"{p} is not a tile")
    depth = p.k + resolution
    if depth < 0 or p.l.bit_length() > depth:
        raise ResolutionError(f"resolution 2^-{resolution} too coarse for {p}")
    if p.k > support or (p.n + 1) << (p.k + resolution) > 1 << (support + resolution):
        raise GeometryError(f"{p} leaves [0, 2^{support})")
    num = np.zeros(1 << (support + resolution), dtype=np.int64)
    start = p.n << depth
    num[start:start + (1 << depth)] = walsh_pattern(depth, p.l)
    return StepFunction(num, 0, resolution, support)


def packet_eval(p: Tile, universe: TileUniverse) -> StepFunction:
    """Packet of a tile of the dilated universe ``[0,2^M) x [0,2^(N+L))``."""
    if not universe.contains(p, universe.N + universe.L):
        raise GeometryError(f"{p} is outside the universe")
    return packet(p, universe.M, universe.r)


def _check_window(f: StepFunction, p: Rect):
    if p.k > f.support or p.n + 1 > 1 << (f.support - p.k):
        raise GeometryError(f"{p} leaves the support window [0, 2^{f.support})")


def coefficient(f: StepFunction, p: Tile) -> DyadicRational:
    """``<f, packet_p>`` by direct cell summation."""
    _check_window(f, p)
    R = max(f.resolution, _depth_for(p))
    g = f.refine(R)
    depth = p.k + R
    start = p.n << depth
    seg = g.num[start:start + (1 << depth)]
    pat = walsh_pattern(depth, p.l).astype(np.int64)
    return DyadicRational(exact.total(exact.mul(seg, pat)), g.exp - R)


def find_overlap(tiles: Sequence[Rect]) -> tuple[Rect, Rect] | None:
    """A pair of intersecting tiles, or None when they are pairwise disjoint.

    Two rectangles of the same area meet iff they are comparable, so for
    each pair of scales only one key comparison per tile is needed.
    """
    by_scale: dict[int, list[Rect]] = {}
    seen = set()
    for p in tiles:
        if p in seen:
            return (p, p)
        seen.add(p)
        by_scale.setdefault(p.k, []).append(p)
    scales = sorted(by_scale)
    for i, k1 in enumerate(scales):
        for k2 in scales[i + 1:]:
            d = k2 - k1
            # p at k1 (narrow, tall) meets q at k2 iff I_p inside I_q and omega_q inside omega_p
            keys = {}
            for q in by_scale[k2]:
                keys[(q.n, q.l >> d)] = q
            for p in by_scale[k1]:
                q = keys.get((p.n >> d, p.l))
                if q is not None:
                    return (p, q)
    return None


def projection(f: StepFunction, tiles: Iterable[Tile], resolution: int | None = None,
               check_disjoint: bool = True) -> StepFunction:
    """``sum_p |I_p|^-1 <f, packet_p> packet_p`` over pairwise disjoint tiles."""
    tiles = list(tiles)
    if check_disjoint:
        bad = find_overlap(tiles)
        if bad is not None:
            raise OverlappingTilesError(f"tiles {bad[0]} and {bad[1]} overlap")
    R = max([f.resolution] + [_depth_for(p) for p in tiles])
    if resolution is not None:
        if resolution < R:
            raise ResolutionError(f"output resolution must be at least {R}")
        R = resolution
    g = f.refine(R)
    if not tiles:
        return StepFunction.zeros(f.support, R)
    kmax = max(p.k for p in tiles)
    terms = []
    bound = 0
    for p in tiles:
        _check_window(g, p)
        depth = p.k + R
        start = p.n << depth
        pat = walsh_pattern(depth, p.l)
        c = exact.total(exact.mul(g.num[start:start + (1 << depth)], pat.astype(np.int64)))
        if c:
            c <<= kmax - p.k
            terms.append((start, pat, c))
            bound += abs(c)
    dtype = object if bound.bit_length() + 1 >= exact.SAFE_BITS else np.int64
    out = np.zeros(g.n_cells, dtype=dtype)
    for start, pat, c in terms:
        seg = pat.astype(dtype) * c if dtype is object else pat.astype(np.int64) * c
        out[start:start + seg.size] += seg
    # value = c 2^(kmax-k) * 2^(exp-R) * 2^(-kmax)
    return StepFunction(exact.shrink(out), g.exp - R - kmax, R, g.support).canonical()


def region_projection(f: StepFunction, rects: Iterable[Rect], resolution: int | None = None,
                      prefer: str = "time") -> StepFunction:
    """Projection onto a union of dyadic rectangles, through any disjoint tiling of it."""
    return projection(f, tile_region(rects, prefer=prefer), resolution=resolution,
                      check_disjoint=False)


class PacketTable:
    """All packet coefficients of ``f`` from one butterfly pass.

    Level ``s`` holds ``<f, packet>`` for the tiles of time length ``2**s``
    as an integer array ``[position, frequency]`` in units of
    ``2**(f.exp - f.resolution)``.  ``freq_exp`` caps the frequencies kept
    to ``[0, 2**freq_exp)``.
    """

    def __init__(self, f: StepFunction, freq_exp: int | None = None):
        self.f = f
        self.r = f.resolution
        self.M = f.support
        self.freq_exp = freq_exp
        self.unit_exp = f.exp - f.resolution
        nb = exact.bits(f.num) + f.support + f.resolution + 2
        cur = f.num.reshape(-1, 1)
        cur = cur.astype(object) if nb >= exact.SAFE_BITS else cur.astype(np.int64)
        self.levels = {-self.r: cur}
        for s in range(-self.r + 1, self.M + 1):
            even, odd = cur[0::2], cur[1::2]
            width = self.width(s)
            new = np.empty((even.shape[0], width), dtype=cur.dtype)
            new[:, 0::2] = (even + odd)[:, : (width + 1) // 2]
            new[:, 1::2] = (even - odd)[:, : width // 2]
            self.levels[s] = cur = new

    def width(self, s: int) -> int:
        w = s + self.r
        if self.freq_exp is not None:
            w = min(w, s + self.freq_exp)
        return 1 << max(w, 0)

    def level(self, s: int, ncols: int) -> tuple[np.ndarray, int]:
        """Coefficients at level ``s`` for frequencies ``< ncols``: ``(array, exponent)``."""
        if s > self.M:
            raise ResolutionError(f"level {s} is coarser than the support window")
        if s >= -self.r:
            arr = self.levels[s]
            have = arr.shape[1]
            if ncols <= have:
                return arr[:, :ncols], self.unit_exp
            if have < 1 << (s + self.r):
                raise ResolutionError(f"table was truncated below frequency 2^{self.freq_exp}")
            pad = np.zeros((arr.shape[0], ncols), dtype=arr.dtype)
            pad[:, :have] = arr
            return pad, self.unit_exp
        # f is constant on tiles narrower than a cell: only the zero frequency survives
        base = np.repeat(self.f.num, 1 << (-self.r - s))
        out = np.zeros((base.size, ncols), dtype=base.dtype)
        if ncols:
            out[:, 0] = base
        return out, self.f.exp + s

    def coef(self, p: Rect) -> DyadicRational:
        arr, e = self.level(p.k, p.l + 1)
        return DyadicRational(int(arr[p.n, p.l]), e)
