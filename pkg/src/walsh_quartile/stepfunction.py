"""Step functions and cell sets on ``[0, 2**M)`` at resolution ``2**-r``."""
from __future__ import annotations

import csv
import io
from typing import Iterable, Sequence

import numpy as np

from . import exact
from .dyadic import DyadicRational, ZERO


class ResolutionError(ValueError):
    pass


class StepFunction:
    """Function constant on the cells ``[j 2^-r, (j+1) 2^-r)`` of ``[0, 2^M)``.

    Values are stored as an integer numerator array with one shared
    exponent: the value on cell ``j`` is ``num[j] * 2**exp``.
    """

    __slots__ = ("resolution", "support", "num", "exp")

    def __init__(self, num: np.ndarray, exp: int, resolution: int, support: int):
        num = np.asarray(num)
        if num.dtype != object:
            num = num.astype(np.int64, copy=False)
        if num.shape != (1 << (support + resolution),):
            raise ResolutionError(
                f"expected {1 << (support + resolution)} cells, got {num.shape}")
        self.num = num
        self.exp = int(exp)
        self.resolution = int(resolution)
        self.support = int(support)

    # -- construction ---------------------------------------------------

    @classmethod
    def zeros(cls, support: int, resolution: int) -> "StepFunction":
        return cls(np.zeros(1 << (support + resolution), dtype=np.int64), 0, resolution, support)

    @classmethod
    def from_values(cls, values: Sequence, support: int, resolution: int) -> "StepFunction":
        vals = [DyadicRational.coerce(v) for v in values]
        if len(vals) != 1 << (support + resolution):
            raise ResolutionError("wrong number of cell values")
        nz = [v for v in vals if v.mantissa]
        e = min((v.exponent for v in nz), default=0)
        num = exact.as_int_array([v.mantissa << (v.exponent - e) if v.mantissa else 0 for v in vals])
        return cls(num, e, resolution, support)

    @classmethod
    def from_intervals(cls, pieces: Iterable, support: int, resolution: int) -> "StepFunction":
        """Sum of ``value * 1_[a, b)`` over ``(a, b, value)`` triples with dyadic endpoints."""
        f = cls.zeros(support, resolution)
        for a, b, v in pieces:
            f = f + cls.indicator_interval(a, b, support, resolution) * DyadicRational.coerce(v)
        return f

    @classmethod
    def indicator_interval(cls, a, b, support: int, resolution: int) -> "StepFunction":
        a, b = DyadicRational.coerce(a), DyadicRational.coerce(b)
        i0, i1 = _cell_index(a, resolution), _cell_index(b, resolution)
        n = 1 << (support + resolution)
        if not 0 <= i0 <= i1 <= n:
            raise ResolutionError(f"[{a},{b}) is not inside [0, 2^{support})")
        num = np.zeros(n, dtype=np.int64)
        num[i0:i1] = 1
        return cls(num, 0, resolution, support)

    # -- basic views --------------------------------------------------------

    @property
    def n_cells(self) -> int:
        return self.num.shape[0]

    def cells(self) -> list[DyadicRational]:
        return [DyadicRational(int(v), self.exp) for v in self.num]

    def cell(self, j: int) -> DyadicRational:
        return DyadicRational(int(self.num[j]), self.exp)

    def value_at(self, x) -> DyadicRational:
        x = DyadicRational.coerce(x)
        j = _floor_cell(x, self.resolution)
        if not 0 <= j < self.n_cells:
            return ZERO
        return self.cell(j)

    def is_zero(self) -> bool:
        return not np.any(self.num != 0)

    def canonical(self) -> "StepFunction":
        """Same function with the numerators stripped of common factors of two."""
        tz = exact.trailing_zeros(self.num)
        if tz is None:
            return StepFunction(np.zeros(self.n_cells, dtype=np.int64), 0, self.resolution, self.support)
        return StepFunction(exact.shrink(exact.rshift_exact(self.num, tz)), self.exp + tz,
                            self.resolution, self.support)

    def refine(self, resolution: int) -> "StepFunction":
        if resolution < self.resolution:
            raise ResolutionError("refine() only increases resolution")
        if resolution == self.resolution:
            return self
        rep = 1 << (resolution - self.resolution)
        return StepFunction(np.repeat(self.num, rep), self.exp, resolution, self.support)

    def coarsen(self, resolution: int) -> "StepFunction":
        """Same function at a coarser resolution; fails if not constant on the coarser cells."""
        if resolution > self.resolution:
            raise ResolutionError("coarsen() only decreases resolution")
        d = self.resolution - resolution
        blocks = self.num.reshape(-1, 1 << d)
        if np.any(blocks != blocks[:, :1]):
            raise ResolutionError(f"function is not constant on cells of width 2^-{resolution}")
        return StepFunction(blocks[:, 0].copy(), self.exp, resolution, self.support)

    def natural_resolution(self) -> int:
        """Smallest resolution on which the function is a step function."""
        r = self.resolution
        num = self.num
        while r > -self.support:
            blocks = num.reshape(-1, 2)
            if np.any(blocks[:, 0] != blocks[:, 1]):
                break
            num = blocks[:, 0]
            r -= 1
        return r

    def extend(self, support: int) -> "StepFunction":
        """Zero-extend to ``[0, 2**support)``."""
        if support < self.support:
            raise ResolutionError("extend() only enlarges the support window")
        n = 1 << (support + self.resolution)
        num = np.zeros(n, dtype=self.num.dtype)
        num[: self.n_cells] = self.num
        return StepFunction(num, self.exp, self.resolution, support)

    # -- arithmetic -----------------------------------------------------

    def _aligned(self, other: "StepFunction"):
        if self.support != other.support:
            s = max(self.support, other.support)
            return self.extend(s)._aligned(other.extend(s))
        r = max(self.resolution, other.resolution)
        a, b = self.refine(r), other.refine(r)
        e = min(a.exp, b.exp)
        return exact.lshift(a.num, a.exp - e), exact.lshift(b.num, b.exp - e), e, r, a.support

    def __add__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        x, y, e, r, s = self._aligned(other)
        return StepFunction(exact.add(x, y), e, r, s)

    def __sub__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        x, y, e, r, s = self._aligned(other)
        return StepFunction(exact.add(x, y, -1), e, r, s)

    def __neg__(self):
        return StepFunction(-self.num, self.exp, self.resolution, self.support)

    def __mul__(self, other):
        if isinstance(other, StepFunction):
            x, y, e, r, s = self._aligned(other)
            return StepFunction(exact.mul(x, y), 2 * e, r, s)
        try:
            c = DyadicRational.coerce(other)
        except TypeError:
            return NotImplemented
        return StepFunction(exact.scale(self.num, c.mantissa), self.exp + c.exponent,
                            self.resolution, self.support)

    __rmul__ = __mul__

    def shift_values(self, k: int) -> "StepFunction":
        """Multiply by ``2**k``."""
        return StepFunction(self.num, self.exp + k, self.resolution, self.support)

    def abs(self) -> "StepFunction":
        return StepFunction(np.abs(self.num), self.exp, self.resolution, self.support)

    def restrict(self, mask: "DyadicSet") -> "StepFunction":
        m = mask.at_resolution(self.resolution, self.support).mask
        return StepFunction(np.where(m, self.num, 0).astype(self.num.dtype), self.exp,
                            self.resolution, self.support)

    # -- integrals --------------------------------------------------------

    def integral(self) -> DyadicRational:
        return DyadicRational(exact.total(self.num), self.exp - self.resolution)

    def inner(self, other: "StepFunction") -> DyadicRational:
        x, y, e, r, _ = self._aligned(other)
        return DyadicRational(exact.total(exact.mul(x, y)), 2 * e - r)

    def norm_sq(self) -> DyadicRational:
        return DyadicRational(exact.total(exact.mul(self.num, self.num)), 2 * self.exp - self.resolution)

    def norm1(self) -> DyadicRational:
        return DyadicRational(exact.total(np.abs(self.num)), self.exp - self.resolution)

    def norm_pow(self, p: int) -> DyadicRational:
        """``||f||_p ** p`` for a positive integer ``p``."""
        a = exact.to_object(np.abs(self.num)) if p > 1 else np.abs(self.num)
        s = sum(int(v) ** p for v in a.flat) if p > 1 else exact.total(a)
        return DyadicRational(s, p * self.exp - self.resolution)

    def norm_p_float(self, p: float) -> float:
        """``||f||_p`` in floating point (for reporting only)."""
        vals = np.abs(self.num.astype(float)) * 2.0 ** self.exp
        return float((np.sum(vals ** p) * 2.0 ** -self.resolution) ** (1.0 / p))

    def max_abs(self) -> DyadicRational:
        if self.n_cells == 0:
            return ZERO
        return DyadicRational(max(abs(int(self.num.max())), abs(int(self.num.min()))), self.exp)

    # -- comparison / io ------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        x, y, *_ = self._aligned(other)
        return bool(np.all(x == y))

    __hash__ = None

    def __repr__(self):
        return (f"StepFunction(support=2^{self.support}, resolution=2^-{self.resolution}, "
                f"nonzero_cells={int(np.count_nonzero(self.num))})")

    def to_json(self) -> dict:
        return {"resolution": self.resolution, "support": self.support,
                "cells": [DyadicRational(int(v), self.exp).to_json() for v in self.num]}

    @classmethod
    def from_json(cls, obj) -> "StepFunction":
        vals = [DyadicRational.from_json(c) for c in obj["cells"]]
        return cls.from_values(vals, int(obj["support"]), int(obj["resolution"]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["left", "right", "value", "value_float"])
        width = DyadicRational.pow2(-self.resolution)
        for j, v in enumerate(self.cells()):
            left = DyadicRational(j, -self.resolution)
            w.writerow([str(left), str(left + width), str(v), float(v)])
        return buf.getvalue()


def _floor_cell(x: DyadicRational, resolution: int) -> int:
    # floor(x * 2^resolution)
    s = x.exponent + resolution
    return x.mantissa << s if s >= 0 else x.mantissa >> -s


def _cell_index(x: DyadicRational, resolution: int) -> int:
    s = x.exponent + resolution
    if s < 0:
        raise ResolutionError(f"{x} is not a multiple of 2^-{resolution}")
    return x.mantissa << s


class DyadicSet:
    """Union of resolution cells of ``[0, 2**M)``, as a boolean mask."""

    __slots__ = ("mask", "resolution", "support")

    def __init__(self, mask: np.ndarray, resolution: int, support: int):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (1 << (support + resolution),):
            raise ResolutionError("mask has the wrong number of cells")
        self.mask = mask
        self.resolution = int(resolution)
        self.support = int(support)

    @classmethod
    def empty(cls, support: int, resolution: int) -> "DyadicSet":
        return cls(np.zeros(1 << (support + resolution), dtype=bool), resolution, support)

    @classmethod
    def from_intervals(cls, intervals: Iterable, support: int, resolution: int) -> "DyadicSet":
        m = np.zeros(1 << (support + resolution), dtype=bool)
        for a, b in intervals:
            i0 = _cell_index(DyadicRational.coerce(a), resolution)
            i1 = _cell_index(DyadicRational.coerce(b), resolution)
            if not 0 <= i0 <= i1 <= m.size:
                raise ResolutionError("interval outside the support window")
            m[i0:i1] = True
        return cls(m, resolution, support)

    def at_resolution(self, resolution: int, support: int | None = None) -> "DyadicSet":
        s = self
        if support is not None and support != self.support:
            if support < self.support:
                if np.any(self.mask[1 << (support + self.resolution):]):
                    raise ResolutionError("set does not fit the smaller window")
                s = DyadicSet(self.mask[: 1 << (support + self.resolution)], self.resolution, support)
            else:
                m = np.zeros(1 << (support + self.resolution), dtype=bool)
                m[: self.mask.size] = self.mask
                s = DyadicSet(m, self.resolution, support)
        if resolution == s.resolution:
            return s
        if resolution > s.resolution:
            return DyadicSet(np.repeat(s.mask, 1 << (resolution - s.resolution)), resolution, s.support)
        blocks = s.mask.reshape(-1, 1 << (s.resolution - resolution))
        if np.any(blocks != blocks[:, :1]):
            raise ResolutionError("set is not a union of the coarser cells")
        return DyadicSet(blocks[:, 0].copy(), resolution, s.support)

    def _pair(self, other: "DyadicSet"):
        r = max(self.resolution, other.resolution)
        s = max(self.support, other.support)
        return self.at_resolution(r, s), other.at_resolution(r, s)

    def __or__(self, other):
        a, b = self._pair(other)
        return DyadicSet(a.mask | b.mask, a.resolution, a.support)

    def __and__(self, other):
        a, b = self._pair(other)
        return DyadicSet(a.mask & b.mask, a.resolution, a.support)

    def __sub__(self, other):
        a, b = self._pair(other)
        return DyadicSet(a.mask & ~b.mask, a.resolution, a.support)

    def __eq__(self, other):
        if not isinstance(other, DyadicSet):
            return NotImplemented
        a, b = self._pair(other)
        return bool(np.array_equal(a.mask, b.mask))

    __hash__ = None

    def issubset(self, other: "DyadicSet") -> bool:
        a, b = self._pair(other)
        return bool(np.all(~a.mask | b.mask))

    def is_empty(self) -> bool:
        return not self.mask.any()

    def measure(self) -> DyadicRational:
        return DyadicRational(int(np.count_nonzero(self.mask)), -self.resolution)

    def indicator(self) -> StepFunction:
        return StepFunction(self.mask.astype(np.int64), 0, self.resolution, self.support)

    def contains_interval(self, scale: int, position: int) -> bool:
        d = scale + self.resolution
        if d < 0:
            raise ResolutionError("interval finer than the set resolution")
        lo, hi = position << d, (position + 1) << d
        if hi > self.mask.size:
            return False
        return bool(self.mask[lo:hi].all())

    def maximal_intervals(self) -> list[tuple[int, int]]:
        """Maximal dyadic intervals ``(scale, position)`` contained in the set."""
        out = []
        full = self.mask.copy()
        scale = -self.resolution
        levels = [(scale, full)]
        while full.size > 1:
            full = full[0::2] & full[1::2]
            scale += 1
            levels.append((scale, full))
        for i, (scale, full) in enumerate(levels):
            if i + 1 < len(levels):
                parent = np.repeat(levels[i + 1][1], 2)
                keep = full & ~parent
            else:
                keep = full
            out.extend((scale, int(p)) for p in np.flatnonzero(keep))
        return sorted(out, key=lambda t: (t[1] << (t[0] + self.resolution), t[0]))

    def __repr__(self):
        return f"DyadicSet(measure={self.measure()}, resolution=2^-{self.resolution})"

    def to_json(self) -> dict:
        return {"resolution": self.resolution, "support": self.support,
                "intervals": [[str(DyadicRational(p, s)), str(DyadicRational(p + 1, s))]
                              for s, p in self.maximal_intervals()]}

    @classmethod
    def from_json(cls, obj) -> "DyadicSet":
        return cls.from_intervals([(a, b) for a, b in obj["intervals"]],
                                  int(obj["support"]), int(obj["resolution"]))
