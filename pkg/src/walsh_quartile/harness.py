"""Experiment driver: random instances, identity checks, sweeps and restricted-type runs."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .decomposition import (bitiles_outside, counting_bounds, exceptional_set, full_decomposition,
                            major_subset, multi_frequency_decomposition, parseval_piece,
                            select_trees, start_level)
from .dyadic import ZERO, DyadicRational
from .forest import Tree, enlarged_projection, size_sq, tree_split
from .form import FormEvaluator, FormSpec, lambda_form, telescoping_split, vanishing_integral
from .stepfunction import DyadicSet, StepFunction
from .tiles import TileUniverse, convex_hull, convex_union_tiling, rect_le, tile
from .walsh import projection, walsh_pattern


@dataclass
class ExperimentConfig:
    N: int = 3
    M: int = 3
    L_values: list = field(default_factory=lambda: [2])
    r: int | None = None
    p: tuple | None = (2, 4, 4)
    alpha: tuple | None = None
    eps: str = "1/12"
    trials: int = 20
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        if self.p is not None:
            if sum(Fraction(1, 1) / Fraction(q) for q in self.p) != 1:
                raise ValueError("exponents must satisfy 1/p1 + 1/p2 + 1/p3 = 1")
        if self.alpha is not None:
            if sum(Fraction(a) for a in self.alpha) != 1:
                raise ValueError("alphas must sum to 1")

    @property
    def mode(self) -> str:
        return "restricted" if self.alpha is not None else "strong"

    def universe(self, L: int | None = None) -> TileUniverse:
        L = self.L_values[0] if L is None else L
        return TileUniverse(self.N, self.M, L, self.r if self.r is not None else self.N + L)

    def to_json(self) -> dict:
        d = asdict(self)
        d["p"] = list(self.p) if self.p is not None else None
        d["alpha"] = [str(a) for a in self.alpha] if self.alpha is not None else None
        return d

    @classmethod
    def from_json(cls, obj) -> "ExperimentConfig":
        obj = dict(obj)
        if obj.get("p") is not None:
            obj["p"] = tuple(obj["p"])
        if obj.get("alpha") is not None:
            obj["alpha"] = tuple(str(a) for a in obj["alpha"])
        return cls(**obj)


@dataclass
class CheckResult:
    name: str
    passed: bool
    instances: int
    witness: dict | None = None
    seconds: float = 0.0
    details: dict | None = None

    def to_json(self) -> dict:
        return asdict(self)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# ---- random instances ---------------------------------------------------------------

def random_step_function(seed, bound_set: DyadicSet, mode: str = "signed-dyadic") -> StepFunction:
    """A random function with ``|f| <= 1`` on ``bound_set`` and ``0`` elsewhere.

    ``signed-dyadic`` draws multiples of 1/4 in ``[-1, 1]`` per cell,
    ``indicator`` draws a random sub-indicator.
    """
    rng = _rng(seed)
    n = bound_set.mask.size
    if mode == "signed-dyadic":
        num = rng.integers(-4, 5, size=n)
        exp = -2
    elif mode == "indicator":
        num = rng.integers(0, 2, size=n)
        exp = 0
    elif mode == "sign":
        num = rng.choice(np.array([-1, 1]), size=n)
        exp = 0
    else:
        raise ValueError(f"unknown mode {mode!r}")
    num = np.where(bound_set.mask, num, 0).astype(np.int64)
    return StepFunction(num, exp, bound_set.resolution, bound_set.support).canonical()


def full_window(M: int, resolution: int) -> DyadicSet:
    return DyadicSet(np.ones(1 << (M + resolution), dtype=bool), resolution, M)


def random_function(rng, U: TileUniverse, mode: str = "signed-dyadic",
                    resolution: int | None = None) -> StepFunction:
    return random_step_function(rng, full_window(U.M, U.r if resolution is None else resolution), mode)


def random_convex_set(rng, U: TileUniverse, picks: int = 3) -> set:
    bts = U.bitiles()
    idx = rng.choice(len(bts), size=min(picks, len(bts)), replace=False)
    return convex_hull(bts[i] for i in idx)


def random_tree(rng, U: TileUniverse, extra: int = 4, need_down: bool = False) -> Tree:
    """Convex hull of a random top and random bitiles below it."""
    bts = U.bitiles()
    while True:
        top = bts[rng.integers(len(bts))]
        below = [P for P in bts if rect_le(P, top) and P != top]
        if need_down:
            below = [P for P in below if rect_le(P.lower, top)]
            if not below:
                continue
        chosen = {top}
        if below:
            idx = rng.choice(len(below), size=min(extra, len(below)), replace=False)
            chosen |= {below[i] for i in idx}
        T = Tree(top, frozenset(convex_hull(chosen)))
        if need_down and not tree_split(T)[2]:
            continue
        return T


# ---- exact identity checks -----------------------------------------------------------

def _batched_tables(X: np.ndarray, r: int, M: int):
    """Butterfly coefficient tables of every row of ``X`` (one function per row)."""
    cur = X.reshape(X.shape[0], -1, 1)
    yield -r, cur
    for s in range(-r + 1, M + 1):
        even, odd = cur[:, 0::2], cur[:, 1::2]
        new = np.empty((cur.shape[0], even.shape[1], 2 * cur.shape[2]), dtype=cur.dtype)
        new[:, :, 0::2] = even + odd
        new[:, :, 1::2] = even - odd
        cur = new
        yield s, cur


def check_orthonormality(M: int, r: int, corrupt: tuple | None = None) -> CheckResult:
    """``int w_p w_q`` over every pair of tiles of ``[0,2^M) x [0,2^r)``.

    For each scale the packets are stacked and run through one batched
    butterfly, which yields their pairings with every tile at once; entries
    of non-intersecting pairs must vanish and the diagonal must equal
    ``|I_p|``.  ``corrupt = (k, n, l)`` flips one cell of that packet.
    """
    t0 = time.time()
    ncell = 1 << (M + r)
    count = 0
    for sp in range(-r, M + 1):
        depth = sp + r
        npos, nfreq = 1 << (M - sp), 1 << depth
        X = np.zeros((npos * nfreq, ncell), dtype=np.int32)
        rows = np.arange(npos * nfreq)
        pos, freq = rows // nfreq, rows % nfreq
        for l in range(nfreq):
            pat = walsh_pattern(depth, l)
            for n in range(npos):
                X[n * nfreq + l, n << depth:(n + 1) << depth] = pat
        if corrupt is not None and corrupt[0] == sp:
            _, cn, cl = corrupt
            X[cn * nfreq + cl, cn << depth] *= -1
        count += X.shape[0]
        for s, table in _batched_tables(X, r, M):
            # table[p, n', l'] = <w_p, w_q> * 2^r for q = (s, n', l')
            qn = np.arange(table.shape[1])
            ql = np.arange(table.shape[2])
            # q meets p iff the shorter interval sits in the longer one, in time and frequency
            if s <= sp:
                t_hit = (qn[None, :] >> (sp - s)) == pos[:, None]
                f_hit = (freq[:, None] >> (sp - s)) == ql[None, :]
            else:
                t_hit = (pos[:, None] >> (s - sp)) == qn[None, :]
                f_hit = (ql[None, :] >> (s - sp)) == freq[:, None]
            hit = t_hit[:, :, None] & f_hit[:, None, :]
            bad = np.argwhere((table != 0) & ~hit)
            if bad.size:
                pi, qn_, ql_ = bad[0]
                return CheckResult("orthonormality", False, count, {
                    "p": [int(sp), int(pos[pi]), int(freq[pi])],
                    "q": [int(s), int(qn_), int(ql_)],
                    "inner_product_times_2^r": int(table[pi, qn_, ql_])}, time.time() - t0)
            if s == sp:
                diag = table[rows, pos, freq]
                want = 1 << (sp + r)
                wrong = np.flatnonzero(diag != want)
                if wrong.size:
                    i = wrong[0]
                    return CheckResult("orthonormality", False, count, {
                        "p": [int(sp), int(pos[i]), int(freq[i])],
                        "q": [int(sp), int(pos[i]), int(freq[i])],
                        "norm_sq_times_2^r": int(diag[i]), "expected": want}, time.time() - t0)
    return CheckResult("orthonormality", True, count, None, time.time() - t0)


def _fail(name, n, witness, t0):
    return CheckResult(name, False, n, witness, time.time() - t0)


def check_parseval(rng, U: TileUniverse, instances: int) -> CheckResult:
    """``||Pi_S f||^2 = sum |I_p|^-1 <f, w_p>^2`` and completeness on the whole window."""
    from .walsh import coefficient
    t0 = time.time()
    for i in range(instances):
        f = random_function(rng, U)
        S = random_convex_set(rng, U)
        tiles = convex_union_tiling(S)
        lhs = projection(f, tiles).norm_sq()
        rhs = sum(((coefficient(f, p) ** 2).shift(-p.k) for p in tiles), ZERO)
        # the window [0,2^M) x [0,2^r) tiled by its full-length tiles
        full = [tile(U.M, 0, l) for l in range(1 << (U.M + U.r))]
        whole = sum(((coefficient(f, p) ** 2).shift(-p.k) for p in full), ZERO)
        if lhs != rhs or whole != f.norm_sq():
            return _fail("parseval", i + 1, {"S": [P.to_json() for P in S], "f": f.to_json(),
                                             "lhs": str(lhs), "rhs": str(rhs)}, t0)
    return CheckResult("parseval", True, instances, None, time.time() - t0)


def check_tiling_independence(rng, U: TileUniverse, instances: int) -> CheckResult:
    t0 = time.time()
    for i in range(instances):
        S = random_convex_set(rng, U, picks=int(rng.integers(1, 5)))
        a = convex_union_tiling(S, prefer="time")
        b = convex_union_tiling(S, prefer="frequency")
        f = random_function(rng, U)
        if set(a) == set(b) or projection(f, a) != projection(f, b):
            return _fail("tiling_independence", i + 1, {
                "S": [P.to_json() for P in S], "f": f.to_json(), "distinct": set(a) != set(b)}, t0)
    return CheckResult("tiling_independence", True, instances, None, time.time() - t0)


def check_nested_projection(rng, U: TileUniverse, instances: int) -> CheckResult:
    """``Pi_{S1} Pi_{S2} f = Pi_{S1} f`` for ``S1`` inside ``S2``."""
    t0 = time.time()
    for i in range(instances):
        S2 = random_convex_set(rng, U, picks=int(rng.integers(2, 6)))
        members = sorted(S2)
        pick = rng.choice(len(members), size=max(1, len(members) // 2), replace=False)
        S1 = convex_hull(members[j] for j in pick)
        assert S1 <= S2
        f = random_function(rng, U)
        t1, t2 = convex_union_tiling(S1), convex_union_tiling(S2, prefer="frequency")
        if projection(projection(f, t2), t1) != projection(f, t1):
            return _fail("nested_projection", i + 1, {
                "S1": [P.to_json() for P in S1], "S2": [P.to_json() for P in S2],
                "f": f.to_json()}, t0)
    return CheckResult("nested_projection", True, instances, None, time.time() - t0)


def _projected_inputs(rng, U: TileUniverse, T: Tree):
    fs = [random_function(rng, U) for _ in range(3)]
    h1 = projection(fs[0], T.tiling())
    h2 = enlarged_projection(fs[1], T, U.L)
    h3 = enlarged_projection(fs[2], T, U.L)
    return fs, (h1, h2, h3)


def check_vanishing(rng, U: TileUniverse, instances: int, split_instances: int = 0) -> CheckResult:
    """Cross terms of the telescoped form vanish; the surviving sums rebuild ``Lambda_{T_d}``."""
    t0 = time.time()
    pairs = [(m, m2) for m in range(1, U.L + 1) for m2 in range(1, U.L + 1)
             if m != m2 and max(m, m2) > 1]
    for i in range(instances):
        T = random_tree(rng, U, need_down=True)
        _, h = _projected_inputs(rng, U, T)
        down = sorted(tree_split(T)[2])
        P = down[rng.integers(len(down))]
        m, m2 = pairs[rng.integers(len(pairs))]
        v = vanishing_integral(P, T, U.L, *h, m, m2)
        if v:
            return _fail("vanishing", i + 1, {"tree": T.to_json(), "P": P.to_json(), "m": m,
                                              "m2": m2, "value": str(v)}, t0)
    for i in range(split_instances):
        T = random_tree(rng, U, need_down=True)
        _, h = _projected_inputs(rng, U, T)
        down = tree_split(T)[2]
        direct = lambda_form(FormSpec(U, frozenset(down)), *h)
        a, b, c = telescoping_split(T, U.L, *h)
        if a + b + c != direct:
            return _fail("telescoping", instances + i + 1, {
                "tree": T.to_json(), "direct": str(direct), "parts": [str(a), str(b), str(c)]}, t0)
    return CheckResult("vanishing", True, instances + split_instances, None, time.time() - t0)


def check_tree_substitution(rng, U: TileUniverse, instances: int) -> CheckResult:
    t0 = time.time()
    for i in range(instances):
        T = random_tree(rng, U, need_down=True)
        fs, h = _projected_inputs(rng, U, T)
        spec = FormSpec(U, frozenset(tree_split(T)[2]))
        if lambda_form(spec, *fs) != lambda_form(spec, *h):
            return _fail("tree_substitution", i + 1, {"tree": T.to_json(),
                                                      "f": [f.to_json() for f in fs]}, t0)
    return CheckResult("tree_substitution", True, instances, None, time.time() - t0)


def _tree_sums(terms: dict, trees) -> list:
    return [sum((terms[P] for P in T.members), ZERO) for T in trees]


def sparse_function(rng, U: TileUniverse) -> StepFunction:
    """Random values on a random set of measure ``2^-4 .. 1``, scaled by ``2^-j``, ``j < 4``.

    Spreads the tree sizes over several levels of the decomposition.
    """
    E = random_set(rng, U.M, U.r, int(rng.integers(-4, 1)))
    return random_step_function(rng, E).shift_values(-int(rng.integers(0, 4)))


def check_selection_contract(rng, U: TileUniverse, instances: int) -> CheckResult:
    """Remainder size and the global and localized counting bounds for one selection level."""
    t0 = time.time()
    for i in range(instances):
        P = random_convex_set(rng, U, picks=int(rng.integers(2, 8)))
        f = sparse_function(rng, U)
        s = size_sq(P, f, U.L, U)
        k = start_level(s) if s else 0
        sel = select_trees(P, f, k, U.L, universe=U)
        b = counting_bounds(sel.forest, f, k, U.M)
        small = sel.remainder_size_sq <= DyadicRational.pow2(-2 * k - 2)
        if not (small and b["global_ok"] and b["local_ok"]):
            return _fail("selection_contract", i + 1, {
                "P": [Q.to_json() for Q in P], "f": f.to_json(), "k": k,
                "remainder_size_sq": str(sel.remainder_size_sq),
                "sum_IT": str(b["sum_IT"]), "bound": str(b["bound"]),
                "local_witness": b["witness"]}, t0)
    return CheckResult("selection_contract", True, instances, None, time.time() - t0)


def check_decomposition_additivity(rng, U: TileUniverse, instances: int, k_max: int = 12
                                   ) -> CheckResult:
    """``Lambda_P`` equals the sum over every selected tree plus the final remainder."""
    t0 = time.time()
    for i in range(instances):
        P = random_convex_set(rng, U, picks=int(rng.integers(3, 10)))
        fs = [sparse_function(rng, U)] + [random_function(rng, U) for _ in range(2)]
        trace = full_decomposition(P, fs[0], U.L, k_max=k_max, universe=U)
        ev = FormEvaluator(*fs, U.N, U.M)
        direct = ev.value(U.L, P)
        terms = ev.terms(U.L, P)
        pieces = _tree_sums(terms, trace.trees())
        rem = sum((terms[Q] for Q in trace.remainder), ZERO)
        total = sum(pieces, ZERO) + rem
        if not trace.check_partition() or total != direct:
            return _fail("decomposition_additivity", i + 1, {
                "P": [Q.to_json() for Q in P], "f": [f.to_json() for f in fs],
                "direct": str(direct), "sum": str(total)}, t0)
    return CheckResult("decomposition_additivity", True, instances, None, time.time() - t0)


# ---- exceptional sets and the diamond regime ----------------------------------------

@dataclass
class RestrictedInstance:
    universe: TileUniverse
    E: list            # E1, E2, E3 as DyadicSets
    F: object          # ExceptionalSet
    E2_major: DyadicSet
    f: list            # f1, f2, f3 bounded by the indicators, f2 on the major subset
    g: list            # normalized functions
    regime: str        # "triangle", "diamond" or "out-of-regime"


def random_set(rng, M: int, resolution: int, log_measure: int) -> DyadicSet:
    """A random union of ``2^(log_measure + resolution)`` cells."""
    n = 1 << (M + resolution)
    count = 1 << (log_measure + resolution)
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, size=count, replace=False)] = True
    return DyadicSet(mask, resolution, M)


def _scaled(f: StepFunction, e: Fraction) -> StepFunction:
    """``f * 2^e`` for integer ``e``."""
    if e.denominator != 1:
        raise ValueError("normalization is not dyadic; choose set measures accordingly")
    return f.shift_values(int(e))


def diamond_instance(rng, N: int = 3, M: int = 3, L: int = 2, resolution: int = 12,
                     alpha: Fraction = Fraction(1, 4), eps: Fraction = Fraction(1, 12),
                     e1_choices=(-4, 0), e3: int = -12, threshold_exp=10) -> RestrictedInstance:
    """Sets with ``|E3| < |E2|``, ``1 <= |E2| <= 2`` and functions for the diamond argument.

    A small ``threshold_exp`` enlarges the exceptional intervals so that
    several packets per interval survive at desk-sized universes.
    """
    U = TileUniverse(N, M, L, max(resolution, N + L))
    e1 = int(rng.choice(e1_choices))
    e2 = int(rng.integers(0, 2))
    E1 = random_set(rng, M, resolution, e1)
    E2 = random_set(rng, M, resolution, e2)
    E3 = random_set(rng, M, resolution, e3)
    F = exceptional_set([(E1, 2, alpha), (E3, 1 / (1 - eps), 1 - eps)], threshold_exp)
    regime = "diamond" if E3.issubset(F.F) else "out-of-regime"
    E2m = major_subset(E2, F)
    f1 = random_step_function(rng, E1, "signed-dyadic")
    f2 = random_step_function(rng, E2m, "signed-dyadic")
    f3 = random_step_function(rng, E3, "sign")
    g1 = _scaled(f1, -alpha * e1)
    g3 = _scaled(f3, (eps - 1) * e3)
    return RestrictedInstance(U, [E1, E2, E3], F, E2m, [f1, f2, f3], [g1, f2, g3], regime)


def check_multifrequency(rng, instances: int, k_levels: int = 2, collect: list | None = None,
                         **kw) -> CheckResult:
    """``Lambda_T(g1,g2,g3) = Lambda_T(g1,g2,a)`` for every selected tree and ``|p_I| <= N_I``.

    Every generated instance, in regime or not, is appended to ``collect``.
    """
    t0 = time.time()
    done = 0
    largest = 0
    while done < instances:
        inst = diamond_instance(rng, **kw)
        if collect is not None:
            collect.append(inst)
        if inst.regime != "diamond":
            continue
        U = inst.universe
        g1, g2, g3 = inst.g
        P = bitiles_outside(U, inst.F)
        trace = full_decomposition(P, g1, 0, k_max=0, universe=U)
        k0 = trace.levels[0][0]
        trace = full_decomposition(P, g1, 0, k_max=k0 + k_levels - 1, universe=U)
        base = FormEvaluator(g1, g2, g3, U.N, U.M).terms(U.L, P)
        for k, forest, _ in trace.levels:
            mf = multi_frequency_decomposition(forest, g3, inst.F, k, U.L)
            for I, tiles in mf.packets.items():
                largest = max(largest, len(tiles))
                if len(tiles) > mf.counts[I]:
                    return _fail("multifrequency", done + 1, {"interval": list(I),
                                                              "packets": len(tiles),
                                                              "N_I": mf.counts[I]}, t0)
                if parseval_piece(g3, tiles) != mf.pieces[I].norm_sq():
                    return _fail("multifrequency", done + 1, {"interval": list(I),
                                                              "parseval": False}, t0)
            alt = FormEvaluator(g1, g2, mf.a, U.N, U.M).terms(U.L, forest.bitiles())
            for T, lhs, rhs in zip(forest, _tree_sums(base, forest), _tree_sums(alt, forest)):
                if lhs != rhs:
                    return _fail("multifrequency", done + 1, {"tree": T.to_json(), "k": k,
                                                              "lhs": str(lhs), "rhs": str(rhs)}, t0)
        done += 1
    return CheckResult("multifrequency", True, instances, None, time.time() - t0,
                       {"max_packets": largest})


def check_major_subset(inst: RestrictedInstance) -> dict:
    largest = max(E.measure() for E in inst.E)
    F = inst.F.measure()
    E2 = inst.E[1]
    ok_F = F.shift(1) < largest
    ok_major = inst.E2_major.measure().shift(1) >= E2.measure()
    return {"F_measure": str(F), "max_E": str(largest), "F_small": ok_F,
            "E2_major": str(inst.E2_major.measure()), "majority": ok_major,
            "passed": bool(ok_F and ok_major)}


# ---- suites and sweeps --------------------------------------------------------------

def run_identity_suite(config: ExperimentConfig, fault: str | None = None,
                       counts: dict | None = None) -> dict:
    """Run every zero-tolerance identity; ``fault='packet'`` corrupts one packet."""
    rng = np.random.default_rng(config.seed)
    U = config.universe()
    n = config.trials
    counts = {"parseval": n, "tiling": n, "nested": n, "vanishing": n, "split": n,
              "substitution": n, "selection": n, "additivity": n, "multifrequency": max(1, n // 4),
              **(counts or {})}
    corrupt = (0, 0, 1) if fault == "packet" else None
    checks = [check_orthonormality(U.M, min(U.r, 8), corrupt=corrupt)]
    if config.N * config.M > 0:
        checks += [
            check_parseval(rng, U, counts["parseval"]),
            check_tiling_independence(rng, U, counts["tiling"]),
            check_nested_projection(rng, U, counts["nested"]),
            check_vanishing(rng, U, counts["vanishing"], counts["split"]),
            check_tree_substitution(rng, U, counts["substitution"]),
            check_selection_contract(rng, U, counts["selection"]),
            check_decomposition_additivity(rng, U, counts["additivity"]),
        ]
        if counts["multifrequency"]:
            checks.append(check_multifrequency(rng, counts["multifrequency"]))
    return {"config": config.to_json(), "passed": all(c.passed for c in checks),
            "checks": [c.to_json() for c in checks]}


def lp_norm(f: StepFunction, p) -> float:
    return f.norm_p_float(float(p))


def run_uniformity_sweep(config: ExperimentConfig, mode: str = "sign",
                         progress: Callable | None = None) -> dict:
    """Per-L maxima of ``|Lambda_L| / prod ||f_j||_{p_j}`` over random inputs.

    Inputs live on the grain ``2^-N`` and are shared across ``L`` within a
    trial; the packet tables pad them to every dilated resolution.
    """
    if config.mode != "strong":
        raise ValueError("the uniformity sweep needs strong-type exponents")
    rng = np.random.default_rng(config.seed)
    N, M = config.N, config.M
    grain = full_window(M, N)
    rows = {L: [] for L in config.L_values}
    for t in range(config.trials):
        fs = [random_step_function(rng, grain, mode) for _ in range(3)]
        norms = [lp_norm(f, p) for f, p in zip(fs, config.p)]
        # exact ||f||_p^p for integer exponents, for auditing the float denominator
        powers = [f.norm_pow(int(p)).to_json() if float(p).is_integer() else None
                  for f, p in zip(fs, config.p)]
        denom = math.prod(norms)
        ev = FormEvaluator(*fs, N, M)
        for L in config.L_values:
            if denom == 0:
                continue
            v = ev.value(L)
            rows[L].append({"trial": t, "value": v.to_json(), "norm_pow": powers,
                            "ratio_float": abs(float(v)) / denom})
        if progress:
            progress(t)
    maxima = {L: max((r["ratio_float"] for r in rs), default=0.0) for L, rs in rows.items()}
    lo = min(maxima.values())
    growth = max(maxima.values()) / lo if lo > 0 else math.inf
    return {"config": config.to_json(), "input_mode": mode,
            "max_ratio": {str(L): m for L, m in maxima.items()},
            "growth_factor": growth, "rows": {str(L): rs for L, rs in rows.items()}}


def sweep_plot_csv(report: dict) -> str:
    """Per-L ratio columns (one row per trial) for plotting."""
    rows = report["rows"]
    Ls = list(rows)
    by_trial: dict = {}
    for L in Ls:
        for r in rows[L]:
            by_trial.setdefault(r["trial"], {})[L] = r["ratio_float"]
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["trial"] + [f"ratio_L{L}" for L in Ls])
    for t in sorted(by_trial):
        w.writerow([t] + [by_trial[t].get(L, "") for L in Ls])
    w.writerow(["max"] + [report["max_ratio"][L] for L in Ls])
    return buf.getvalue()


def run_restricted_experiment(config: ExperimentConfig, resolution: int = 12) -> dict:
    """Build ``F`` and ``E2'`` and report ``|Lambda_L| prod |E_j|^-alpha_j`` across ``L``."""
    if config.mode != "restricted":
        raise ValueError("the restricted experiment needs alpha exponents")
    rng = np.random.default_rng(config.seed)
    alpha = [Fraction(a) for a in config.alpha]
    eps = Fraction(config.eps)
    records = []
    for t in range(config.trials):
        if alpha[1] < 0:
            inst = diamond_instance(rng, config.N, config.M, config.L_values[0], resolution,
                                    alpha=alpha[0], eps=eps)
        else:
            inst = triangle_instance(rng, config.N, config.M, config.L_values[0], resolution=6)
        major = check_major_subset(inst)
        logs = [E.measure() for E in inst.E]
        scale = math.prod(float(m) ** float(-a) if m else 0.0 for m, a in zip(logs, alpha))
        ev = FormEvaluator(*inst.f, config.N, config.M)
        per_L = {}
        for L in config.L_values:
            v = ev.value(L)
            per_L[str(L)] = {"value": v.to_json(), "statistic": abs(float(v)) * scale}
        records.append({"trial": t, "regime": inst.regime, "major_subset": major,
                        "measures": [str(m) for m in logs], "per_L": per_L})
    return {"config": config.to_json(), "records": records,
            "all_major_ok": all(r["major_subset"]["passed"] for r in records)}


def triangle_instance(rng, N: int = 3, M: int = 3, L: int = 2, resolution: int = 6,
                      logs=(-1, 0, -1)) -> RestrictedInstance:
    """Sets of comparable size with ``|E2|`` maximal; ``F`` from the ``M_2`` thresholds."""
    U = TileUniverse(N, M, L, max(resolution, N + L))
    E = [random_set(rng, M, resolution, e) for e in logs]
    F = exceptional_set([(E[i], 2, Fraction(1, 2)) for i in (0, 2)])
    E2m = major_subset(E[1], F)
    f = [random_step_function(rng, E[0], "signed-dyadic"),
         random_step_function(rng, E2m, "signed-dyadic"),
         random_step_function(rng, E[2], "signed-dyadic")]
    return RestrictedInstance(U, E, F, E2m, f, f, "triangle")


def dump(obj, path: str | None):
    text = json.dumps(obj, indent=2, default=str)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text
