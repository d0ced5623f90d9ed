"""Seed points, the two-parameter recursion and the backward time tree.

Node conventions (fixed by requiring the independent enumerator and the
node-value identity to agree):

* a node is a word gamma in {1,2}^k, k <= n_levels - 1;
* index(node) = 1 + (number of 2s in the word), level(node) = n_levels - k;
* V(node) = (s, t)_{index}^{level} from the recursion table;
* child-1 time = parent time - r1;
* child-2 time = parent time - r2 - V_2(child-2), so the state-dependent
  delay lands exactly on the child.

The recursion consumes adjacent pairs, so serving index 1 + twos at level
n - k requires n_levels + 1 seed points (the deepest all-2s branch reads the
last one); the table stores n_levels + 2 - k entries at level k.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import mpmath as mp

from ..errors import ConfigError, InputError
from .config import CounterexampleConfig


@dataclass
class SeedTable:
    s: list                       # exact rationals, i = 1..n_levels+1
    t: list
    B: Fraction                   # magnitude bound eps^(2+m) / 4^n_levels

    def mp_pairs(self):
        return [(mp.mpf(si.numerator) / si.denominator,
                 mp.mpf(ti.numerator) / ti.denominator)
                for si, ti in zip(self.s, self.t)]


def seed_points(config: CounterexampleConfig):
    """Deterministic rational seed points below eps^(2+m)/4^n.

    (s_i, t_i) = (i B / (2n), (2i-1) B / (4n)) with n = n_levels and
    i = 1..n+1; coordinates are pairwise distinct and bounded by B by
    construction.
    """
    n = config.n_levels
    B = Fraction(config.eps) ** (2 + config.m) / Fraction(4) ** n
    if B == 0:
        raise ConfigError("seed scale underflowed; reduce T or raise precision")
    s = [Fraction(i, 2 * n) * B for i in range(1, n + 2)]
    t = [Fraction(2 * i - 1, 4 * n) * B for i in range(1, n + 2)]
    assert all(x <= B for x in s) and all(x <= B for x in t)
    return SeedTable(s, t, B)


def st_recursion(seeds: SeedTable, a, xi, eta, n_levels=None):
    """Level table of the pair recursion (s,t)_i^{k+1} = G (s_i^k, t_{i+1}^k).

    Level 0 holds the seeds; level k holds len(seeds) - k pairs; the top
    level (n_levels) holds the root value.  Entries are mpf pairs at the
    ambient working precision.
    """
    pairs = seeds.mp_pairs()
    if n_levels is None:
        n_levels = len(pairs) - 1
    if n_levels + 1 > len(pairs):
        raise InputError("recursion depth exceeds seed count")
    a = mp.mpf(a.numerator) / a.denominator if isinstance(a, Fraction) else mp.mpf(a)
    levels = [pairs]
    for _ in range(n_levels):
        prev = levels[-1]
        nxt = []
        for i in range(len(prev) - 1):
            s, t = prev[i][0], prev[i + 1][1]
            nxt.append((a * (s + xi * t), a * (-s + eta * t)))
        levels.append(nxt)
    return levels


def st_value(levels, level, index):
    """(s_index^level, t_index^level) with 1-based index; InputError outside."""
    if not (0 <= level < len(levels)):
        raise InputError(f"level {level} outside the recursion table")
    row = levels[level]
    if not (1 <= index <= len(row)):
        raise InputError(f"index {index} outside level {level} "
                         f"(has {len(row)} entries)")
    return row[index - 1]


@dataclass
class TreeNode:
    word: tuple
    time: object                  # mpf
    V: tuple                      # (mpf, mpf)
    dV: tuple | None = None

    @property
    def depth(self):
        return len(self.word)

    @property
    def twos(self):
        return sum(1 for g in self.word if g == 2)

    @property
    def ones(self):
        return self.depth - self.twos


@dataclass
class TimeTree:
    config: CounterexampleConfig
    levels: list
    nodes: dict = field(default_factory=dict)   # word -> TreeNode

    def node(self, word):
        return self.nodes[tuple(word)]

    def sorted_nodes(self):
        return sorted(self.nodes.values(), key=lambda nd: nd.time)

    def in_unit_window(self):
        """Nodes with time in (0, r1) -- the trace-carrying nodes."""
        r1 = self.config.r1
        return [nd for nd in self.nodes.values() if 0 < nd.time < r1]


def build_time_tree(config: CounterexampleConfig, levels):
    """Depth-first expansion of the time tree, pruning times <= 0.

    Any node with positive time automatically has depth <= n_levels - 1
    (k * r2 < T), so pruning alone terminates the expansion.
    """
    n = config.n_levels
    with mp.workdps(config.dps):
        root = TreeNode((), mp.mpf(config.T), st_value(levels, n, 1))
        tree = TimeTree(config, levels, {(): root})
        stack = [root]
        while stack:
            nd = stack.pop()
            k = nd.depth
            if k >= n:
                raise ConfigError("tree expansion exceeded n_levels - 1")
            level = n - k - 1
            tw = nd.twos
            t1 = nd.time - config.r1
            if t1 > 0:
                child = TreeNode(nd.word + (1,), t1, st_value(levels, level, 1 + tw))
                tree.nodes[child.word] = child
                stack.append(child)
            v2 = st_value(levels, level, 2 + tw)
            t2 = nd.time - config.r2 - v2[1]
            if t2 > 0:
                child = TreeNode(nd.word + (2,), t2, v2)
                tree.nodes[child.word] = child
                stack.append(child)
    return tree


@dataclass
class DistinctnessReport:
    passed: bool
    min_cross_class_gap: float    # in (0, r1), between different (depth,twos)
    min_gap_global: float
    min_same_class_gap: float
    n_nodes: int
    n_in_window: int
    lattice_dev_constant: float   # max |time - lattice point| / eps^(2+m)
    colliding_pair: tuple | None = None
    required_gap: float = 0.0


def verify_distinct(tree: TimeTree, eps=None):
    """Distinctness certificate for the node times.

    Exact collisions (at working precision) fail outright.  Pairs in (0, r1)
    whose value classes (depth, twos-count) differ must be at least eps/2
    apart; same-class pairs carry equal V by construction and may sit at
    seed-perturbation distance, which is reported but not bounded below.
    """
    cfg = tree.config
    eps = cfg.eps_mp if eps is None else mp.mpf(eps)
    with mp.workdps(cfg.dps):
        coll_tol = mp.mpf(10) ** (-(cfg.dps - 8)) * max(1, abs(cfg.T))
        nodes = tree.sorted_nodes()
        nodes = [nd for nd in nodes if nd.depth >= 1]
        min_global = mp.inf
        min_same = mp.inf
        min_cross = mp.inf
        colliding = None
        r1 = cfg.r1
        for a, b in zip(nodes[:-1], nodes[1:]):
            gap = b.time - a.time
            if gap < min_global:
                min_global = gap
            if gap <= coll_tol and colliding is None:
                colliding = (a.word, b.word)
            same = (a.depth, a.twos) == (b.depth, b.twos)
            in_win = (0 < a.time < r1) and (0 < b.time < r1)
            if same:
                min_same = min(min_same, gap)
            elif in_win:
                min_cross = min(min_cross, gap)
        # measured constant of the lattice-deviation bound
        dev = mp.mpf(0)
        scale = eps ** (2 + cfg.m)
        for nd in nodes:
            lat = cfg.T - nd.ones * cfg.r1 - nd.twos * cfg.r2
            dev = max(dev, abs(nd.time - lat))
        passed = colliding is None and (min_cross == mp.inf or min_cross >= eps / 2)
        return DistinctnessReport(
            passed=bool(passed),
            min_cross_class_gap=float(min_cross) if min_cross != mp.inf else float("inf"),
            min_gap_global=float(min_global) if min_global != mp.inf else float("inf"),
            min_same_class_gap=float(min_same) if min_same != mp.inf else float("inf"),
            n_nodes=len(nodes),
            n_in_window=len(tree.in_unit_window()),
            lattice_dev_constant=float(dev / scale),
            colliding_pair=colliding,
            required_gap=float(eps / 2),
        )


def dv_recursion(tree: TimeTree):
    """Fill the derivative targets: root gets eps (1, 0); the children of a
    node with target dV get (x, 0) and (0, y) with G (x, y)^T = dV.

    The contraction ||dV(child)||_inf <= c ||dV(parent)||_inf is asserted on
    every edge; a violation means the contraction inequality of the
    configuration is numerically broken.
    """
    cfg = tree.config
    with mp.workdps(cfg.dps):
        root = tree.nodes[()]
        root.dV = (cfg.eps_mp, mp.mpf(0))
        order = sorted(tree.nodes.values(), key=lambda nd: nd.depth)
        for nd in order:
            if nd.dV is None:
                raise ConfigError(f"node {nd.word} missed by dV recursion")
            x, y = cfg.G_inverse_apply(nd.dV[0], nd.dV[1])
            parent_norm = max(abs(nd.dV[0]), abs(nd.dV[1]))
            for letter, target in ((1, (x, mp.mpf(0))), (2, (mp.mpf(0), y))):
                child = tree.nodes.get(nd.word + (letter,))
                if child is None:
                    continue
                child.dV = target
                child_norm = max(abs(target[0]), abs(target[1]))
                if child_norm > cfg.c * parent_norm * (1 + mp.mpf(10) ** (-20)):
                    raise ConfigError(
                        f"dV contraction violated on edge {nd.word}->{child.word}: "
                        f"{float(child_norm)} > c * {float(parent_norm)}")
    return tree


def enumerate_words_bruteforce(config: CounterexampleConfig, levels, max_depth):
    """Independent brute-force enumerator of node times (oracle for tests).

    Walks every word in {1,2}^<=max_depth directly from the defining
    subtractions, without the tree machinery.
    """
    out = {}
    with mp.workdps(config.dps):
        def rec(word, time):
            if len(word) >= max_depth:
                return
            t1 = time - config.r1
            if t1 > 0:
                out[word + (1,)] = t1
                rec(word + (1,), t1)
            tw = sum(1 for g in word if g == 2)
            level = config.n_levels - len(word) - 1
            corr = st_value(levels, level, 2 + tw)[1]
            t2 = time - config.r2 - corr
            if t2 > 0:
                out[word + (2,)] = t2
                rec(word + (2,), t2)
        rec((), mp.mpf(config.T))
    return out
