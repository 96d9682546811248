"""Ordered binary trees and chronicles (trees together with their growth order).

A chronicle of ``K`` generations starts from a root with two leaves and, at
every later step, turns one terminal node into a parent of two new leaves.
Node ids are assigned in creation order: the root is ``0`` and step ``j``
creates children ``2j - 1`` (left) and ``2j`` (right).  The node expanded at
step ``j`` carries generation label ``j``.

Chronicles are enumerated by the planar position of the expanded leaf, so the
canonical order is lexicographic in those positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

__all__ = [
    "MAX_ENUMERATION_DEPTH",
    "Node",
    "OrderedTree",
    "Chronicle",
    "ChronicleError",
    "enumerate_chronicles",
    "generation_nodes",
    "leaves",
    "parse_chronicle",
]

MAX_ENUMERATION_DEPTH = 8


class ChronicleError(ValueError):
    """Invalid chronicle, depth or generation index."""


@dataclass(frozen=True)
class Node:
    parent: int | None
    left_child: int | None = None
    right_child: int | None = None
    generation_label: int | None = None

    @property
    def is_terminal(self) -> bool:
        return self.left_child is None


@dataclass(frozen=True)
class OrderedTree:
    """Flat-array binary tree; every parent has an ordered pair of children."""

    nodes: tuple
    root: int = 0

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def internal(self) -> list:
        return [i for i, nd in enumerate(self.nodes) if not nd.is_terminal]

    def planar_leaves(self) -> list:
        """Terminal nodes in left-to-right order."""
        out, stack = [], [self.root]
        while stack:
            i = stack.pop()
            nd = self.nodes[i]
            if nd.is_terminal:
                out.append(i)
            else:
                stack.append(nd.right_child)
                stack.append(nd.left_child)
        return out

    def check(self):
        """Validate child/parent links, labels and the node counts."""
        k = len(self.internal)
        if self.size != 2 * k + 1:
            raise ChronicleError(f"|T| = {self.size} but {k} internal nodes")
        for i, nd in enumerate(self.nodes):
            if (nd.left_child is None) != (nd.right_child is None):
                raise ChronicleError(f"node {i} has exactly one child")
            if nd.is_terminal and nd.generation_label is not None:
                raise ChronicleError(f"terminal node {i} carries a label")
            if not nd.is_terminal:
                if nd.generation_label is None:
                    raise ChronicleError(f"internal node {i} is unlabeled")
                for c in (nd.left_child, nd.right_child):
                    if self.nodes[c].parent != i:
                        raise ChronicleError(f"broken parent link at {c}")
                if nd.parent is not None:
                    if nd.generation_label <= self.nodes[nd.parent].generation_label:
                        raise ChronicleError(f"label at {i} does not exceed its parent's")
        labels = sorted(self.nodes[i].generation_label for i in self.internal)
        if labels != list(range(1, k + 1)):
            raise ChronicleError(f"labels {labels} are not 1..{k}")
        return self

    def to_string(self, node: int | None = None) -> str:
        i = self.root if node is None else node
        nd = self.nodes[i]
        if nd.is_terminal:
            return "."
        return f"({nd.generation_label} {self.to_string(nd.left_child)} {self.to_string(nd.right_child)})"


@dataclass(frozen=True)
class Chronicle:
    """A final ordered tree plus the node expanded at each step."""

    tree: OrderedTree
    expansions: tuple

    @property
    def depth(self) -> int:
        return len(self.expansions)

    @classmethod
    def from_positions(cls, positions) -> "Chronicle":
        """Grow a chronicle from planar leaf positions.

        ``positions[j]`` is the index, in left-to-right order, of the leaf
        expanded at step ``j + 2`` (so it ranges over ``0..j``).
        """
        nodes = [[None, None, None, None]]  # parent, left, right, label
        frontier = [0]
        expansions = []

        def expand(node_id, step):
            left, right = len(nodes), len(nodes) + 1
            nodes.append([node_id, None, None, None])
            nodes.append([node_id, None, None, None])
            nodes[node_id][1:] = [left, right, step]
            expansions.append(node_id)
            return left, right

        frontier = list(expand(0, 1))
        for step, pos in enumerate(positions, start=2):
            if not 0 <= pos < len(frontier):
                raise ChronicleError(f"step {step}: leaf position {pos} out of range")
            left, right = expand(frontier[pos], step)
            frontier[pos:pos + 1] = [left, right]
        tree = OrderedTree(tuple(Node(*nd) for nd in nodes))
        return cls(tree, tuple(expansions))

    @property
    def positions(self) -> tuple:
        """Inverse of :meth:`from_positions`."""
        out = []
        for j in range(2, self.depth + 1):
            frontier = self.tree_at(j - 1).planar_leaves()
            out.append(frontier.index(self.expansions[j - 1]))
        return tuple(out)

    def tree_at(self, j: int) -> OrderedTree:
        """The intermediate tree ``T_j`` (first ``j`` expansions only)."""
        if not 1 <= j <= self.depth:
            raise ChronicleError(f"generation {j} outside 1..{self.depth}")
        keep = set(range(2 * j + 1))
        nodes = []
        for i in range(2 * j + 1):
            nd = self.tree.nodes[i]
            if nd.generation_label is not None and nd.generation_label <= j:
                nodes.append(nd)
            else:
                nodes.append(Node(nd.parent if nd.parent in keep else None))
        return OrderedTree(tuple(nodes))

    def replay(self):
        """Check that every step expands a terminal node of the previous tree."""
        for j in range(2, self.depth + 1):
            prev = self.tree_at(j - 1)
            b = self.expansions[j - 1]
            if b >= prev.size or not prev.nodes[b].is_terminal:
                raise ChronicleError(f"step {j} expands non-terminal node {b}")
        self.tree.check()
        return True

    def to_string(self) -> str:
        return self.tree.to_string()

    def __str__(self):
        return self.to_string()


@lru_cache(maxsize=None)
def _enumerate(k: int) -> tuple:
    ranges = [range(j) for j in range(2, k + 1)]
    return tuple(Chronicle.from_positions(p) for p in product(*ranges))


def enumerate_chronicles(k: int) -> list:
    """All chronicles of ``k`` generations, in canonical order (``k!`` of them)."""
    if int(k) != k or not 1 <= k <= MAX_ENUMERATION_DEPTH:
        raise ChronicleError(f"k must be an integer in 1..{MAX_ENUMERATION_DEPTH}, got {k!r}")
    out = list(_enumerate(int(k)))
    assert len(out) == math.factorial(k)
    return out


def generation_nodes(c: Chronicle, j: int) -> tuple:
    """``(b, b1, b2)``: node expanded at step ``j`` and its ordered children."""
    if not 1 <= j <= c.depth:
        raise ChronicleError(f"generation {j} outside 1..{c.depth}")
    b = c.expansions[j - 1]
    nd = c.tree.nodes[b]
    return b, nd.left_child, nd.right_child


def leaves(c: Chronicle) -> list:
    """Terminal nodes of the final tree in planar order."""
    return c.tree.planar_leaves()


def parse_chronicle(text: str) -> OrderedTree:
    """Parse the ``"(1 (2 . .) .)"`` format back into an :class:`OrderedTree`."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    nodes = []
    pos = 0

    def parse(parent):
        nonlocal pos
        tok = tokens[pos]
        me = len(nodes)
        nodes.append([parent, None, None, None])
        if tok == ".":
            pos += 1
            return me
        if tok != "(":
            raise ChronicleError(f"unexpected token {tok!r}")
        label = int(tokens[pos + 1])
        pos += 2
        left = parse(me)
        right = parse(me)
        if tokens[pos] != ")":
            raise ChronicleError("missing ')'")
        pos += 1
        nodes[me][1:] = [left, right, label]
        return me

    parse(None)
    if pos != len(tokens):
        raise ChronicleError("trailing tokens")
    return OrderedTree(tuple(Node(*nd) for nd in nodes))
