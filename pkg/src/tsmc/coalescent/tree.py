"""Rooted binary time-trees with leaves at height zero.

Canonical numbering: leaves are 0..t-1, internal nodes t..2t-2 sorted by
strictly ascending coalescence height, so the root is always 2t-2 and the
heights vector doubles as the ascending list (h_first, ..., h_root).  All
operations treat trees as immutable and return fresh instances; topology-only
derived data may be memoised on the instance.

A one-leaf tree (no internal nodes) is legal; it is the base case for
insertion and for single-sequence likelihoods.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "CoalTree",
    "NewickNode",
    "branches_alive_at",
    "emit_newick",
    "insert_leaf",
    "lambda_set",
    "parse_newick",
    "remove_leaf",
    "spr_candidates",
    "spr_reattach",
    "subtree_leaves",
    "subtree_nodes",
    "tree_to_newick",
    "two_leaf_tree",
    "with_height",
]


class CoalTree:
    """Parent/child index arrays plus the ascending height vector."""

    __slots__ = ("leaf_count", "parent", "children", "heights", "_memo")

    def __init__(self, leaf_count, parent, children, heights, check=True):
        self.leaf_count = int(leaf_count)
        self.parent = np.asarray(parent, dtype=np.intp)
        self.children = np.asarray(children, dtype=np.intp).reshape(-1, 2)
        self.heights = np.asarray(heights, dtype=float)
        self._memo = {}
        if check:
            self.validate()

    @property
    def node_count(self) -> int:
        return 2 * self.leaf_count - 1

    @property
    def root(self) -> int:
        return self.node_count - 1

    @property
    def root_height(self) -> float:
        return float(self.heights[-1]) if self.leaf_count > 1 else 0.0

    def node_height(self, node: int) -> float:
        t = self.leaf_count
        return 0.0 if node < t else float(self.heights[node - t])

    def validate(self) -> None:
        t = self.leaf_count
        if t < 1:
            raise ValueError("tree needs at least one leaf")
        if self.parent.shape != (2 * t - 1,):
            raise ValueError("parent array has wrong length")
        if self.children.shape != (t - 1, 2):
            raise ValueError("children array has wrong shape")
        if self.heights.shape != (t - 1,):
            raise ValueError("heights vector has wrong length")
        if t == 1:
            if self.parent[0] != -1:
                raise ValueError("single leaf must be the root")
            return
        if np.any(self.heights <= 0.0) or np.any(np.diff(self.heights) <= 0.0):
            raise ValueError("heights must be positive and strictly ascending")
        if self.parent[self.root] != -1:
            raise ValueError("root must have no parent")
        if np.any(self.parent[: self.root] < t):
            raise ValueError("a leaf cannot be a parent")
        for j in range(t - 1):
            node = t + j
            a, b = self.children[j]
            if {int(self.parent[a]), int(self.parent[b])} != {node}:
                raise ValueError("parent/children arrays disagree")
            if self.heights[j] <= max(self.node_height(int(a)), self.node_height(int(b))):
                raise ValueError("internal node not above its children")

    def sibling(self, node: int) -> int:
        p = int(self.parent[node])
        if p < 0:
            raise ValueError("root has no sibling")
        a, b = self.children[p - self.leaf_count]
        return int(b) if int(a) == node else int(a)

    def __repr__(self) -> str:
        return f"CoalTree(t={self.leaf_count}, heights={np.round(self.heights, 4).tolist()})"


def two_leaf_tree(height: float) -> CoalTree:
    return CoalTree(2, [2, 2, -1], [[0, 1]], [height])


def _canonical(leaf_count: int, merges: list) -> CoalTree:
    """Build from (height, child_ref, child_ref) rows; refs are leaf ids or
    negative temp ids (-1-index into ``merges``)."""
    t = leaf_count
    order = sorted(range(len(merges)), key=lambda j: merges[j][0])
    final = {-1 - j: t + rank for rank, j in enumerate(order)}
    parent = np.full(2 * t - 1, -1, dtype=np.intp)
    children = np.zeros((t - 1, 2), dtype=np.intp)
    heights = np.zeros(t - 1)
    for rank, j in enumerate(order):
        h, a, b = merges[j]
        a = final[a] if a < 0 else a
        b = final[b] if b < 0 else b
        node = t + rank
        heights[rank] = h
        children[rank] = (a, b)
        parent[a] = node
        parent[b] = node
    return CoalTree(t, parent, children, heights)


def _merge_rows(tree: CoalTree, relabel=None) -> list:
    """Tree as (height, ref, ref) rows with internal refs as temp ids."""
    t = tree.leaf_count
    rows = []
    for j in range(t - 1):
        a, b = (int(x) for x in tree.children[j])
        a = a if a < t else -1 - (a - t)
        b = b if b < t else -1 - (b - t)
        if relabel is not None:
            a = relabel(a) if a >= 0 else a
            b = relabel(b) if b >= 0 else b
        rows.append((float(tree.heights[j]), a, b))
    return rows


def insert_leaf(tree: CoalTree, g: int, h_new: float) -> CoalTree:
    """Attach leaf t on g's lineage at height h_new (above the root if needed).

    The heights vector gains h_new at its sorted slot; the attachment branch
    is the unique branch of g's ancestry spanning h_new.
    """
    t = tree.leaf_count
    if not 0 <= g < t:
        raise ValueError("lineage leaf out of range")
    if h_new <= 0.0 or (t > 1 and np.any(tree.heights == h_new)):
        raise ValueError("insertion height collides with an existing height")
    new_leaf = t

    def shift(ref):  # leaf ids unchanged, temp ids stay temp
        return ref

    rows = _merge_rows(tree, shift)
    if t == 1 or h_new > tree.root_height:
        anchor = 0 if t == 1 else -1 - (tree.root - t)
        rows.append((h_new, anchor, new_leaf))
        return _canonical(t + 1, rows)
    v = g
    while tree.node_height(int(tree.parent[v])) < h_new:
        v = int(tree.parent[v])
    # v's branch spans h_new: replace v by the new junction in its parent
    ref_v = v if v < t else -1 - (v - t)
    new_ref = -1 - len(rows)
    rows.append((h_new, ref_v, new_leaf))
    p = int(tree.parent[v])
    pj = p - t
    fixed = []
    for j, (h, a, b) in enumerate(rows[: t - 1]):
        if j == pj:
            a = new_ref if a == ref_v else a
            b = new_ref if b == ref_v else b
        fixed.append((h, a, b))
    return _canonical(t + 1, fixed + rows[t - 1 :])


def remove_leaf(tree: CoalTree, leaf: int) -> CoalTree:
    """Delete a leaf and splice out its parent; higher leaf ids shift down."""
    t = tree.leaf_count
    if t < 2:
        raise ValueError("cannot remove the only leaf")
    if not 0 <= leaf < t:
        raise ValueError("leaf out of range")
    if t == 2:
        return CoalTree(1, [-1], np.zeros((0, 2)), [])
    p = int(tree.parent[leaf])
    pj = p - t
    sib = tree.sibling(leaf)

    def ref(x):
        # deleting row pj shifts the temp ids of all later rows down by one
        if x < t:
            return x - 1 if x > leaf else x
        j = x - t
        return -1 - (j if j < pj else j - 1)

    ref_sib = ref(sib)
    rows = []
    for j in range(t - 1):
        if j == pj:
            continue
        h, a, b = float(tree.heights[j]), int(tree.children[j][0]), int(tree.children[j][1])
        a = ref_sib if a == p else ref(a)
        b = ref_sib if b == p else ref(b)
        rows.append((h, a, b))
    return _canonical(t - 1, rows)


def with_height(tree: CoalTree, slot: int, h_new: float) -> CoalTree:
    """Replace the slot-th ascending height; nodes renumber if order changes.

    The caller must keep h_new strictly between the node's children and its
    parent; crossing unrelated heights is legal and only reorders ids.
    """
    rows = _merge_rows(tree)
    h, a, b = rows[slot]
    rows[slot] = (float(h_new), a, b)
    return _canonical(tree.leaf_count, rows)


def subtree_nodes(tree: CoalTree, node: int) -> set[int]:
    t = tree.leaf_count
    out, stack = set(), [node]
    while stack:
        i = stack.pop()
        out.add(i)
        if i >= t:
            stack.extend(int(x) for x in tree.children[i - t])
    return out


def spr_candidates(tree: CoalTree, node: int) -> list[int]:
    """Reattachment branches for pruning `node`: branches of the remainder
    tree (everything outside node's subtree, with node's parent spliced out)
    strictly spanning the detachment height, plus the remainder root's upward
    extension when the detachment height lies above it."""
    t = tree.leaf_count
    p = int(tree.parent[node])
    if p < 0:
        raise ValueError("cannot detach the root")
    h_det = tree.node_height(p)
    banned = subtree_nodes(tree, node)
    out = []
    for x in range(tree.node_count):
        if x == p or x in banned:
            continue
        px = int(tree.parent[x])
        if px == p:
            px = int(tree.parent[p])
        if px < 0:
            if h_det > tree.node_height(x):
                out.append(x)
        elif tree.node_height(x) < h_det < tree.node_height(px):
            out.append(x)
    return out


def spr_reattach(tree: CoalTree, node: int, branch: int) -> CoalTree:
    """Detach `node` (with its subtree) and regraft it onto `branch` at the
    original detachment height.  `branch` must come from spr_candidates."""
    t = tree.leaf_count
    p = int(tree.parent[node])
    h_det = tree.node_height(p)
    pj = p - t
    ref_v = node if node < t else -1 - (node - t)
    ref_c = branch if branch < t else -1 - (branch - t)
    a, b = (int(x) for x in tree.children[pj])
    sib = b if a == node else a
    ref_sib = sib if sib < t else -1 - (sib - t)
    ref_p = -1 - pj
    rows = _merge_rows(tree)
    spliced = []
    for j, (h, ra, rb) in enumerate(rows):
        if j == pj:
            continue
        ra = ref_sib if ra == ref_p else ra
        rb = ref_sib if rb == ref_p else rb
        spliced.append([j, h, ra, rb])
    # the junction reuses p's slot id, so subtree refs stay valid
    rerouted = False
    for row in spliced:
        for k in (2, 3):
            if row[k] == ref_c and not rerouted:
                row[k] = ref_p
                rerouted = True
    out_rows = [None] * (t - 1)
    for j, h, ra, rb in spliced:
        out_rows[j] = (h, ra, rb)
    out_rows[pj] = (h_det, ref_c, ref_v)
    return _canonical(t, out_rows)


def subtree_leaves(tree: CoalTree, node: int) -> list[int]:
    t = tree.leaf_count
    if node < t:
        return [node]
    out, stack = [], [node]
    while stack:
        i = stack.pop()
        if i < t:
            out.append(i)
        else:
            stack.extend(int(x) for x in tree.children[i - t])
    return sorted(out)


def lambda_set(tree: CoalTree, new_leaf: Optional[int] = None) -> list[int]:
    """Leaves sharing the branch the newest leaf attached to: the sibling
    subtree of ``new_leaf`` (default: the highest-numbered leaf)."""
    if new_leaf is None:
        new_leaf = tree.leaf_count - 1
    memo = tree._memo.get(("lambda", new_leaf))
    if memo is None:
        memo = subtree_leaves(tree, tree.sibling(new_leaf))
        tree._memo[("lambda", new_leaf)] = memo
    return memo


def branches_alive_at(tree: CoalTree, h: float, include_root_branch: bool = True):
    """Nodes whose parent branch strictly spans height h.

    The root's upward extension counts as alive above the root height when
    ``include_root_branch`` (it is the only place to reattach there).
    """
    out = []
    for i in range(tree.node_count):
        if i == tree.root:
            if include_root_branch and h > tree.root_height:
                out.append(i)
            continue
        if tree.node_height(i) < h < tree.node_height(int(tree.parent[i])):
            out.append(i)
    return out


# ---------------------------------------------------------------------------
# Newick text form (polytomies allowed; supports in brackets after ')')


@dataclass
class NewickNode:
    name: Optional[str] = None
    length: Optional[float] = None
    support: Optional[float] = None
    children: list["NewickNode"] = field(default_factory=list)

    def leaves(self) -> list[str]:
        if not self.children:
            return [self.name or ""]
        return sorted(n for c in self.children for n in c.leaves())


def emit_newick(node: NewickNode) -> str:
    def fmt(n: NewickNode, at_root: bool) -> str:
        if n.children:
            body = "(" + ",".join(fmt(c, False) for c in n.children) + ")"
            if n.support is not None:
                body += f"[{n.support:.17g}]"
        else:
            body = n.name or ""
        if n.length is not None and not at_root:
            body += f":{n.length:.17g}"
        return body

    return fmt(node, True) + ";"


def parse_newick(text: str) -> NewickNode:
    text = text.strip()
    if not text.endswith(";"):
        raise ValueError("newick text must end with ';'")
    pos = 0

    def parse_node() -> NewickNode:
        nonlocal pos
        node = NewickNode()
        if text[pos] == "(":
            pos += 1
            while True:
                node.children.append(parse_node())
                if text[pos] == ",":
                    pos += 1
                    continue
                if text[pos] == ")":
                    pos += 1
                    break
                raise ValueError(f"unexpected character at column {pos + 1}")
            if text[pos] == "[":
                end = text.index("]", pos)
                node.support = float(text[pos + 1 : end])
                pos = end + 1
        start = pos
        while pos < len(text) and text[pos] not in ",():;[":
            pos += 1
        if pos > start:
            node.name = text[start:pos]
        if pos < len(text) and text[pos] == ":":
            pos += 1
            start = pos
            while pos < len(text) and text[pos] not in ",();":
                pos += 1
            node.length = float(text[start:pos])
        return node

    root = parse_node()
    if text[pos] != ";":
        raise ValueError(f"trailing content at column {pos + 1}")
    return root


def tree_to_newick(tree: CoalTree, names: Optional[list[str]] = None) -> NewickNode:
    t = tree.leaf_count
    if names is None:
        names = [str(i) for i in range(t)]

    def build(i: int) -> NewickNode:
        h = tree.node_height(i)
        p = int(tree.parent[i])
        length = None if p < 0 else tree.node_height(p) - h
        if i < t:
            return NewickNode(name=names[i], length=length)
        kids = [build(int(x)) for x in tree.children[i - t]]
        return NewickNode(length=length, children=kids)

    return build(tree.root)
