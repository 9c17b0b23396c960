"""Symbolic analysis: block triangular forms, graph tests and fill prediction.

Everything here works on sparsity patterns only.  Numeric values are
ignored except that explicit zeros never reach this module (compression
drops them).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, InvalidPivotError, StructuralError
from .sparse import Permutation, SparseMatrix, SymmetricSparse, permute

DIAGONAL = "diagonal"
DENSE = "dense"
SPARSE = "sparse"
DENSE_THRESHOLD = 0.5


@dataclass(frozen=True, eq=False)
class BlockStructure:
    """Diagonal-block boundaries plus a storage tag per nonempty off-diagonal block.

    ``tags`` maps ``(block_row, block_col)`` with ``block_row > block_col`` to
    one of ``"diagonal"``, ``"dense"`` or ``"sparse"``.
    """

    boundaries: np.ndarray
    tags: dict = field(default_factory=dict)

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=np.int64).copy()
        if b.ndim != 1 or b.size < 1 or b[0] != 0 or np.any(np.diff(b) <= 0):
            if not (b.size == 1 and b[0] == 0):
                raise StructuralError(f"invalid block boundaries {b.tolist()}")
        b.flags.writeable = False
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "tags", dict(self.tags))

    @classmethod
    def from_sizes(cls, sizes, tags=None):
        return cls(np.concatenate([[0], np.cumsum(np.asarray(sizes, dtype=np.int64))]),
                   tags or {})

    @property
    def dim(self):
        return int(self.boundaries[-1])

    @property
    def nblocks(self):
        return int(self.boundaries.size - 1)

    @property
    def sizes(self):
        return np.diff(self.boundaries)

    def block_range(self, i):
        return int(self.boundaries[i]), int(self.boundaries[i + 1])

    def block_of(self, idx):
        """Block number of each index in ``idx``."""
        return np.searchsorted(self.boundaries, idx, side="right") - 1

    def with_tags(self, tags):
        return BlockStructure(self.boundaries, tags)

    def to_json(self):
        return {"boundaries": self.boundaries.tolist(),
                "tags": [[int(i), int(j), t] for (i, j), t in sorted(self.tags.items())]}

    @classmethod
    def from_json(cls, obj):
        return cls(np.asarray(obj["boundaries"]),
                   {(int(i), int(j)): t for i, j, t in obj.get("tags", [])})

    def __eq__(self, other):
        return (isinstance(other, BlockStructure)
                and np.array_equal(self.boundaries, other.boundaries)
                and self.tags == other.tags)

    __hash__ = None

    def __repr__(self):
        return f"BlockStructure(sizes={self.sizes.tolist()}, tagged={len(self.tags)})"


def classify_block(blk, dense_threshold=DENSE_THRESHOLD):
    """Storage tag for one off-diagonal block given as a SparseMatrix."""
    r, c, _ = blk.coo()
    if blk.nrows == blk.ncols and np.all(r == c):
        return DIAGONAL
    if blk.nnz >= dense_threshold * blk.nrows * blk.ncols:
        return DENSE
    return SPARSE


def upper_violations(m, structure):
    """Number of entries of ``m`` lying strictly above the block diagonal."""
    r, c, _ = m.coo()
    return int(np.count_nonzero(structure.block_of(c) > structure.block_of(r)))


def tag_blocks(m, structure, dense_hint=(), dense_threshold=DENSE_THRESHOLD):
    """Tag every nonempty strictly-lower block of an already permuted matrix.

    Blocks listed in ``dense_hint`` are tagged dense regardless of density.
    Raises :class:`StructuralError` if ``m`` is not block lower triangular.
    """
    if m.nrows != structure.dim or m.ncols != structure.dim:
        raise DimensionError(f"matrix {m.shape} does not match structure of dim {structure.dim}")
    bad = upper_violations(m, structure)
    if bad:
        raise StructuralError(f"{bad} entries above the block diagonal")
    r, c, _ = m.coo()
    br, bc = structure.block_of(r), structure.block_of(c)
    hints = set(map(tuple, dense_hint))
    tags = {}
    for i, j in sorted(set(zip(br[br > bc].tolist(), bc[br > bc].tolist()))):
        if (i, j) in hints:
            tags[(i, j)] = DENSE
            continue
        r0, r1 = structure.block_range(i)
        c0, c1 = structure.block_range(j)
        sel = (br == i) & (bc == j)
        blk = SparseMatrix.from_coo(r1 - r0, c1 - c0, r[sel] - r0, c[sel] - c0, np.ones(int(sel.sum())))
        tags[(i, j)] = classify_block(blk, dense_threshold)
    return structure.with_tags(tags)


def structured_pivot_permutation(n_y):
    """Row and column permutations taking ``[[W, J^T], [J, 0]]`` to block lower form.

    Columns keep the ``y`` block and reverse the multiplier block; rows
    take the ``J`` rows first and then the ``W``/``J^T`` rows reversed.
    """
    if n_y < 0:
        raise ValueError("n_y must be nonnegative")
    head = np.arange(n_y)
    col = np.concatenate([head, np.arange(2 * n_y - 1, n_y - 1, -1)])
    row = np.concatenate([np.arange(n_y, 2 * n_y), np.arange(n_y - 1, -1, -1)])
    return Permutation(row), Permutation(col)


def pivot_block_structure(j_structure):
    """Block sizes of the permuted pivot matrix: J's blocks, then J^T's reversed."""
    sizes = j_structure.sizes
    return BlockStructure.from_sizes(np.concatenate([sizes, sizes[::-1]]))


class Matching(NamedTuple):
    """``col_to_row[j]`` is the row matched to column ``j`` or -1."""

    col_to_row: np.ndarray
    size: int

    @property
    def deficiency(self):
        return int(self.col_to_row.size - self.size)

    @property
    def perfect(self):
        return self.deficiency == 0


def maximum_matching(m):
    """Maximum-cardinality row/column matching by augmenting paths."""
    n_rows, n_cols = m.nrows, m.ncols
    indptr, indices = m.indptr, m.indices
    col_to_row = np.full(n_cols, -1, dtype=np.int64)
    row_to_col = np.full(n_rows, -1, dtype=np.int64)
    # cheap pass: first free row in each column
    for j in range(n_cols):
        for i in indices[indptr[j]:indptr[j + 1]]:
            if row_to_col[i] < 0:
                row_to_col[i] = j
                col_to_row[j] = i
                break
    stamp = np.full(n_rows, -1, dtype=np.int64)
    for root in range(n_cols):
        if col_to_row[root] >= 0:
            continue
        # iterative DFS over alternating paths; stack holds (column, next edge pos)
        stack = [[root, int(indptr[root])]]
        parent_row = []
        found = False
        while stack:
            top = stack[-1]
            j, pos = top
            if pos >= indptr[j + 1]:
                stack.pop()
                if parent_row:
                    parent_row.pop()
                continue
            top[1] = pos + 1
            i = int(indices[pos])
            if stamp[i] == root:
                continue
            stamp[i] = root
            if row_to_col[i] < 0:
                parent_row.append(i)
                found = True
                break
            parent_row.append(i)
            nxt = int(row_to_col[i])
            stack.append([nxt, int(indptr[nxt])])
        if found:
            for (j, _), i in zip(stack, parent_row):
                col_to_row[j] = i
                row_to_col[i] = j
    return Matching(col_to_row, int(np.count_nonzero(col_to_row >= 0)))


def _adjacency(m):
    """Out-neighbours per node for the directed graph of a square pattern (row -> col)."""
    r, c, _ = m.coo()
    off = r != c
    r, c = r[off], c[off]
    order = np.lexsort((c, r))
    r, c = r[order], c[order]
    ptr = np.zeros(m.nrows + 1, dtype=np.int64)
    np.cumsum(np.bincount(r, minlength=m.nrows), out=ptr[1:])
    return ptr, c


def strongly_connected_components(m):
    """Tarjan's algorithm (iterative).  Returns a component label per node."""
    n = m.nrows
    ptr, adj = _adjacency(m)
    index = np.full(n, -1, dtype=np.int64)
    low = np.zeros(n, dtype=np.int64)
    on_stack = np.zeros(n, dtype=bool)
    label = np.full(n, -1, dtype=np.int64)
    stack = []
    counter = 0
    ncomp = 0
    for root in range(n):
        if index[root] >= 0:
            continue
        work = [(root, int(ptr[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            if pos < ptr[v + 1]:
                work[-1] = (v, pos + 1)
                w = int(adj[pos])
                if index[w] < 0:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, int(ptr[w])))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    label[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
    return label, ncomp


def is_irreducible(m):
    """True iff the directed graph of square ``m`` is strongly connected."""
    if m.nrows != m.ncols:
        raise DimensionError("irreducibility needs a square matrix")
    if m.nrows == 0:
        return True
    _, ncomp = strongly_connected_components(m)
    return ncomp == 1


def _block_order(m, label, ncomp):
    """Topological order of components: dependencies first, lowest index on ties."""
    r, c, _ = m.coo()
    lr, lc = label[r], label[c]
    cross = lr != lc
    # row component depends on column component
    deps = [set() for _ in range(ncomp)]
    users = [set() for _ in range(ncomp)]
    for a, b in zip(lr[cross].tolist(), lc[cross].tolist()):
        deps[a].add(b)
        users[b].add(a)
    first = np.full(ncomp, np.iinfo(np.int64).max)
    np.minimum.at(first, label, np.arange(label.size))
    remaining = [len(d) for d in deps]
    heap = [(int(first[k]), k) for k in range(ncomp) if remaining[k] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, k = heapq.heappop(heap)
        order.append(k)
        for u in users[k]:
            remaining[u] -= 1
            if remaining[u] == 0:
                heapq.heappush(heap, (int(first[u]), u))
    return order


def find_btf(m):
    """Block lower triangular form ``P m Q`` with irreducible diagonal blocks."""
    if m.nrows != m.ncols:
        raise DimensionError("block triangular form needs a square matrix")
    n = m.nrows
    match = maximum_matching(m)
    if not match.perfect:
        raise StructuralError(
            f"structurally singular: matching deficiency {match.deficiency}", match.deficiency)
    rowperm = Permutation(match.col_to_row)
    matched = permute(m, rowperm, Permutation.identity(n))
    label, ncomp = strongly_connected_components(matched)
    order = _block_order(matched, label, ncomp)
    cols = []
    sizes = []
    for k in order:
        members = np.flatnonzero(label == k)
        cols.append(members)
        sizes.append(members.size)
    col_fwd = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    p_col = Permutation(col_fwd)
    p_row = Permutation(match.col_to_row[col_fwd])
    structure = BlockStructure.from_sizes(sizes)
    structure = tag_blocks(permute(m, p_row, p_col), structure)
    return p_row, p_col, structure


def bipartite_components(b):
    """Connected components of the row/column bipartite graph (isolated nodes count)."""
    parent = list(range(b.nrows + b.ncols))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    r, c, _ = b.coo()
    for i, j in zip(r.tolist(), c.tolist()):
        a, z = find(i), find(b.nrows + j)
        if a != z:
            parent[max(a, z)] = min(a, z)
    return len({find(x) for x in range(b.nrows + b.ncols)})


def bipartite_connected(b):
    """True iff rows and columns of ``b`` form a single connected bipartite graph."""
    if b.nrows + b.ncols == 0:
        return False
    return bipartite_components(b) == 1


# -- symbolic fill --------------------------------------------------------------


@dataclass(frozen=True)
class FillReport:
    """Fill produced by one symbolic pivot step.

    ``fill`` holds lower-triangle positions ``(i, j)`` with ``i >= j``;
    ``input_nnz`` is the lower-triangle nnz of the input pattern.
    """

    input_nnz: int
    fill: frozenset
    inside: int
    outside: int

    @property
    def count(self):
        return len(self.fill)

    def to_json(self):
        return {"input_nnz": self.input_nnz, "fill_count": self.count,
                "inside_diagonal_blocks": self.inside, "outside_diagonal_blocks": self.outside,
                "fill": sorted([int(i), int(j)] for i, j in self.fill)}


def _full_pattern(pattern):
    if isinstance(pattern, SymmetricSparse):
        pattern = pattern.full()
    if pattern.nrows != pattern.ncols:
        raise DimensionError("fill analysis needs a square symmetric pattern")
    r, c, _ = pattern.coo()
    pos = set(zip(r.tolist(), c.tolist())) | set(zip(c.tolist(), r.tolist()))
    nbrs = [set() for _ in range(pattern.nrows)]
    for i, j in pos:
        nbrs[j].add(i)
    return pos, nbrs


def _report(pos, new, diag_blocks):
    lower_new = {(max(i, j), min(i, j)) for i, j in new if (i, j) not in pos}
    inside = 0
    blocks = [(set(rows), set(cols)) for rows, cols in (diag_blocks or ())]
    for i, j in lower_new:
        if any((i in rs and j in cs) or (j in rs and i in cs) for rs, cs in blocks):
            inside += 1
    nnz = sum(1 for i, j in pos if i >= j)
    return FillReport(nnz, frozenset(lower_new), inside, len(lower_new) - inside)


def symbolic_fill_1x1(pattern, pivot, diag_blocks=None):
    """Fill from eliminating ``pivot`` with a 1x1 pivot (no cancellation assumed).

    ``diag_blocks`` is an optional list of ``(row_indices, col_indices)``
    rectangles; fill inside any of them (or their transposes) counts as inside.
    """
    pos, nbrs = _full_pattern(pattern)
    if (pivot, pivot) not in pos:
        raise InvalidPivotError(f"diagonal entry ({pivot}, {pivot}) is structurally zero")
    touched = sorted(nbrs[pivot] - {pivot})
    new = {(i, j) for i in touched for j in touched}
    return _report(pos, new, diag_blocks)


def symbolic_fill_2x2(pattern, pivot_pair, diag_blocks=None):
    """Fill from a 2x2 pivot on ``(p, q)``; the (q, p) entry must be nonzero.

    The pivot inverse pattern follows from the 2x2 block itself: its (p, p)
    entry is nonzero only if (q, q) is, and vice versa.
    """
    p, q = pivot_pair
    pos, nbrs = _full_pattern(pattern)
    if p == q or (q, p) not in pos:
        raise InvalidPivotError(f"off-diagonal pivot entry ({q}, {p}) is structurally zero")
    inv = {(p, p): (q, q) in pos, (q, q): (p, p) in pos, (p, q): True, (q, p): True}
    rest = {p, q}
    np_ = nbrs[p] - rest
    nq = nbrs[q] - rest
    side = {p: np_, q: nq}
    new = set()
    for (s, t), nz in inv.items():
        if nz:
            new.update((i, j) for i in side[s] for j in side[t])
    return _report(pos, new, diag_blocks)


def eliminate_pattern_bruteforce(pattern, pivots, rng=None):
    """Pattern of the Schur complement after eliminating ``pivots`` numerically.

    Random generic values are placed on the pattern and the complement is
    formed with a dense solve, so the result is independent of the symbolic
    rules above.  Returns lower-triangle positions in original numbering.
    """
    rng = np.random.default_rng(rng)
    full = pattern.full() if isinstance(pattern, SymmetricSparse) else pattern
    n = full.nrows
    r, c, _ = full.coo()
    vals = rng.uniform(1.0, 2.0, size=r.size) * rng.choice([-1.0, 1.0], size=r.size)
    a = np.zeros((n, n))
    a[r, c] = vals
    a = np.tril(a) + np.tril(a, -1).T
    piv = list(pivots)
    rest = [i for i in range(n) if i not in piv]
    s = a[np.ix_(rest, rest)] - a[np.ix_(rest, piv)] @ np.linalg.solve(
        a[np.ix_(piv, piv)], a[np.ix_(piv, rest)])
    scale = max(1.0, float(np.max(np.abs(a))))
    out = set()
    for ii, i in enumerate(rest):
        for jj, j in enumerate(rest):
            if i >= j and abs(s[ii, jj]) > 1e-12 * scale:
                out.add((i, j))
    return out


# -- the partitioned pivot-matrix fixture ----------------------------------------------

PIVOT_GROUPS = ("d1", "e1", "D2", "E2", "D3", "E3")
_SHOWN_BLOCKS = (
    ("d1", "d1"), ("e1", "d1"), ("D2", "d1"), ("E2", "d1"), ("D3", "d1"),
    ("D2", "e1"), ("D3", "e1"),
    ("D2", "D2"), ("E2", "D2"), ("D3", "D2"), ("D3", "E2"), ("D3", "D3"), ("E3", "D3"),
)
_DIAG_D = {("D2", "D2"), ("D3", "D3")}


def pivot_partition_pattern(size, diag_d_blocks="diagonal", density=None, rng=None):
    """Pattern of the symmetrically permuted pivot matrix around a (d, e) pivot pair.

    ``size`` is the order of each diagonal block of E: the block holding the
    pivot is ``e11`` plus ``size - 1`` further rows, the trailing block has
    ``size`` rows, so the matrix has dimension ``4 * size``.  Shown blocks are
    dense except D22 and D33, which are diagonal when ``diag_d_blocks`` is
    ``"diagonal"``.  With ``density`` set, every shown block is instead a
    random pattern of that density (``d11`` and ``e11`` always present).

    Returns ``(SymmetricSparse, groups, e_blocks)`` where ``groups`` maps
    group names to index arrays and ``e_blocks`` lists E's diagonal blocks as
    ``(rows, cols)`` for :class:`FillReport` accounting.
    """
    if size < 2:
        raise ValueError("block size must be at least 2")
    sizes = {"d1": 1, "e1": 1, "D2": size - 1, "E2": size - 1, "D3": size, "E3": size}
    groups = {}
    off = 0
    for g in PIVOT_GROUPS:
        groups[g] = np.arange(off, off + sizes[g])
        off += sizes[g]
    rng = np.random.default_rng(rng)
    rows, cols = [], []
    for gi, gj in _SHOWN_BLOCKS:
        ri, cj = groups[gi], groups[gj]
        if density is not None and (gi, gj) not in (("d1", "d1"), ("e1", "d1")):
            mask = rng.random((ri.size, cj.size)) < density
        elif (gi, gj) in _DIAG_D and diag_d_blocks == "diagonal":
            mask = np.eye(ri.size, dtype=bool)
        else:
            mask = np.ones((ri.size, cj.size), dtype=bool)
        if gi == gj:
            mask = np.tril(mask | mask.T)
        ii, jj = np.nonzero(mask)
        rows.append(ri[ii])
        cols.append(cj[jj])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    pattern = SymmetricSparse.from_coo(off, r, c, np.ones(r.size))
    e_blocks = [(np.concatenate([groups["e1"], groups["E2"]]),
                 np.concatenate([groups["d1"], groups["D2"]])),
                (groups["E3"], groups["D3"])]
    return pattern, groups, e_blocks


def fill_block_pairs(fill, groups):
    """Unordered group-name pairs touched by a set of fill positions."""
    owner = {}
    for name, idx in groups.items():
        for i in np.asarray(idx).tolist():
            owner[i] = name
    rank = {g: k for k, g in enumerate(PIVOT_GROUPS)}
    out = set()
    for i, j in fill:
        a, b = owner[i], owner[j]
        out.add((a, b) if rank.get(a, 0) >= rank.get(b, 0) else (b, a))
    return out
