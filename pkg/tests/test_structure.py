import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kktschur.errors import InvalidPivotError, StructuralError
from kktschur.generator import assemble_pivot_matrix, nn_jacobian, random_network
from kktschur.sparse import Permutation, SparseMatrix, SymmetricSparse, block_matrix, permute
from kktschur.structure import (DENSE, DIAGONAL, BlockStructure, bipartite_components,
                                bipartite_connected, eliminate_pattern_bruteforce, find_btf,
                                fill_block_pairs, is_irreducible, maximum_matching,
                                pivot_block_structure, pivot_partition_pattern,
                                strongly_connected_components, structured_pivot_permutation,
                                symbolic_fill_1x1, symbolic_fill_2x2, tag_blocks,
                                upper_violations)


def pattern(arr):
    return SparseMatrix.from_dense(np.asarray(arr, dtype=float))


def reach_sccs(m):
    """SCCs via boolean transitive closure: i ~ j iff each reaches the other."""
    n = m.nrows
    adj = m.to_dense().T != 0  # edge j -> i for entry (i, j)
    reach = adj | np.eye(n, dtype=bool)
    for k in range(n):
        reach |= reach[:, [k]] & reach[[k], :]
    both = reach & reach.T
    return {frozenset(np.flatnonzero(both[i]).tolist()) for i in range(n)}


# -- BlockStructure ---------------------------------------------------------------------

def test_block_structure_basics():
    s = BlockStructure.from_sizes([2, 3, 1])
    assert s.dim == 6 and s.nblocks == 3
    assert list(s.sizes) == [2, 3, 1]
    assert s.block_range(1) == (2, 5)
    assert list(s.block_of(np.array([0, 2, 5]))) == [0, 1, 2]
    assert BlockStructure.from_json(s.with_tags({(1, 0): DENSE}).to_json()) == s.with_tags({(1, 0): DENSE})
    with pytest.raises(StructuralError):
        BlockStructure([0, 2, 2])


def test_tag_blocks_rejects_upper_entries():
    m = pattern([[1, 1], [0, 1]])
    with pytest.raises(StructuralError):
        tag_blocks(m, BlockStructure.from_sizes([1, 1]))


# -- structured permutation -------------------------------------------------------------

def test_permutation_examples():
    row, col = structured_pivot_permutation(2)
    assert list(col.one_based()) == [1, 2, 4, 3]
    assert list(row.one_based()) == [3, 4, 2, 1]
    row, col = structured_pivot_permutation(1)
    assert list(col.one_based()) == [1, 2]
    assert list(row.one_based()) == [2, 1]
    row, col = structured_pivot_permutation(0)
    assert row.size == 0 and col.size == 0


@given(st.lists(st.integers(1, 4), min_size=1, max_size=5), st.integers(0, 2**32 - 1))
def test_permuted_pivot_matrix_is_block_lower(sizes, seed):
    r = np.random.default_rng(seed)
    js = BlockStructure.from_sizes(sizes)
    n = js.dim
    blk = js.block_of(np.arange(n))
    mask = (blk[:, None] > blk[None, :]) & (r.random((n, n)) < 0.5)
    rr, cc = np.nonzero(mask)
    J = SparseMatrix.from_coo(n, n, np.r_[rr, np.arange(n)], np.r_[cc, np.arange(n)],
                              np.r_[r.normal(size=rr.size), np.ones(n)])
    w = r.normal(size=(n, n))
    W = SymmetricSparse.from_full(SparseMatrix.from_dense(w + w.T))
    C = assemble_pivot_matrix(W, J).full()
    p_row, p_col = structured_pivot_permutation(n)
    st_ = pivot_block_structure(js)
    assert list(st_.sizes) == sizes + sizes[::-1]
    pc = permute(C, p_row, p_col)
    assert upper_violations(pc, st_) == 0
    # each diagonal block of the permuted matrix is an identity
    dense = pc.to_dense()
    for i in range(st_.nblocks):
        lo, hi = st_.block_range(i)
        assert np.array_equal(dense[lo:hi, lo:hi], np.eye(hi - lo))


def test_lower_triangular_unit_j_dim5(rng):
    J = np.tril(rng.normal(size=(5, 5)), -1) + np.eye(5)
    W = SymmetricSparse.from_full(SparseMatrix.from_dense(np.ones((5, 5))))
    C = assemble_pivot_matrix(W, pattern(J)).full()
    p_row, p_col = structured_pivot_permutation(5)
    d = permute(C, p_row, p_col).to_dense()
    assert np.count_nonzero(np.triu(d, 1)) == 0


# -- matching ---------------------------------------------------------------------------

def test_matching_examples():
    m = maximum_matching(pattern(np.eye(4)))
    assert m.perfect and list(m.col_to_row) == [0, 1, 2, 3]
    assert maximum_matching(pattern(np.ones((2, 2)))).size == 2
    singular = maximum_matching(pattern([[1, 1, 0], [1, 1, 0], [1, 1, 0]]))
    assert singular.size == 2 and singular.deficiency == 1


@pytest.mark.parametrize("seed", range(25))
def test_matching_brute_force(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(2, 8))
    mask = r.random((n, n)) < 0.25
    if seed % 2 == 0:
        mask[r.permutation(n), np.arange(n)] = True  # planted perfect matching
    m = pattern(mask)
    best = max(sum(mask[p[j], j] for j in range(n)) for p in itertools.permutations(range(n)))
    got = maximum_matching(m)
    assert got.size == best
    for j, i in enumerate(got.col_to_row):
        if i >= 0:
            assert mask[i, j]
    if seed % 2 == 0:
        assert got.perfect


# -- SCC / BTF / irreducibility ---------------------------------------------------------

def test_btf_dense_and_diagonal():
    _, _, s = find_btf(pattern(np.ones((4, 4))))
    assert s.nblocks == 1
    _, _, s = find_btf(pattern(np.eye(5)))
    assert list(s.sizes) == [1] * 5


def test_btf_structurally_singular():
    with pytest.raises(StructuralError) as info:
        find_btf(pattern([[1, 1], [0, 0]]))
    assert info.value.deficiency == 1


def test_btf_nn_jacobian_matches_scc_oracle():
    spec = random_network((3, 4, 4, 2), "tanh", seed=2)
    J, _ = nn_jacobian(spec, np.zeros(3))
    p_row, p_col, s = find_btf(J)
    assert upper_violations(permute(J, p_row, p_col), s) == 0
    blocks = {frozenset(p_col.forward[lo:hi].tolist())
              for lo, hi in (s.block_range(i) for i in range(s.nblocks))}
    assert blocks == reach_sccs(J)


@given(st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_btf_upper_part_is_empty(n, seed):
    r = np.random.default_rng(seed)
    mask = (r.random((n, n)) < 0.3) | np.eye(n, dtype=bool)
    mask = mask[r.permutation(n)]
    m = pattern(mask)
    p_row, p_col, s = find_btf(m)
    pm = permute(m, p_row, p_col)
    assert upper_violations(pm, s) == 0
    for i in range(s.nblocks):
        lo, hi = s.block_range(i)
        sub = SparseMatrix.from_dense(pm.to_dense()[lo:hi, lo:hi])
        assert is_irreducible(sub)


def test_btf_order_is_deterministic():
    m = pattern(np.eye(4))
    a = find_btf(m)
    b = find_btf(m)
    assert a[0] == b[0] and a[1] == b[1]
    assert list(a[1].forward) == [0, 1, 2, 3]


def test_scc_count_matches_oracle(rng):
    for _ in range(20):
        n = int(rng.integers(1, 10))
        m = pattern(rng.random((n, n)) < 0.25)
        _, ncomp = strongly_connected_components(m)
        assert ncomp == len(reach_sccs(m))


def test_irreducible_examples():
    assert is_irreducible(pattern([[1, 1], [1, 1]]))
    assert not is_irreducible(pattern([[1, 0], [1, 1]]))


def test_bipartite_examples():
    assert not bipartite_connected(pattern(np.eye(2)))
    assert bipartite_connected(pattern([[1, 0], [1, 1]]))
    assert bipartite_connected(pattern(np.ones((3, 4))))
    assert bipartite_components(pattern([[1, 0, 0], [0, 0, 0]])) == 4


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_connected_b_gives_irreducible(nr, nc, seed):
    r = np.random.default_rng(seed)
    mask = r.random((nr, nc)) < 0.5
    b = pattern(mask)
    m = block_matrix([[SparseMatrix.identity(nc), b.T], [b, SparseMatrix.identity(nr)]])
    assert is_irreducible(m) == bipartite_connected(b)
    _, ncomp = strongly_connected_components(m)
    assert ncomp == bipartite_components(b)


# -- symbolic fill ----------------------------------------------------------------------

def sym(arr):
    return SymmetricSparse.from_full(pattern(arr))


def test_fill_diagonal_pattern_is_empty():
    assert symbolic_fill_1x1(sym(np.eye(4)), 2).count == 0


def test_fill_arrowhead_corner():
    a = np.eye(4)
    a[0, :] = a[:, 0] = 1
    rep = symbolic_fill_1x1(sym(a), 0)
    assert rep.count == 3  # the remaining 3x3 becomes dense
    assert rep.fill == frozenset({(2, 1), (3, 1), (3, 2)})


def test_fill_invalid_pivots():
    with pytest.raises(InvalidPivotError):
        symbolic_fill_1x1(sym([[0, 1], [1, 1]]), 0)
    with pytest.raises(InvalidPivotError):
        symbolic_fill_2x2(sym(np.eye(3)), (0, 1))


def test_fill_2x2_diagonal_e_and_d():
    # D diagonal, E diagonal: the pivot pair touches nothing else
    d = np.eye(4)
    a = np.block([[d, np.eye(4)], [np.eye(4), np.zeros((4, 4))]])
    assert symbolic_fill_2x2(sym(a), (0, 4)).count == 0


@pytest.mark.parametrize("size", [2, 3])
def test_pivot_partition_fill_matches_oracle(size):
    pat, groups, e_blocks = pivot_partition_pattern(size)
    d1, e1 = int(groups["d1"][0]), int(groups["e1"][0])
    existing = {(int(i), int(j)) for i, j in zip(*pat.lower.coo()[:2])}
    one = symbolic_fill_1x1(pat, d1, e_blocks)
    assert set(one.fill) == eliminate_pattern_bruteforce(pat, [d1], rng=1) - existing
    two = symbolic_fill_2x2(pat, (d1, e1), e_blocks)
    assert set(two.fill) == eliminate_pattern_bruteforce(pat, [d1, e1], rng=2) - existing
    last = set(groups["E3"].tolist())
    assert not any(i in last or j in last for i, j in one.fill)
    allowed = {("D2", "D2"), ("E2", "D2"), ("D3", "D2"), ("D3", "E2"), ("D3", "D3")}
    assert fill_block_pairs(two.fill, groups) <= allowed
    assert two.outside > 0


@given(st.integers(2, 12), st.integers(0, 2**32 - 1), st.booleans())
def test_symbolic_fill_equals_bruteforce(n, seed, two_by_two):
    r = np.random.default_rng(seed)
    mask = r.random((n, n)) < 0.35
    mask = mask | mask.T
    np.fill_diagonal(mask, r.random(n) < 0.7)
    p = int(r.integers(n))
    q = int((p + 1 + r.integers(n - 1)) % n)
    mask[p, p] = True
    if two_by_two:
        mask[p, q] = mask[q, p] = True
        # keep the 2x2 pivot generically nonsingular
        mask[q, q] = bool(r.random() < 0.5)
    pat = sym(mask)
    existing = {(int(i), int(j)) for i, j in zip(*pat.lower.coo()[:2])}
    if two_by_two:
        rep = symbolic_fill_2x2(pat, (p, q))
        oracle = eliminate_pattern_bruteforce(pat, [p, q], rng=seed)
    else:
        rep = symbolic_fill_1x1(pat, p)
        oracle = eliminate_pattern_bruteforce(pat, [p], rng=seed)
    assert set(rep.fill) == oracle - existing
    assert not (set(rep.fill) & existing)
