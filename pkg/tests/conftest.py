import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sparse(rng, nrows, ncols, density=0.3):
    from kktschur.sparse import SparseMatrix
    mask = rng.random((nrows, ncols)) < density
    r, c = np.nonzero(mask)
    return SparseMatrix.from_coo(nrows, ncols, r, c, rng.normal(size=r.size))


def random_block_lower(rng, sizes, density=0.5, identity_prob=0.3, dense_prob=0.3):
    """Random block lower triangular matrix with well-conditioned diagonal blocks."""
    from kktschur.sparse import SparseMatrix
    from kktschur.structure import BlockStructure
    st = BlockStructure.from_sizes(sizes)
    n = st.dim
    a = np.zeros((n, n))
    for i in range(st.nblocks):
        lo, hi = st.block_range(i)
        k = hi - lo
        if rng.random() < identity_prob:
            a[lo:hi, lo:hi] = np.eye(k)
        else:
            a[lo:hi, lo:hi] = rng.normal(size=(k, k)) + 3 * np.sqrt(k) * np.eye(k)
        for j in range(i):
            c0, c1 = st.block_range(j)
            if rng.random() < dense_prob:
                a[lo:hi, c0:c1] = rng.normal(size=(k, c1 - c0))
            else:
                mask = rng.random((k, c1 - c0)) < density * 0.3
                a[lo:hi, c0:c1] = np.where(mask, rng.normal(size=mask.shape), 0.0)
    return SparseMatrix.from_dense(a), st


def small_instance(seed, max_dim=300, convex=False, hessian_scale=None):
    """Random generated KKT system with dimension at most ``max_dim``."""
    from kktschur.generator import generate_kkt, random_network
    rng = np.random.default_rng(seed)
    while True:
        n_layers = int(rng.integers(1, 4))
        widths = [int(rng.integers(1, 9))] + [int(rng.integers(1, 12)) for _ in range(n_layers)]
        n_x = widths[0] + int(rng.integers(0, 30))
        m_f = int(rng.integers(0, n_x + 1))
        dim = n_x + m_f + 4 * sum(widths[1:])
        if dim <= max_dim:
            break
    act = ["tanh", "sigmoid", "linear"][int(rng.integers(3))]
    link = float(rng.choice([0.0, 0.05, 0.2, 0.6]))
    hs = float(rng.choice([0.5, 2.0])) if hessian_scale is None else hessian_scale
    spec = random_network(widths, act, seed=seed)
    return generate_kkt(spec, n_x, m_f, link, seed=seed, convex=convex, hessian_scale=hs)


def reference_inertia(M):
    """Oracle inertia, or an eigvalsh count at pivot precision when an eigenvalue
    falls between the oracle's zero threshold and the pivot threshold."""
    from kktschur.kernels import Inertia, inertia_oracle
    M = M.to_dense() if hasattr(M, "to_dense") else np.asarray(M)
    ref = inertia_oracle(M)
    if ref.n_zero == 0:
        return ref
    e = np.linalg.eigvalsh(M)
    tol = 1e-13 * np.max(np.abs(e))
    return Inertia(int(np.sum(e > tol)), int(np.sum(e < -tol)), int(np.sum(np.abs(e) <= tol)))


ACCEPTANCE = {}


@pytest.fixture
def acceptance_log():
    """Record ``(criterion, passed, detail)`` for the end-of-run summary."""
    def record(n, ok, detail):
        ACCEPTANCE[n] = (bool(ok), detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
