"""Synthetic KKT systems with neural-network constraints.

Variables are split into an "A side" (free variables ``x`` and the
multipliers of the extra constraints ``f``) and a "C side" (network
variables ``z_1, y_1, ..., z_L, y_L`` and the multipliers of the network
equations ``g``).  The network inputs are the first ``n_0`` entries of
``x``.  Every draw comes from one Philox stream keyed by the seed, so a
seed reproduces an instance bit for bit.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError
from .mmio import read_matrix_market, write_matrix_market
from .sparse import SparseMatrix, SymmetricSparse, block_matrix, spmv
from .structure import DENSE, DIAGONAL, BlockStructure, maximum_matching

ACTIVATIONS = ("tanh", "sigmoid", "linear")
BARRIER_RANGE = (1e-2, 1e2)
MAX_DIM = 2000


def make_rng(seed):
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def activate(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if name == "linear":
        return np.array(z, dtype=np.float64, copy=True)
    raise ParameterError(f"unknown activation {name!r}")


def activate_derivative(name, z):
    if name == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if name == "sigmoid":
        s = 1.0 / (1.0 + np.exp(-z))
        return s * (1.0 - s)
    if name == "linear":
        return np.ones_like(np.asarray(z, dtype=np.float64))
    raise ParameterError(f"unknown activation {name!r}")


@dataclass(frozen=True, eq=False)
class NeuralNetSpec:
    """Feed-forward network; ``weights[l]`` maps layer ``l`` to layer ``l + 1``."""

    layer_widths: tuple
    activations: tuple
    weights: tuple
    biases: tuple
    seed: int = 0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2 or min(widths) < 1:
            raise ParameterError("a network needs an input width and at least one layer")
        n_layers = len(widths) - 1
        if len(self.activations) != n_layers or len(self.weights) != n_layers \
                or len(self.biases) != n_layers:
            raise ParameterError("one activation, weight and bias per layer required")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if np.shape(w) != (widths[l + 1], widths[l]) or np.shape(b) != (widths[l + 1],):
                raise DimensionError(f"layer {l + 1} weight/bias shapes do not chain")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ParameterError(f"unknown activation {a!r}")
        object.__setattr__(self, "layer_widths", widths)

    @property
    def n_layers(self):
        return len(self.layer_widths) - 1

    @property
    def n_inputs(self):
        return self.layer_widths[0]

    @property
    def n_outputs(self):
        return self.layer_widths[-1]

    @property
    def n_y(self):
        """Number of network variables (``z_l`` and ``y_l`` for every layer)."""
        return 2 * sum(self.layer_widths[1:])


def random_network(widths, activation="tanh", seed=0, rng=None):
    """Weights and biases uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``."""
    rng = make_rng(seed) if rng is None else rng
    widths = tuple(int(w) for w in widths)
    acts = (activation,) * (len(widths) - 1) if isinstance(activation, str) else tuple(activation)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return NeuralNetSpec(widths, acts, tuple(weights), tuple(biases), int(seed))


def forward_pass(spec, x):
    """Return ``[(z_1, y_1), ..., (z_L, y_L)]``."""
    y = np.asarray(x, dtype=np.float64)
    if y.shape != (spec.n_inputs,):
        raise DimensionError(f"input has shape {y.shape}, expected ({spec.n_inputs},)")
    out = []
    for w, b, act in zip(spec.weights, spec.biases, spec.activations):
        z = w @ y + b
        y = activate(act, z)
        out.append((z, y))
    return out


def _layer_offsets(spec):
    offs = [0]
    for w in spec.layer_widths[1:]:
        offs.append(offs[-1] + w)
        offs.append(offs[-1] + w)
    return np.asarray(offs)


def nn_variables(spec, x):
    """Stack the forward-pass values in variable order ``(z_1, y_1, ..., z_L, y_L)``."""
    return np.concatenate([v for pair in forward_pass(spec, x) for v in pair])


def nn_residual(spec, x, v):
    """Network equations ``(z_l - W_l y_{l-1} - b_l ; y_l - sigma_l(z_l))`` in row order."""
    offs = _layer_offsets(spec)
    y_prev = np.asarray(x, dtype=np.float64)
    parts = []
    for l, (w, b, act) in enumerate(zip(spec.weights, spec.biases, spec.activations)):
        z = v[offs[2 * l]:offs[2 * l + 1]]
        y = v[offs[2 * l + 1]:offs[2 * l + 2]]
        parts.append(z - w @ y_prev - b)
        parts.append(y - activate(act, z))
        y_prev = y
    return np.concatenate(parts)


def nn_jacobian(spec, x):
    """Jacobian of :func:`nn_residual` with respect to the network variables.

    Unit lower triangular with ``-sigma_l'(z_l)`` and ``-W_l`` bands.  The
    block structure has one block per ``z_l`` and per ``y_l``; every
    diagonal block is an identity.
    """
    layers = forward_pass(spec, x)
    offs = _layer_offsets(spec)
    n = int(offs[-1])
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [np.ones(n)]
    tags = {}
    for l, ((z, _), w, act) in enumerate(zip(layers, spec.weights, spec.activations)):
        zr = np.arange(offs[2 * l], offs[2 * l + 1])
        yr = np.arange(offs[2 * l + 1], offs[2 * l + 2])
        rows.append(yr)
        cols.append(zr)
        vals.append(-activate_derivative(act, z))
        tags[(2 * l + 1, 2 * l)] = DIAGONAL
        if l > 0:
            prev = np.arange(offs[2 * l - 1], offs[2 * l])
            rr, cc = np.meshgrid(zr, prev, indexing="ij")
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            vals.append(-w.ravel())
            tags[(2 * l, 2 * l - 1)] = DENSE
    J = SparseMatrix.from_coo(n, n, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
    return J, BlockStructure(offs, tags)


def nn_input_jacobian(spec):
    """Derivative of the network equations with respect to the inputs: ``-W_1`` on the z_1 rows."""
    w = spec.weights[0]
    rr, cc = np.nonzero(np.ones_like(w, dtype=bool))
    return SparseMatrix.from_coo(spec.n_y, spec.n_inputs, rr, cc, -w[rr, cc])


@dataclass(frozen=True, eq=False)
class KKTSystem:
    """Partitioned KKT matrix ``[[A, B^T], [B, C]]`` with ``C = [[W_yy, J^T], [J, 0]]``."""

    A: SymmetricSparse
    B: SparseMatrix
    W_yy: SymmetricSparse
    J: SparseMatrix
    j_structure: BlockStructure
    n_x: int
    m_f: int
    rhs: np.ndarray
    x_true: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_y(self):
        return self.J.nrows

    @property
    def n_A(self):
        return self.A.dim

    @property
    def n_C(self):
        return 2 * self.n_y

    @property
    def dim(self):
        return self.n_A + self.n_C

    @property
    def n(self):
        """Number of primal variables."""
        return self.n_x + self.n_y

    @property
    def m(self):
        """Number of equality constraints."""
        return self.m_f + self.n_y

    def pivot_matrix(self):
        return assemble_pivot_matrix(self.W_yy, self.J)

    def assembled(self):
        """Full matrix as :class:`SymmetricSparse`."""
        lower = block_matrix([[self.A.lower, SparseMatrix.zeros(self.n_A, self.n_C)],
                              [self.B, self.pivot_matrix().lower]])
        return SymmetricSparse(lower)

    def assembled_full(self):
        return self.assembled().full()

    def linking_columns(self):
        return self.B.nonzero_columns()


def assemble_pivot_matrix(W_yy, J):
    n = J.nrows
    if W_yy.dim != n or J.ncols != n:
        raise DimensionError("W_yy and J must both be n_y x n_y")
    lower = block_matrix([[W_yy.lower, SparseMatrix.zeros(n, n)], [J, SparseMatrix.zeros(n, n)]])
    return SymmetricSparse(lower)


def _random_symmetric(rng, n, density, scale, barrier, dominant):
    """Sparse symmetric matrix: random off-diagonal part plus a barrier diagonal."""
    mask = np.tril(rng.random((n, n)) < density, -1)
    ii, jj = np.nonzero(mask)
    off = rng.normal(0.0, scale, size=ii.size)
    diag = barrier.copy()
    diag_noise = rng.normal(0.0, scale, size=n)
    if dominant:
        rowsum = np.zeros(n)
        np.add.at(rowsum, ii, np.abs(off))
        np.add.at(rowsum, jj, np.abs(off))
        diag = diag + rowsum
    else:
        diag = diag + diag_noise
    r = np.concatenate([np.arange(n), ii])
    c = np.concatenate([np.arange(n), jj])
    v = np.concatenate([diag, off])
    return SymmetricSparse.from_coo(n, r, c, v)


def _barrier(rng, n):
    lo, hi = np.log10(BARRIER_RANGE[0]), np.log10(BARRIER_RANGE[1])
    return 10.0 ** rng.uniform(lo, hi, size=n)


def _full_row_rank_pattern(rng, m, n, per_row, max_tries=100):
    for _ in range(max_tries):
        rows, cols = [], []
        for i in range(m):
            k = min(n, per_row)
            cols.append(rng.choice(n, size=k, replace=False))
            rows.append(np.full(k, i))
        r = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
        c = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
        vals = rng.uniform(0.5, 1.5, size=r.size) * rng.choice([-1.0, 1.0], size=r.size)
        mat = SparseMatrix.from_coo(m, n, r, c, vals)
        if maximum_matching(mat.T).size == m:
            return mat
    raise ParameterError("could not draw a structurally full-row-rank constraint Jacobian")


def generate_kkt(spec, n_extra_vars, m_extra_cons, link_density, seed, convex=False,
                 hessian_density=None, hessian_scale=0.5, per_row=3, rng=None):
    """Build a :class:`KKTSystem` around the network ``spec``.

    ``n_extra_vars`` counts all free variables ``x`` (the first ``n_0`` are the
    network inputs).  ``link_density`` sets the density of the optional
    x-y Hessian coupling and of the output columns of the extra constraints;
    ``link_density == 0`` decouples the network entirely (inputs become
    fixed data and ``B`` is empty).  ``convex`` makes the Hessian diagonally
    dominant with a positive diagonal.
    """
    n0 = spec.n_inputs
    n_x, m_f = int(n_extra_vars), int(m_extra_cons)
    if n_x < n0:
        raise ParameterError(f"n_extra_vars={n_x} is smaller than the network input width {n0}")
    if not 0.0 <= link_density <= 1.0:
        raise ParameterError("link_density must lie in [0, 1]")
    if m_f > n_x:
        raise ParameterError("more extra constraints than free variables")
    rng = make_rng(seed) if rng is None else rng
    n_y = spec.n_y
    decoupled = link_density == 0.0

    # network Jacobian at a random input point
    x0 = rng.uniform(-1.0, 1.0, size=n0)
    J, j_structure = nn_jacobian(spec, x0)

    # y-x Hessian coupling: output variables against network inputs
    offs = _layer_offsets(spec)
    out_vars = np.arange(offs[-2], offs[-1])
    if decoupled:
        wyx = SparseMatrix.zeros(n_y, n_x)
    else:
        mask = rng.random((out_vars.size, n0)) < link_density
        rr, cc = np.nonzero(mask)
        wyx = SparseMatrix.from_coo(n_y, n_x, out_vars[rr], cc,
                                    rng.normal(0.0, hessian_scale, size=rr.size))

    hd_x = hessian_density if hessian_density is not None else min(1.0, 2.0 / max(n_x, 1))
    hd_y = hessian_density if hessian_density is not None else min(1.0, 2.0 / max(n_y, 1))
    W_xx = _random_symmetric(rng, n_x, hd_x, hessian_scale, _barrier(rng, n_x), convex)
    W_yy = _random_symmetric(rng, n_y, hd_y, hessian_scale, _barrier(rng, n_y), convex)
    if convex and wyx.nnz:
        # keep the full Hessian diagonally dominant across the x-y coupling
        r, c, v = wyx.coo()
        add_y = np.zeros(n_y)
        add_x = np.zeros(n_x)
        np.add.at(add_y, r, np.abs(v))
        np.add.at(add_x, c, np.abs(v))
        W_yy = SymmetricSparse(_shift_diag(W_yy.lower, add_y))
        W_xx = SymmetricSparse(_shift_diag(W_xx.lower, add_x))

    grad_fx = _full_row_rank_pattern(rng, m_f, n_x, per_row) if m_f else SparseMatrix.zeros(0, n_x)
    # extra constraints that contain network outputs
    if decoupled or m_f == 0:
        grad_fy = SparseMatrix.zeros(m_f, n_y)
    else:
        n_link = max(1, int(round(link_density * m_f)))
        which = np.sort(rng.choice(m_f, size=n_link, replace=False))
        rows, cols = [], []
        for i in which:
            k = max(1, int(round(link_density * out_vars.size)))
            sel = rng.choice(out_vars.size, size=k, replace=False)
            rows.append(np.full(k, i))
            cols.append(out_vars[np.sort(sel)])
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        grad_fy = SparseMatrix.from_coo(m_f, n_y, r, c,
                                        rng.uniform(0.5, 1.5, size=r.size) * rng.choice([-1.0, 1.0], size=r.size))
    grad_xg = SparseMatrix.zeros(n_y, n_x)
    if not decoupled:
        gin = nn_input_jacobian(spec)
        r, c, v = gin.coo()
        grad_xg = SparseMatrix.from_coo(n_y, n_x, r, c, v)

    A = SymmetricSparse(block_matrix([[W_xx.lower, SparseMatrix.zeros(n_x, m_f)],
                                      [grad_fx, SparseMatrix.zeros(m_f, m_f)]]))
    B = block_matrix([[wyx, grad_fy.T], [grad_xg, SparseMatrix.zeros(n_y, m_f)]])

    n_A = n_x + m_f
    x_true = rng.normal(0.0, 1.0, size=n_A + 2 * n_y)
    system = KKTSystem(A, B, W_yy, J, j_structure, n_x, m_f, np.zeros(0), np.zeros(0))
    if system.dim > MAX_DIM:
        raise ParameterError(f"instance dimension {system.dim} exceeds {MAX_DIM}")
    rhs = spmv(system.assembled_full(), x_true)
    meta = {"layer_widths": list(spec.layer_widths), "activations": list(spec.activations),
            "link_density": float(link_density), "convex": bool(convex), "seed": int(seed),
            "x0": x0.tolist()}
    return KKTSystem(A, B, W_yy, J, j_structure, n_x, m_f, rhs, x_true, meta)


def _shift_diag(lower, add):
    n = lower.nrows
    idx = np.arange(n)
    r, c, v = lower.coo()
    return SparseMatrix.from_coo(n, n, np.concatenate([r, idx]), np.concatenate([c, idx]),
                                 np.concatenate([v, add]))


# -- presets ---------------------------------------------------------------------------

SCALES = ("tiny", "small", "medium")
PRESETS = {
    # many inputs, few outputs, dense input stripe in B
    "mnist-like": {
        "activation": "tanh",
        "tiny": ((8, 16, 16, 4), 32, 8),
        "small": ((12, 32, 32, 32, 8), 60, 16),
        "medium": ((24, 96, 96, 96, 96, 10), 160, 40),
    },
    # small A block, pivot matrix dominates
    "scopf-like": {
        "activation": "tanh",
        "tiny": ((8, 16, 16, 6), 20, 10),
        "small": ((10, 40, 40, 10), 40, 20),
        "medium": ((16, 80, 80, 80, 80, 12), 100, 50),
    },
    # large A block, small network
    "lsv-like": {
        "activation": "sigmoid",
        "tiny": ((6, 8, 4), 60, 30),
        "small": ((10, 16, 16, 6), 160, 80),
        "medium": ((16, 32, 32, 32, 8), 600, 300),
    },
    # no linking columns at all: B = 0
    "decoupled": {
        "activation": "tanh",
        "tiny": ((6, 8, 8, 4), 12, 4),
        "small": ((10, 24, 24, 8), 40, 12),
        "medium": ((16, 64, 64, 64, 16), 120, 40),
    },
}
DEFAULT_LINK_DENSITY = 0.1


def instance_presets(name, scale="tiny"):
    """Generator parameters for a named instance family."""
    if name not in PRESETS:
        raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    if scale not in SCALES:
        raise ParameterError(f"unknown scale {scale!r}; choose from {SCALES}")
    p = PRESETS[name]
    widths, n_x, m_f = p[scale]
    params = {"widths": widths, "activation": p["activation"], "n_extra_vars": n_x,
              "m_extra_cons": m_f,
              "link_density": 0.0 if name == "decoupled" else DEFAULT_LINK_DENSITY}
    dim = n_x + m_f + 2 * 2 * sum(widths[1:])
    if dim > MAX_DIM:
        raise ParameterError(f"preset {name}/{scale} has dimension {dim} > {MAX_DIM}")
    params["dim"] = dim
    return params


def generate_preset(name, scale="tiny", seed=0, convex=False, **overrides):
    p = dict(instance_presets(name, scale))
    p.update(overrides)
    rng = make_rng(seed)
    spec = random_network(p["widths"], p["activation"], seed=seed, rng=rng)
    sysm = generate_kkt(spec, p["n_extra_vars"], p["m_extra_cons"], p["link_density"], seed,
                        convex=convex, rng=rng)
    sysm.meta.update({"preset": name, "scale": scale})
    return sysm, spec


# -- on-disk layout ---------------------------------------------------------------------

INSTANCE_FILES = ("M.mtx", "A.mtx", "B.mtx", "W_yy.mtx", "J.mtx", "instance.json")


def write_instance(system, out_dir):
    """Write the six-file instance directory; returns the list of paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, f) for f in INSTANCE_FILES]
    write_matrix_market(paths[0], system.assembled())
    write_matrix_market(paths[1], system.A)
    write_matrix_market(paths[2], system.B)
    write_matrix_market(paths[3], system.W_yy)
    write_matrix_market(paths[4], system.J)
    sidecar = {
        "dims": {"n_x": system.n_x, "m_f": system.m_f, "n_y": system.n_y,
                 "n_A": system.n_A, "n_C": system.n_C, "dim": system.dim,
                 "n": system.n, "m": system.m},
        "j_structure": system.j_structure.to_json(),
        "meta": system.meta,
        "rhs": [float(v) for v in system.rhs],
        "x_true": [float(v) for v in system.x_true],
    }
    with open(paths[5], "w", encoding="ascii", newline="\n") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return paths


def read_instance(in_dir):
    """Load a directory written by :func:`write_instance`."""
    with open(os.path.join(in_dir, "instance.json"), encoding="ascii") as fh:
        side = json.load(fh)
    A = read_matrix_market(os.path.join(in_dir, "A.mtx"))
    B = read_matrix_market(os.path.join(in_dir, "B.mtx"))
    W_yy = read_matrix_market(os.path.join(in_dir, "W_yy.mtx"))
    J = read_matrix_market(os.path.join(in_dir, "J.mtx"))
    dims = side["dims"]
    if not isinstance(A, SymmetricSparse) or not isinstance(W_yy, SymmetricSparse):
        raise DimensionError("A and W_yy must be stored as symmetric Matrix Market files")
    if A.dim != dims["n_A"] or J.nrows != dims["n_y"] or B.shape != (dims["n_C"], dims["n_A"]):
        raise DimensionError("instance sidecar dims disagree with the matrix files")
    return KKTSystem(A, B, W_yy, J, BlockStructure.from_json(side["j_structure"]),
                     int(dims["n_x"]), int(dims["m_f"]), np.asarray(side["rhs"]),
                     np.asarray(side["x_true"]), side.get("meta", {}))
