import filecmp
import json

import numpy as np
import pytest

from kktschur.cli import EXIT_IO, EXIT_NUMERIC, EXIT_OK, EXIT_STRUCTURAL, main
from kktschur.generator import INSTANCE_FILES, generate_kkt, random_network, write_instance
from kktschur.mmio import read_matrix_market, write_matrix_market
from kktschur.sparse import SparseMatrix, SymmetricSparse, add
from kktschur.structure import pivot_partition_pattern


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if "--json" in argv else out)


def test_generate_writes_six_files(tmp_path, capsys):
    code, out = run(capsys, "generate", "--preset", "scopf-like", "--seed", "4",
                    "--out", str(tmp_path / "a"), "--json")
    assert code == EXIT_OK
    assert sorted(out["files"]) == sorted(INSTANCE_FILES)
    assert sorted(p.name for p in (tmp_path / "a").iterdir()) == sorted(INSTANCE_FILES)


def test_generate_is_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        assert main(["generate", "--preset", "lsv-like", "--seed", "9", "--out", str(tmp_path / d)]) == 0
    capsys.readouterr()
    for name in INSTANCE_FILES:
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False)


@pytest.mark.parametrize("preset", ["mnist-like", "scopf-like", "lsv-like", "decoupled"])
def test_medium_dimension_bounded(tmp_path, capsys, preset):
    code, out = run(capsys, "generate", "--preset", preset, "--scale", "medium",
                    "--out", str(tmp_path / "m"), "--json")
    assert code == EXIT_OK and out["dims"]["matrix"] <= 2000


def _decoupled_instance(path):
    spec = random_network((3, 6, 5), seed=2)
    s = generate_kkt(spec, 8, 3, 0.0, seed=2)
    write_instance(s, path)
    return s


def test_solve_methods_agree_on_decoupled(tmp_path, capsys):
    s = _decoupled_instance(tmp_path / "d")
    xs = {}
    for method in ("schur", "baseline"):
        code, out = run(capsys, "solve", str(tmp_path / "d"), "--method", method, "--json")
        assert code == EXIT_OK
        assert out["residual"] <= 1e-5 and out["converged"]
        xs[method] = np.loadtxt(out["solution"])
    assert np.max(np.abs(xs["schur"] - xs["baseline"])) <= 1e-9 * np.max(np.abs(xs["baseline"]))
    assert np.max(np.abs(xs["schur"] - s.x_true)) <= 1e-8 * np.max(np.abs(s.x_true))


def test_solve_text_output(tmp_path, capsys):
    _decoupled_instance(tmp_path / "d")
    code, out = run(capsys, "solve", str(tmp_path / "d"), "--out", str(tmp_path / "x.txt"))
    assert code == EXIT_OK and "residual" in out
    assert (tmp_path / "x.txt").exists()


def test_doctored_jacobian_is_structural(tmp_path, capsys):
    s = _decoupled_instance(tmp_path / "d")
    r, c, v = s.J.coo()
    keep = r != 0
    write_matrix_market(str(tmp_path / "d" / "J.mtx"),
                        SparseMatrix.from_coo(s.n_y, s.n_y, r[keep], c[keep], v[keep]))
    code, out = run(capsys, "solve", str(tmp_path / "d"), "--json")
    assert code == EXIT_STRUCTURAL
    assert out["error"]["type"] == "structural"


def test_missing_instance_is_io_error(tmp_path, capsys):
    code, out = run(capsys, "solve", str(tmp_path / "nope"), "--json")
    assert code == EXIT_IO and out["error"]["type"] == "io"


def test_non_convergence_exit_code(tmp_path, capsys):
    _decoupled_instance(tmp_path / "d")
    code, out = run(capsys, "solve", str(tmp_path / "d"), "--tol", "1e-300", "--max-refine", "0", "--json")
    assert code == EXIT_NUMERIC and not out["converged"]


def test_bad_arguments_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["generate", "--preset", "nonsense"])
    assert info.value.code == 2
    capsys.readouterr()


def test_analyze_identity_is_reducible(tmp_path, capsys):
    write_matrix_market(str(tmp_path / "I.mtx"), SparseMatrix.identity(5))
    code, out = run(capsys, "analyze", str(tmp_path / "I.mtx"), "--json")
    assert code == EXIT_OK
    assert out["btf_blocks"] == [1] * 5 and out["irreducible"] is False
    assert out["structural_rank"] == 5
    code, text = run(capsys, "analyze", str(tmp_path / "I.mtx"))
    assert "reducible" in text and "5 blocks" in text


def test_analyze_regularized_pivot_is_irreducible(tmp_path, capsys):
    spec = random_network((3, 4, 4), seed=7)
    s = generate_kkt(spec, 3, 0, 0.1, seed=7)
    n = s.n_y
    C = s.pivot_matrix().full()
    reg = SparseMatrix.from_coo(2 * n, 2 * n, np.arange(n, 2 * n), np.arange(n, 2 * n),
                                np.full(n, 1e-8))
    write_matrix_market(str(tmp_path / "C.mtx"), SymmetricSparse.from_full(add(C, reg)))
    code, out = run(capsys, "analyze", str(tmp_path / "C.mtx"), "--json")
    assert code == EXIT_OK and out["irreducible"] is True and out["btf_blocks"] == [2 * n]


def test_analyze_structurally_singular(tmp_path, capsys):
    write_matrix_market(str(tmp_path / "Z.mtx"),
                        SparseMatrix.from_dense(np.array([[1.0, 1.0], [0.0, 0.0]])))
    code, out = run(capsys, "analyze", str(tmp_path / "Z.mtx"), "--json")
    assert code == EXIT_OK and out["structural_rank"] == 1 and out["btf_blocks"] is None


@pytest.mark.parametrize("size", [2, 3])
def test_analyze_pivot_fill_blocks(tmp_path, capsys, size):
    pat, groups, _ = pivot_partition_pattern(size)
    write_matrix_market(str(tmp_path / "P.mtx"), pat)
    d1, e1 = int(groups["d1"][0]) + 1, int(groups["e1"][0]) + 1
    sizes = ",".join(str(len(groups[g])) for g in ("d1", "e1", "D2", "E2", "D3", "E3"))
    code, out = run(capsys, "analyze", str(tmp_path / "P.mtx"), "--pivot", f"{d1},{e1}",
                    "--pivot", str(d1), "--blocks", sizes, "--json")
    assert code == EXIT_OK
    pair, single = out["fill"]
    assert pair["pivot"] == [d1, e1] and single["pivot"] == [d1]
    # blocks are 1-based lower-triangle coordinates in the given partition
    for a, b in pair["blocks"]:
        assert 1 <= b <= a <= 6
    assert all(1 <= i <= pat.dim and 1 <= j <= pat.dim for i, j in pair["fill"])


def test_analyze_bad_blocks(tmp_path, capsys):
    write_matrix_market(str(tmp_path / "I.mtx"), SparseMatrix.identity(4))
    code, _ = run(capsys, "analyze", str(tmp_path / "I.mtx"), "--pivot", "1", "--blocks", "1,1", "--json")
    assert code == EXIT_STRUCTURAL


def test_bench_command(tmp_path, capsys):
    code, out = run(capsys, "bench", "--preset", "decoupled", "--seeds", "1", "--repetitions", "1",
                    "--out", str(tmp_path / "r.json"), "--json")
    assert code == EXIT_OK
    assert out["rows"][0]["baseline_status"] == "ok"
    assert json.loads((tmp_path / "r.json").read_text())["schema"] == out["schema"]
    code, text = run(capsys, "bench", "--preset", "decoupled", "--seeds", "1", "--repetitions", "1")
    assert "speedup" in text
