import csv
import io
import json
import tarfile

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import shifted_laplacian_2d
from minrescg.bench import cli
from minrescg.bench import fetch as fetch_mod
from minrescg.bench.experiment import (
    ExperimentSpec,
    make_rhs,
    residual_history_export,
    run_experiment,
    storage_vectors,
)
from minrescg.bench.fetch import KNOWN_MATRICES, MatrixInfo, fetch_matrix, resolve_matrix_id
from minrescg.eigdefl import negative_eigenpairs
from minrescg.errors import FetchError, SpecError
from minrescg.krylov import SolveConfig, minres, minres_cg
from minrescg.precond import ilu0
from minrescg.sparse import SparseSymMatrix, load_matrix_market, save_matrix_market


def write(tmp_path, M, name="a.mtx"):
    path = tmp_path / name
    save_matrix_market(SparseSymMatrix.from_scipy(sp.csr_matrix(np.asarray(M, dtype=float))), path)
    return str(path)


def rows_without_time(path):
    with open(path, newline="") as fh:
        return [r[:-1] for r in csv.reader(fh)]


class TestExperiment:
    def test_identity(self, tmp_path):
        spec = ExperimentSpec(matrix=write(tmp_path, np.eye(10)), solvers=["minres"], preconds=["none"],
                              rhs="ones", cache_dir=str(tmp_path / "cache"))
        (row,), _ = run_experiment(spec)
        assert row.outer == 1 and row.status == "ok" and row.converged
        assert row.n == 10 and row.vectors == 7

    def test_nested_exact_inner(self, tmp_path):
        spec = ExperimentSpec(matrix=write(tmp_path, np.diag([1.0, -2.0, 3.0])), solvers=["minres-cg"],
                              preconds=["ilu0"], inner_tol=1e-12, rel_tol=1e-10, cache_dir=str(tmp_path / "c"))
        (row,), (rep,) = run_experiment(spec)
        assert row.status == "ok" and row.outer <= 2
        assert row.k == 1 and row.vectors == 12
        assert row.total == sum(rep.inner_iters)

    def test_failures_do_not_abort(self, tmp_path):
        A = shifted_laplacian_2d(12, 11, 4)
        path = tmp_path / "lap.mtx"
        save_matrix_market(A, path)
        spec = ExperimentSpec(matrix=str(path), solvers=["minres", "gmres:5", "bicgstab", "minres-cg"],
                              preconds=["none", "ilu0"], max_iters=15, cache_dir=str(tmp_path / "c"))
        rows, reports = run_experiment(spec)
        assert len(rows) == 8
        assert [(r.solver, r.precond) for r in rows] == [(s, p) for s in spec.solvers for p in spec.preconds]
        for r in rows:
            assert r.status in {"ok", "†", "‡", "∗", "setup"}
            assert r.converged == (r.status == "ok")
        assert any(not r.converged for r in rows)

    def test_setup_row_for_failed_preconditioner(self, tmp_path):
        spec = ExperimentSpec(matrix=write(tmp_path, [[0, 1], [1, 0]]), solvers=["minres"],
                              preconds=["ilu0", "none"], cache_dir=str(tmp_path / "c"))
        rows, reports = run_experiment(spec)
        assert rows[0].status == "setup" and "zero pivot" in rows[0].message and reports[0] is None
        assert rows[1].status == "ok"

    def test_deterministic_csv(self, tmp_path):
        A = shifted_laplacian_2d(10, 9, 3)
        path = tmp_path / "lap.mtx"
        save_matrix_market(A, path)
        outs = []
        for i, workers in enumerate((1, 4)):
            out = tmp_path / f"run{i}"
            spec = ExperimentSpec(matrix=str(path), solvers=["minres", "minres-cg", "gmres:10", "bicgstab"],
                                  preconds=["ilu0", "ildlt:1:1e-2"], seed=7, out_dir=str(out), workers=workers,
                                  cache_dir=str(tmp_path / "c"))
            run_experiment(spec)
            outs.append(rows_without_time(out / "results.csv"))
        assert outs[0] == outs[1]
        meta = json.loads((tmp_path / "run0" / "results.json").read_text())
        assert meta["seed"] == 7 and "uniform" in meta["rhs_generator"]
        assert len(list((tmp_path / "run0" / "histories").glob("*.csv"))) == 8

    def test_shift(self, tmp_path):
        spec = ExperimentSpec(matrix=write(tmp_path, np.eye(4), "eye.mtx"), solvers=["minres"], shift=0.5)
        assert spec.label == "eye(sigma=0.5)"

    def test_spec_validation(self):
        with pytest.raises(SpecError):
            ExperimentSpec(matrix="x", solvers=[])
        with pytest.raises(SpecError):
            ExperimentSpec(matrix="x", solvers=["minres"], rel_tol=1.5)
        with pytest.raises(SpecError):
            ExperimentSpec(matrix="x", solvers=["nope"])

    def test_rhs(self, tmp_path):
        assert np.array_equal(make_rhs("random", 5, 3), np.random.default_rng(3).uniform(-1, 1, 5))
        assert np.array_equal(make_rhs("ones", 3, 0), np.ones(3))
        f = tmp_path / "b.txt"
        np.savetxt(f, [1.0, 2.0])
        assert np.array_equal(make_rhs(str(f), 2, 0), [1.0, 2.0])
        with pytest.raises(SpecError):
            make_rhs(str(f), 3, 0)


class TestStorage:
    @pytest.mark.parametrize("solver, k, expected", [
        ("minres", None, 7),
        ("minres-cg", 54, 65),
        ("minres-cg-star", 2, 13),
        ("gmres:120", None, 122),
        ("gmres:20", None, 22),
        ("fgmres:120:120", None, 364),
        ("bicgstab", None, 6),
        ("cg", None, None),
        ("minres-cg", None, None),
    ])
    def test_formulas(self, solver, k, expected):
        assert storage_vectors(solver, k) == expected


class TestHistory:
    def read(self, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iteration_index", "relative_residual"]
        return [(float(a), float(b)) for a, b in rows[1:]]

    def test_identity(self, tmp_path):
        _, rep = minres(SparseSymMatrix.from_scipy(sp.identity(4, format="csr")), None, np.ones(4))
        residual_history_export(rep, tmp_path / "h.csv")
        rows = self.read(tmp_path / "h.csv")
        assert len(rows) == 2
        assert rows[0] == (0.0, 1.0) and rows[1][0] == 1.0 and rows[1][1] <= 1e-5

    def test_nested_indexing(self, tmp_path, rng):
        A = shifted_laplacian_2d(15, 14, 6)
        cfg = SolveConfig(rel_tol=1e-8, inner_tol=1e-3)
        _, rep = minres_cg(A, negative_eigenpairs(A), ilu0(A), rng.uniform(-1, 1, A.n), cfg)
        residual_history_export(rep, tmp_path / "h.csv")
        rows = self.read(tmp_path / "h.csv")
        assert len(rows) == rep.outer_iters + 1
        idx = [r[0] for r in rows]
        assert idx[0] == 0 and all(a < b for a, b in zip(idx, idx[1:]))
        assert idx[-1] <= rep.total_iters

    def test_minres_column_monotone(self, tmp_path):
        A = shifted_laplacian_2d(10, 9, 3)
        _, rep = minres(A, None, np.ones(A.n), SolveConfig(rel_tol=1e-8))
        residual_history_export(rep, tmp_path / "h.csv")
        res = [r[1] for r in self.read(tmp_path / "h.csv")]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(res, res[1:]))


def fake_info(tmp_path):
    M = sp.csr_matrix(np.array([[2.0, 1.0, 0.0], [1.0, 3.0, 0.0], [0.0, 0.0, 4.0]]))
    src = tmp_path / "src.mtx"
    save_matrix_market(SparseSymMatrix.from_scipy(M), src)
    A = load_matrix_market(src)
    return MatrixInfo("HB", "bcsstm10", A.n, A.nnz, 0), src.read_bytes()


class TestFetch:
    def test_unknown_id(self):
        with pytest.raises(FetchError, match="known ids:.*bcsstm10"):
            resolve_matrix_id("not-a-matrix")

    def test_ids_case_insensitive(self):
        assert resolve_matrix_id("PARSEC/SiO").name == "SiO"
        assert KNOWN_MATRICES["nasa1824"].n == 1824

    def test_offline_cold_cache(self, tmp_path):
        with pytest.raises(FetchError, match="offline"):
            fetch_matrix("bcsstm10", tmp_path, offline=True)

    def test_warm_cache_and_tamper(self, tmp_path, monkeypatch):
        info, payload = fake_info(tmp_path)
        monkeypatch.setitem(KNOWN_MATRICES, "bcsstm10", info)
        cache = tmp_path / "cache"
        cache.mkdir()
        (cache / "bcsstm10.mtx").write_bytes(payload)
        p = fetch_matrix("bcsstm10", cache, offline=True)
        assert p == cache / "bcsstm10.mtx"
        assert "bcsstm10" in json.loads((cache / "hashes.json").read_text())
        assert fetch_matrix("bcsstm10", cache, offline=True) == p
        p.write_bytes(payload + b"% trailing comment\n")
        with pytest.raises(FetchError, match="hash"):
            fetch_matrix("bcsstm10", cache, offline=True)

    def test_download_via_mirror(self, tmp_path, monkeypatch):
        info, payload = fake_info(tmp_path)
        monkeypatch.setitem(KNOWN_MATRICES, "bcsstm10", info)
        buf = io.BytesIO()
        with tarfile.open(fileobj=buf, mode="w:gz") as tar:
            ti = tarfile.TarInfo("bcsstm10/bcsstm10.mtx")
            ti.size = len(payload)
            tar.addfile(ti, io.BytesIO(payload))
        urls = []

        class Resp(io.BytesIO):
            def __enter__(self):
                return self

            def __exit__(self, *a):
                return False

        def fake_urlopen(url, timeout=None):
            urls.append(url)
            return Resp(buf.getvalue())

        monkeypatch.setattr(fetch_mod.urllib.request, "urlopen", fake_urlopen)
        monkeypatch.setenv("MINRESCG_MIRROR", "https://mirror.example")
        p = fetch_matrix("bcsstm10", tmp_path / "cache", offline=False)
        assert urls == ["https://mirror.example/MM/HB/bcsstm10.tar.gz"]
        assert load_matrix_market(p).n == 3

    def test_download_shape_mismatch(self, tmp_path, monkeypatch):
        info, payload = fake_info(tmp_path)
        monkeypatch.setitem(KNOWN_MATRICES, "bcsstm10", MatrixInfo("HB", "bcsstm10", 4, info.nnz, 0))
        monkeypatch.setattr(fetch_mod, "_download", lambda i, dest: dest.write_bytes(payload))
        with pytest.raises(FetchError, match="expected n=4"):
            fetch_matrix("bcsstm10", tmp_path / "cache", offline=False)
        assert not (tmp_path / "cache" / "bcsstm10.mtx").exists()

    def test_env_cache_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MINRESCG_CACHE", str(tmp_path))
        assert fetch_mod.default_cache_dir() == tmp_path

    @pytest.mark.network
    def test_real_download(self, tmp_path):
        try:
            p = fetch_matrix("bcsstm10", tmp_path)
        except FetchError as exc:
            pytest.skip(f"collection unreachable: {exc}")
        A = load_matrix_market(p)
        assert A.n == 1086


class TestCli:
    def test_ok(self, tmp_path, capsys):
        m = write(tmp_path, np.eye(10))
        code = cli.main(["solve", "--matrix", m, "--solver", "minres,gmres:5", "--precond", "none",
                         "--out", str(tmp_path / "o"), "--cache-dir", str(tmp_path / "c")])
        assert code == 0
        out = capsys.readouterr().out
        assert "minres" in out and (tmp_path / "o" / "results.csv").exists()

    def test_solver_failure(self, tmp_path):
        A = shifted_laplacian_2d(12, 11, 4)
        save_matrix_market(A, tmp_path / "a.mtx")
        code = cli.main(["solve", "--matrix", str(tmp_path / "a.mtx"), "--solver", "minres", "--precond", "none",
                         "--maxit", "3", "--out", str(tmp_path / "o")])
        assert code == 1

    @pytest.mark.parametrize("argv", [
        ["solve", "--matrix", "missing.mtx", "--solver", "minres", "--out", "o"],
        ["solve", "--matrix", "MAT", "--solver", "bogus", "--out", "o"],
        ["solve", "--matrix", "MAT", "--solver", "minres", "--precond", "ilu0", "--out", "o"],
    ])
    def test_setup_error(self, tmp_path, argv, monkeypatch):
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("MINRESCG_OFFLINE", "1")
        m = write(tmp_path, [[0, 1], [1, 0]])
        argv = [m if a == "MAT" else a for a in argv]
        assert cli.main(argv) == 2

    def test_fetch_offline(self, tmp_path, capsys):
        assert cli.main(["fetch", "bcsstm10", "--offline", "--cache-dir", str(tmp_path)]) == 2
        assert cli.main(["fetch", "unknown", "--cache-dir", str(tmp_path)]) == 2

    def test_storage(self, capsys):
        assert cli.main(["storage", "--solver", "minres-cg,gmres:120,fgmres:120:120", "-k", "54"]) == 0
        out = capsys.readouterr().out.split()
        assert out == ["minres-cg", "65", "gmres:120", "122", "fgmres:120:120", "364"]

    def test_sweep(self, tmp_path, capsys):
        cfg = tmp_path / "s.toml"
        cfg.write_text('grid = "0 500 2 8000 16000 2"\n[synthetic]\nnx = 8\ntarget_negatives = 3\n')
        out = tmp_path / "s.csv"
        assert cli.main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 5
