import json

import numpy as np
import pytest

from sdrkit import __version__
from sdrkit.cli import main, method_params, UsageError
from sdrkit.io import BasisFile, read_csv
from sdrkit.kdr import KernelSpec

from conftest import max_angle


@pytest.fixture
def sim(tmp_path):
    data, truth = tmp_path / "d.csv", tmp_path / "t.json"
    rc = main(["simulate", "--model", "single_index_linear", "--n", "1000", "--d", "6",
               "--seed", "7", "--output", str(data), "--truth", str(truth)])
    assert rc == 0
    return data, truth


def test_fit_eval_pipeline(sim, tmp_path, capsys):
    data, truth = sim
    out = tmp_path / "b.json"
    rc = main(["fit", "--method", "sir", "--input", str(data), "--target", "y", "--dim", "1",
               "--slices", "10", "--output", str(out)])
    assert rc == 0
    assert capsys.readouterr().out.startswith("sir p=1 eigenvalues=")
    assert max_angle(BasisFile.read(out).basis, BasisFile.read(truth).basis) < 0.05
    assert main(["eval", str(out), str(truth)]) == 0
    ang, pf = map(float, capsys.readouterr().out.split())
    assert ang < 0.05 and 0 <= pf < 0.05
    doc = json.loads(out.read_text())
    assert list(doc) == ["d", "p", "method", "basis", "meta"]
    assert doc["meta"]["h"] == "10" and doc["meta"]["seed"] == "0"


@pytest.mark.parametrize("method,extra", [
    ("save", []), ("dr", []), ("pir", []), ("cr", []), ("pfc", []), ("phd", []),
    ("mave", ["--param", "max_iter=5"]), ("kdr", ["--param", "max_iter=5"]),
    ("kdr_hsic", []), ("lad", ["--param", "max_iter=5"]),
    ("cve", ["--param", "max_iter=5"]), ("ukdr", ["--param", "max_iter=5"]),
])
def test_every_method_runs(sim, tmp_path, method, extra):
    data, _ = sim
    out = tmp_path / f"{method}.json"
    rc = main(["fit", "--method", method, "--input", str(data), "--target", "y",
               "--output", str(out)] + extra)
    assert rc == 0
    B = BasisFile.read(out)
    assert B.method == method and B.basis.shape == (6, 1)


def test_fit_missing_target(sim, tmp_path, capsys):
    data, _ = sim
    rc = main(["fit", "--method", "sir", "--input", str(data), "--target", "zz",
               "--output", str(tmp_path / "b.json")])
    assert rc == 3
    err = capsys.readouterr().err
    assert "'zz'" in err and "sdrkit fit" in err


def test_fit_dim_zero(sim, tmp_path):
    data, _ = sim
    assert main(["fit", "--method", "sir", "--input", str(data), "--target", "y",
                 "--dim", "0", "--output", str(tmp_path / "b.json")]) == 2


def test_fit_dim_too_large(sim, tmp_path):
    data, _ = sim
    assert main(["fit", "--method", "sir", "--input", str(data), "--target", "y",
                 "--dim", "7", "--output", str(tmp_path / "b.json")]) == 2


def test_fit_unknown_param(sim, tmp_path):
    data, _ = sim
    assert main(["fit", "--method", "sir", "--input", str(data), "--target", "y",
                 "--param", "bandwidth=2", "--output", str(tmp_path / "b.json")]) == 2


def test_fit_missing_file(tmp_path):
    assert main(["fit", "--method", "sir", "--input", str(tmp_path / "none.csv"),
                 "--target", "y", "--output", str(tmp_path / "b.json")]) == 3


def test_fit_non_numeric_cell_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("x1,x2,y\n1,2,3\n4,abc,5\n")
    assert main(["fit", "--method", "sir", "--input", str(p), "--target", "y",
                 "--output", str(tmp_path / "b.json")]) == 3
    assert ":3:" in capsys.readouterr().err


def test_fit_numerical_error_exit_4(tmp_path, capsys):
    p = tmp_path / "const.csv"
    p.write_text("x1,x2,y\n" + "".join(f"1,{i},{i}\n" for i in range(30)))
    rc = main(["fit", "--method", "sir", "--input", str(p), "--target", "y",
               "--param", "ridge=0", "--output", str(tmp_path / "b.json")])
    assert rc == 4
    assert "numerical error" in capsys.readouterr().err


def test_config_file_overridden_by_param(sim, tmp_path):
    data, _ = sim
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# knobs\nh = 4\nstrategy=equal_width\n")
    out = tmp_path / "b.json"
    assert main(["fit", "--method", "sir", "--input", str(data), "--target", "y",
                 "--config", str(cfg), "--param", "h=6", "--output", str(out)]) == 0
    assert BasisFile.read(out).meta["h"] == "6"


def test_categorical_fit(tmp_path):
    data, truth = tmp_path / "d.csv", tmp_path / "t.json"
    assert main(["simulate", "--model", "classification_two_gaussians", "--n", "600", "--d", "4",
                 "--noise", "0.2", "--output", str(data), "--truth", str(truth)]) == 0
    out = tmp_path / "b.json"
    assert main(["fit", "--method", "save", "--input", str(data), "--target", "y",
                 "--categorical", "--output", str(out)]) == 0
    assert main(["fit", "--method", "sir", "--input", str(data), "--target", "y",
                 "--categorical", "--output", str(out)]) == 0
    assert max_angle(BasisFile.read(out).basis, BasisFile.read(truth).basis) < 0.3


def test_simulate_byte_identical(tmp_path):
    files = []
    for k in range(2):
        d, t = tmp_path / f"d{k}.csv", tmp_path / f"t{k}.json"
        assert main(["simulate", "--model", "single_index_linear", "--n", "100", "--d", "5",
                     "--seed", "7", "--output", str(d), "--truth", str(t)]) == 0
        files.append((d.read_bytes(), t.read_bytes()))
    assert files[0] == files[1]


def test_simulate_noiseless_roundtrip(tmp_path):
    d, t = tmp_path / "d.csv", tmp_path / "t.json"
    assert main(["simulate", "--model", "single_index_linear", "--n", "50", "--d", "3",
                 "--noise", "0", "--output", str(d), "--truth", str(t)]) == 0
    data = read_csv(str(d), "y")
    U = BasisFile.read(t).basis
    np.testing.assert_allclose(data.y, U[:, 0] @ data.X, atol=1e-15)


def test_simulate_bad_dimension(tmp_path):
    assert main(["simulate", "--model", "mean_plus_variance", "--d", "1",
                 "--output", str(tmp_path / "d.csv"), "--truth", str(tmp_path / "t.json")]) == 2


def test_simulate_unknown_model(tmp_path):
    assert main(["simulate", "--model", "cubic"]) == 2


def _basis(tmp_path, name, B):
    p = tmp_path / name
    BasisFile(np.asarray(B, float), "x").write(str(p))
    return str(p)


def test_eval_identical(tmp_path, capsys):
    a = _basis(tmp_path, "a.json", [[0.6], [0.8]])
    assert main(["eval", a, a]) == 0
    assert capsys.readouterr().out.strip() == "0.000000 0.000000"


def test_eval_orthogonal(tmp_path, capsys):
    a = _basis(tmp_path, "a.json", [[1.0], [0.0]])
    b = _basis(tmp_path, "b.json", [[0.0], [1.0]])
    assert main(["eval", a, b]) == 0
    assert capsys.readouterr().out.strip() == "1.570796 1.000000"


def test_eval_corrupted(tmp_path, capsys):
    a = _basis(tmp_path, "a.json", [[1.0], [0.0]])
    bad = tmp_path / "bad.json"
    doc = json.loads(open(a).read())
    doc["basis"] = [[1.0], [0.5]]
    bad.write_text(json.dumps(doc))
    assert main(["eval", str(bad), a]) == 3
    assert "orthonormal" in capsys.readouterr().err


def test_eval_dimension_mismatch(tmp_path):
    a = _basis(tmp_path, "a.json", [[1.0], [0.0]])
    b = _basis(tmp_path, "b.json", [[1.0], [0.0], [0.0]])
    assert main(["eval", a, b]) == 3


def test_eval_extra_key_rejected(tmp_path):
    a = _basis(tmp_path, "a.json", [[1.0], [0.0]])
    doc = json.loads(open(a).read())
    doc["extra"] = 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["eval", str(bad), a]) == 3


def test_basis_roundtrip_digits(rng):
    Q = np.linalg.qr(rng.standard_normal((5, 2)))[0]
    back = BasisFile.loads(BasisFile(Q, "sir", {"seed": 1}).dumps())
    assert np.array_equal(back.basis, Q)
    assert back.meta == {"seed": "1"}


def test_bench_header_only(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["bench", "--methods", "sir", "--model", "quadratic", "--replicates", "0",
                 "--output", str(out)]) == 0
    assert out.read_text() == "method,model,replicate,seed,max_angle,proj_f,seconds,converged\n"


def test_bench_unknown_method(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["bench", "--methods", "sir,magic", "--model", "quadratic",
                 "--output", str(out)]) == 2
    assert not out.exists()


def test_bench_unused_param(tmp_path):
    assert main(["bench", "--methods", "sir", "--model", "quadratic", "--replicates", "1",
                 "--param", "epsilon=0.1", "--output", str(tmp_path / "r.csv")]) == 2


def test_bench_save_beats_sir(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["bench", "--methods", "sir,save", "--model", "quadratic", "--replicates", "20",
                 "--seed", "1", "--output", str(out)]) == 0
    med = {}
    for line in capsys.readouterr().out.splitlines():
        m, _, _, v = line.split()
        med[m] = float(v)
    assert med["save"] < med["sir"]
    assert len(out.read_text().splitlines()) == 41


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_no_command():
    assert main([]) == 2


def test_method_params_translation():
    p = method_params("kdr", {"bandwidth": "1.5", "epsilon": "0.01", "max_iter": "7"})
    assert p["spec"] == KernelSpec("gaussian", 1.5, 0.01)
    assert p["opt_cfg"].max_iter == 7
    assert method_params("sir", {}, slices=5) == {"h": 5}
    assert method_params("cve", {"bandwidth": "2"}) == {"bandwidth_scale": 2.0}
    with pytest.raises(UsageError):
        method_params("sir", {"c": "1"})
    ignored = []
    assert method_params("sir", {"c": "1"}, ignored=ignored) == {}
    assert ignored == ["c"]
