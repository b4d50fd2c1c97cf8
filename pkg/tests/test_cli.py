import io
import subprocess
import sys

import numpy as np
import pytest

from rootiter import linalg
from rootiter.cli import EXIT_DIVERGED, EXIT_OK, EXIT_USAGE, main


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


@pytest.fixture
def mtx(tmp_path):
    def write(A, name="a.mtx"):
        path = tmp_path / name
        linalg.write_matrix_market(A, path)
        return str(path)
    return write


def test_root_identity(mtx, tmp_path):
    out = tmp_path / "y.mtx"
    inv = tmp_path / "z.mtx"
    code, text = run("root", "--p", "3", "--in", mtx(np.eye(4)), "--out", str(out),
                     "--out-inverse", str(inv))
    assert code == EXIT_OK
    assert text.startswith("k,alpha,residual_inf,mode")
    assert np.allclose(linalg.read_matrix_market(out), np.eye(4))
    assert np.allclose(linalg.read_matrix_market(inv), np.eye(4))


def test_root_wide_spectrum_two_iterations(mtx, tmp_path):
    A = np.diag(np.geomspace(1e-9, 1, 6))
    trace = tmp_path / "trace.csv"
    code, text = run("root", "--p", "3", "--m", "8", "--in", mtx(A), "--out",
                     str(tmp_path / "y.mtx"), "--trace", str(trace))
    assert code == EXIT_OK
    assert trace.read_text() == text
    iters = len(text.splitlines()) - 2
    assert iters <= 2
    Y = linalg.read_matrix_market(tmp_path / "y.mtx")
    assert np.allclose(np.diag(Y), np.geomspace(1e-9, 1, 6) ** (1 / 3), rtol=1e-12)


def test_root_deterministic(mtx, tmp_path):
    rng = np.random.default_rng(0)
    A = mtx(np.eye(5) * 2 + 0.3 * rng.standard_normal((5, 5)))
    for name in ("y1.mtx", "y2.mtx"):
        assert run("root", "--p", "5", "--m", "4", "--in", A, "--out", str(tmp_path / name))[0] == 0
    assert (tmp_path / "y1.mtx").read_bytes() == (tmp_path / "y2.mtx").read_bytes()


def test_root_malformed_header(tmp_path, capsys):
    bad = tmp_path / "bad.mtx"
    bad.write_text("%%MatrixMarket matrix coordinate real general\n1 1\n1\n")
    code, _ = run("root", "--p", "3", "--in", str(bad), "--out", str(tmp_path / "y.mtx"))
    assert code == EXIT_USAGE
    assert "line 1" in capsys.readouterr().err


def test_root_max_iters_exit_code(mtx, tmp_path):
    A = mtx(np.diag(np.geomspace(1e-12, 1, 4)))
    code, _ = run("root", "--p", "3", "--m", "1", "--mode", "pade", "--max-iters", "1",
                  "--in", A, "--out", str(tmp_path / "y.mtx"))
    assert code == EXIT_DIVERGED


def test_root_divergence_exit_code(mtx, tmp_path):
    A = mtx(np.diag([-1.0 + 1e-3j, 1.0]))
    code, _ = run("root", "--p", "3", "--m", "0", "--l", "1", "--max-iters", "200",
                  "--tau", "1", "--alpha0", "1", "--in", A, "--out", str(tmp_path / "y.mtx"))
    assert code == EXIT_DIVERGED


def test_table_annotation_rows():
    code, text = run("table", "--p", "3", "--m", "2", "--l", "2", "--eps0", "0.3", "--k", "3")
    assert code == EXIT_OK
    lines = text.splitlines()
    assert lines[0] == "k,eps_k,ratio,flag"
    assert lines[-1] == f"C,{7 / 288:.16e}"
    assert any(ln.endswith(",unreliable") for ln in lines)
    code, text = run("table", "--p", "2", "--m", "1", "--eps0", "0.1", "--k", "2")
    assert text.splitlines()[-1] == f"C,{0.0625:.16e}"


def test_minimax_constant_case():
    code, text = run("minimax", "--p", "3", "--m", "0", "--l", "0", "--alpha", "0.5")
    assert code == EXIT_OK
    E = float(next(ln for ln in text.splitlines() if ln.startswith("E ")).split()[1])
    assert E == pytest.approx(1 / 3, rel=1e-12)


def test_minimax_type_10():
    from rootiter.minimax import minimax, rhat_10

    code, text = run("minimax", "--p", "3", "--m", "1", "--l", "0", "--alpha", "0.5")
    num = [float(x) for x in next(ln for ln in text.splitlines()
                                  if ln.startswith("numerator")).split()[1:]]
    want = rhat_10(3, 0.5).scaled(1 - minimax(1, 0, 3, 0.5).E).num.coeffs
    assert np.allclose(num, want, atol=1e-10)
    assert "nodes" in text and "h a0" in text


def test_pade_output():
    code, text = run("pade", "--p", "2", "--m", "1", "--l", "1")
    assert code == EXIT_OK
    lines = dict(ln.split(" ", 1) for ln in text.splitlines())
    num = np.array(lines["numerator"].split(), dtype=float)
    den = np.array(lines["denominator"].split(), dtype=float)
    assert np.allclose(num / num[0], [1, 3]) and np.allclose(den / den[1], [3, 1])


def test_regions(tmp_path):
    out = tmp_path / "r.csv"
    code, text = run("regions", "--p", "3", "--m", "8", "--alpha", str(10 ** (-10 / 3)),
                     "--k", "2", "--delta", "1e-14", "--rect=-10,0,-pi/2,pi/2", "--res", "12x12",
                     "--out", str(out))
    assert code == EXIT_OK
    assert "nonconverged" not in text
    body = out.read_text().splitlines()
    assert body[0] == "log10_abs,arg,k_converged,rotation_index"
    assert len(body) == 1 + 144
    ks = {int(ln.split(",")[2]) for ln in body[1:]}
    assert ks <= {0, 1, 2}


def test_regions_negative_axis(tmp_path):
    out = tmp_path / "r.csv"
    code, text = run("regions", "--p", "3", "--m", "2", "--alpha", "0.1", "--k", "3",
                     "--rect=-3,0,pi,pi", "--res", "10x1", "--out", str(out))
    assert code == EXIT_OK
    assert "nonconverged,10,1.000000" in text


def test_kappa_command(mtx):
    code, text = run("kappa", "--p", "3", "--in", mtx(2.0 * np.eye(3)))
    assert code == EXIT_OK
    assert float(text.split()[1]) == pytest.approx(1 / 3, rel=1e-8)


@pytest.mark.parametrize("argv", [
    ["root", "--p", "1", "--in", "x", "--out", "y"],
    ["minimax", "--p", "3", "--m", "1", "--alpha", "1.5"],
    ["minimax", "--p", "3", "--m", "-1", "--alpha", "0.5"],
    ["table", "--p", "3", "--m", "1", "--eps0", "0", "--k", "2"],
    ["table", "--p", "3", "--m", "0", "--l", "0", "--eps0", "0.1"],
    ["regions", "--p", "3", "--m", "1", "--alpha", "0.5", "--k", "2", "--res", "ten",
     "--out", "r.csv"],
    ["regions", "--p", "3", "--m", "1", "--alpha", "0.5", "--k", "2", "--rect", "1,2,3",
     "--out", "r.csv"],
    ["root", "--p", "3", "--mode", "newton", "--in", "x", "--out", "y"],
    ["bogus"],
    [],
])
def test_usage_errors(argv):
    assert run(*argv)[0] == EXIT_USAGE


def test_missing_input_file(tmp_path):
    code, _ = run("root", "--p", "3", "--in", str(tmp_path / "none.mtx"), "--out",
                  str(tmp_path / "y.mtx"))
    assert code == EXIT_USAGE


def test_selftest_exit_codes(monkeypatch):
    from rootiter import acceptance
    from rootiter.cli import EXIT_SOLVER

    monkeypatch.setattr(acceptance, "ALL_CHECKS", (acceptance.check_p2_constant,))
    code, text = run("selftest")
    assert code == EXIT_OK
    assert text.splitlines()[0].startswith("PASS")
    failing = lambda: acceptance.Check("broken", False, "forced")
    monkeypatch.setattr(acceptance, "ALL_CHECKS", (acceptance.check_p2_constant, failing))
    code, text = run("selftest")
    assert code == EXIT_SOLVER
    assert "FAIL  broken" in text


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "rootiter", "pade", "--p", "2", "--m", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("type 1 1 p 2")
