import math
from fractions import Fraction as F
from pathlib import Path

import pytest

from slopeforge import fixtures
from slopeforge.cli import main
from slopeforge.pwmap import parse_pwa, serialize_pwa, sup_dist


@pytest.fixture
def tent_file(tmp_path):
    p = tmp_path / "tent.pwa"
    p.write_text(serialize_pwa(fixtures.tent()))
    return str(p)


@pytest.fixture
def skew_file(tmp_path):
    p = tmp_path / "skew.pwa"
    p.write_text(serialize_pwa(fixtures.skew_tent(F(5, 12))))
    return str(p)


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    summary = {}
    for ln in out.splitlines():
        if "=" in ln:
            k, v = ln.split("=", 1)
            summary.setdefault(k, []).append(v)
    return code, summary, out


def test_entropy_tent(capsys, tent_file, tmp_path):
    out_tsv = str(tmp_path / "report.tsv")
    code, summary, _ = run(capsys, ["entropy", tent_file, "--depth", "10",
                                    "--out", out_tsv])
    assert code == 0
    assert abs(float(summary["h_est"][0]) - math.log(2)) < 1e-12
    assert abs(float(summary["h_spectral"][0]) - math.log(2)) < 1e-12
    assert summary["agreed"] == ["true"]
    text = Path(out_tsv).read_text()
    assert text.startswith("n\tc_n\testimate\n")
    assert "1\t2\t" in text


def test_entropy_not_positive(capsys, tmp_path):
    p = tmp_path / "id.pwa"
    p.write_text(serialize_pwa(fixtures.identity_map()))
    code, summary, _ = run(capsys, ["entropy", str(p)])
    assert code == 0
    assert summary["positive"] == ["false"]
    assert "no positive entropy" in summary["note"][0]


def test_entropy_parse_error(capsys, tmp_path):
    p = tmp_path / "bad.pwa"
    p.write_text("pwa 2\n")
    code, summary, _ = run(capsys, ["entropy", str(p)])
    assert code == 2
    assert summary["error"][0].startswith("parse")


def test_markov_check(capsys, tent_file):
    code, summary, _ = run(capsys, ["markov-check", tent_file,
                                    "--points", "0,1/2,1"])
    assert code == 0 and summary["markov"] == ["true"]
    code, summary, _ = run(capsys, ["markov-check", tent_file,
                                    "--points", "0,1/3,1"])
    assert code == 0 and summary["markov"] == ["false"]


def test_normalize_skew_writes_bundle(capsys, skew_file, tmp_path):
    g_out = str(tmp_path / "g.pwa")
    psi_out = str(tmp_path / "psi.tsv")
    tr_out = str(tmp_path / "trace.tsv")
    code, summary, _ = run(capsys, ["normalize", skew_file, "--tol", "1e-6",
                                    "--out", g_out, "--psi", psi_out,
                                    "--trace", tr_out])
    assert code == 0
    assert abs(float(summary["beta"][0]) - 2.0) < 1e-12
    assert float(summary["residual"][0]) < 1e-6
    assert summary["conjugacy"] == ["true"]
    g = parse_pwa(Path(g_out).read_text())
    assert sup_dist(g, fixtures.tent()) == 0
    assert Path(psi_out).read_text().startswith("x\tpsi")
    assert Path(tr_out).read_text().startswith("i\tbeta_i")


def test_normalize_identity_precondition(capsys, tmp_path):
    p = tmp_path / "id.pwa"
    p.write_text(serialize_pwa(fixtures.identity_map()))
    code, summary, _ = run(capsys, ["normalize", str(p)])
    assert code == 3
    assert summary["error"][0].startswith("precondition")


def test_verify_round_trip(capsys, skew_file, tmp_path):
    g_out = str(tmp_path / "g.pwa")
    psi_out = str(tmp_path / "psi.tsv")
    run(capsys, ["normalize", skew_file, "--out", g_out, "--psi", psi_out])
    code, summary, _ = run(capsys, ["verify", skew_file, g_out, psi_out,
                                    "--grid", "10000", "--tol", "1e-9"])
    assert code == 0
    assert float(summary["residual"][0]) < 1e-9


def test_verify_detects_corruption(capsys, skew_file, tmp_path):
    psi_out = str(tmp_path / "psi.tsv")
    run(capsys, ["normalize", skew_file, "--psi", psi_out])
    bad = tmp_path / "bad.pwa"
    bad.write_text(serialize_pwa(
        fixtures.skew_tent(F(5, 12))  # wrong g: not the normal form
    ))
    code, summary, _ = run(capsys, ["verify", skew_file, str(bad), psi_out,
                                    "--grid", "1000", "--tol", "1e-6"])
    assert code == 5
    assert float(summary["residual"][0]) > 0.004


def test_approx_command(capsys, tmp_path):
    p = tmp_path / "t32.pwa"
    p.write_text(serialize_pwa(fixtures.tent_slope(F(3, 2))))
    code, summary, _ = run(capsys, ["approx", str(p), "--index", "8"])
    assert code == 0
    num, den = summary["distance"][0].split("/")
    assert F(int(num), int(den)) < F(1, 8)


def test_reduce_command(capsys, tmp_path):
    p = tmp_path / "trap.pwa"
    p.write_text(serialize_pwa(fixtures.flat_trapezoid()))
    coll = str(tmp_path / "collapse.tsv")
    out = str(tmp_path / "fhat.pwa")
    code, summary, _ = run(capsys, ["reduce", str(p), "--depth", "8",
                                    "--out", out, "--collapse", coll])
    assert code == 0
    assert summary["collapse_count"] == ["1"]
    assert "2/5\t3/5" in Path(coll).read_text()
    fhat = parse_pwa(Path(out).read_text())
    assert not fhat.has_plateau


def test_phi_bundle(capsys, skew_file, tmp_path):
    outdir = tmp_path / "bundle"
    code, summary, _ = run(capsys, ["phi", skew_file,
                                    "--out-dir", str(outdir)])
    assert code == 0
    assert summary["conjugacy"] == ["true"]
    assert summary["evidence"] == ["matrix_primitive"]
    assert (outdir / "g.pwa").exists()
    assert (outdir / "psi.tsv").exists()
    assert "evidence=matrix_primitive" in (outdir / "evidence.txt").read_text()


def test_phi_rejects_jump_map(capsys, tmp_path):
    p = tmp_path / "dbl.pwa"
    p.write_text(serialize_pwa(fixtures.doubling()))
    code, summary, _ = run(capsys, ["phi", str(p)])
    assert code == 3


def test_flatten_command(capsys, tmp_path):
    p = tmp_path / "circle.txt"
    p.write_text(fixtures.CIRCLE_DOUBLING)
    out = str(tmp_path / "flat.pwa")
    code, summary, _ = run(capsys, ["flatten", str(p), "--out", out])
    assert code == 0
    flat = parse_pwa(Path(out).read_text())
    assert flat == fixtures.doubling()


def test_plot_tent(capsys, tent_file):
    code, _, out = run(capsys, ["plot", tent_file, "--samples", "4"])
    assert code == 0
    rows = [tuple(float(v) for v in ln.split("\t"))
            for ln in out.splitlines() if "\t" in ln]
    assert len(rows) == 5
    assert (0.5, 1.0) in rows


def test_plot_jump_duplicates(capsys, tmp_path):
    p = tmp_path / "dbl.pwa"
    p.write_text(serialize_pwa(fixtures.doubling()))
    code, _, out = run(capsys, ["plot", str(p), "--samples", "4"])
    assert code == 0
    rows = [tuple(float(v) for v in ln.split("\t"))
            for ln in out.splitlines() if "\t" in ln]
    assert rows.count((0.5, 1.0)) == 1 and rows.count((0.5, 0.0)) == 1


def test_determinism(capsys, skew_file, tmp_path):
    a1 = tmp_path / "a1.pwa"
    a2 = tmp_path / "a2.pwa"
    run(capsys, ["normalize", skew_file, "--out", str(a1)])
    run(capsys, ["normalize", skew_file, "--out", str(a2)])
    assert a1.read_bytes() == a2.read_bytes()
