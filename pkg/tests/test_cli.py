import json
import subprocess
import sys

import pytest

from badseq import cli
from badseq.serialize import config_hash, load_family, save_family


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def report(out):
    return json.loads(out)


def test_residues_table(capsys):
    code, out, _ = run(capsys, "residues", "--d", "2", "--t", "65")
    assert code == 0
    rows = report(out)["result"]["tables"]
    assert rows[0]["size"] == 12 and rows[0]["crt_agrees"]


def test_residues_primes(capsys):
    code, out, _ = run(capsys, "residues", "--primes", "--t", "6")
    assert code == 0
    assert report(out)["result"]["tables"][0]["elements"] == [1, 5]


def test_invalid_modulus_is_usage_error(capsys):
    code, _, err = run(capsys, "residues", "--t", "1")
    assert code == 2 and "at least 2" in err


def test_unknown_flag_and_command(capsys):
    assert run(capsys, "residues", "--nope", "3")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "residues", "--gamma", "1/3")[0] == 2


def test_report_has_hash_and_provenance(capsys):
    _, out, _ = run(capsys, "residues", "--t", "13")
    rep = report(out)
    assert rep["config_hash"] == config_hash(rep["config"])
    assert rep["provenance"]["package"] == "badseq"


def test_config_file_env_and_flags(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# residue tables\nt = 15, 65\nsequence = power\n")
    monkeypatch.setenv(cli.ENV_CONFIG, str(cfg))
    _, out, _ = run(capsys, "residues")
    assert [r["t"] for r in report(out)["result"]["tables"]] == [15, 65]
    _, out, _ = run(capsys, "residues", "--t", "13")
    assert [r["t"] for r in report(out)["result"]["tables"]] == [13]


def test_config_diagnostics(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("t = 15\nwat = 3\n")
    code, _, err = run(capsys, "residues", "--config", str(cfg))
    assert code == 2 and "bad.cfg:2" in err and "wat" in err
    cfg.write_text("t = 15\ngamma = one quarter\n")
    code, _, err = run(capsys, "residues", "--config", str(cfg))
    assert code == 2 and "bad.cfg:2" in err
    code, _, err = run(capsys, "residues", "--config", str(tmp_path / "missing.cfg"))
    assert code == 2 and "not found" in err


def test_spacing_csv(capsys, tmp_path):
    code, _, _ = run(capsys, "spacing", "--q-chain", "65,1105", "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "spacing.csv").read_text().splitlines()
    assert lines[0].startswith("q,theta,F")
    assert any(line.startswith("1105,") for line in lines)


def test_equidist_primes(capsys):
    code, out, _ = run(capsys, "equidist", "--primes", "--Q", "15", "--H", "20000")
    assert code == 0


def test_rearrange(capsys):
    code, out, _ = run(capsys, "rearrange", "--T", "3", "--p", "101")
    assert code == 0


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    out = tmp_path_factory.mktemp("build")
    code = cli.main(["build-family", "--K", "1", "--M", "1", "--out", str(out)])
    return code, out


def test_build_writes_family(built):
    code, out = built
    assert code == 0
    assert (out / "family.json").is_file()
    assert json.loads((out / "build-family.json").read_text())["passed"] is True


def test_verify_reports_failed_property(built, capsys):
    _, out = built
    code, _, err = run(capsys, "verify-family", "--family", str(out / "family.json"))
    assert code == 1
    assert "FAILED (3) exceptional set" in err


def test_verify_corrupted_file(built, capsys, tmp_path):
    _, out = built
    bad = tmp_path / "garbage.json"
    bad.write_text((out / "family.json").read_text()[:500])
    code, _, err = run(capsys, "verify-family", "--family", str(bad))
    assert code == 2 and "cannot read family file" in err


def test_verify_tampered_values(built, capsys, tmp_path):
    from badseq.periodic import Dense
    _, out = built
    fam = load_family(out / "family.json")
    d = fam.f[0].dense()
    num = d.num.copy()
    num[::7] = 0
    fam.f = [Dense(num, d.den)]
    path = tmp_path / "tampered.json"
    save_family(fam, path)
    code, _, err = run(capsys, "verify-family", "--family", str(path))
    assert code == 1
    assert '"property":"joker"' in err and '"x":' in err


def test_demo_csv(built, capsys, tmp_path):
    _, out = built
    code, _, _ = run(capsys, "demo-maximal", "--family", str(out / "family.json"),
                     "--sample-size", "200", "--N-cap", "300", "--out", str(tmp_path))
    assert code == 0
    rows = (tmp_path / "demo-maximal.csv").read_text().splitlines()
    assert rows[0] == "x,sup_A_N_f,sup_capped" and len(rows) == 201


def test_missing_family_is_usage_error(capsys):
    assert run(capsys, "demo-maximal")[0] == 2


def test_identical_config_gives_identical_reports(capsys, tmp_path):
    for name in ("a", "b"):
        cli.main(["build-family", "--K", "1", "--M", "1", "--out", str(tmp_path / name)])
    capsys.readouterr()
    for f in ("build-family.json", "family.json"):
        assert (tmp_path / "a" / f).read_bytes() != b""
    a = json.loads((tmp_path / "a" / "build-family.json").read_text())
    b = json.loads((tmp_path / "b" / "build-family.json").read_text())
    # the output directory is part of the config; everything else must match exactly
    a["config"].pop("out"), b["config"].pop("out")
    a["result"].pop("family_file"), b["result"].pop("family_file")
    assert a["result"] == b["result"] and a["config"] == b["config"]
    assert (tmp_path / "a" / "family.json").read_bytes() == (tmp_path / "b" / "family.json").read_bytes()
    outs = []
    for _ in range(2):
        cli.main(["spacing", "--q-chain", "65"])
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]


def test_console_script_exit_codes():
    ok = subprocess.run([sys.executable, "-m", "badseq.cli", "residues", "--t", "5"],
                        capture_output=True, text=True)
    assert ok.returncode == 0
    bad = subprocess.run([sys.executable, "-m", "badseq.cli", "residues", "--t", "1"],
                         capture_output=True, text=True)
    assert bad.returncode == 2 and bad.stderr


def test_build_acceptance_config(tmp_path, capsys):
    # defaults are the (1,2,2) acceptance parameters
    code = cli.main(["build-family", "--out", str(tmp_path)])
    capsys.readouterr()
    assert code == 0
    rep = json.loads((tmp_path / "build-family.json").read_text())
    assert rep["result"]["summary"]["T"] == 1616615
    assert (tmp_path / "family.json").is_file()
