import json
import subprocess
import sys

import numpy as np
import pytest

from liststeg import BitString
from liststeg.cli import main

KEY_HEX = "00112233445566778899aabbccddeeff" * 2


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.delenv("LISTSTEG_KEY", raising=False)
    cfg = {
        "model": {"kind": "uniform", "vocab_size": 16},
        "codec": {"list_cap_log2": 10, "security_bits": 24, "suffix_bits": "auto"},
    }
    (tmp_path / "config.json").write_text(json.dumps(cfg))
    rng = np.random.default_rng(99)
    payload = BitString.from_int(int(rng.integers(0, 1 << 63)), 63)
    (tmp_path / "secret.bin").write_bytes(payload.pack())
    return tmp_path, payload


def run(args):
    return main([str(a) for a in args])


def test_encode_decode_file_round_trip(workdir, capsys):
    tmp, payload = workdir
    assert run(["encode", "--config", tmp / "config.json", "--key", KEY_HEX,
                "--payload", tmp / "secret.bin", "--out", tmp / "out.lstg",
                "--report-json", tmp / "report.json"]) == 0
    out = capsys.readouterr().out
    assert "utilization" in out
    report = json.loads((tmp / "report.json").read_text())
    assert report["embedded_bits"] == 63
    assert (tmp / "out.lstg.meta").exists()

    assert run(["decode", "--config", tmp / "config.json", "--key", KEY_HEX,
                "--stegotext", tmp / "out.lstg", "--out", tmp / "back.bin"]) == 0
    assert BitString.unpack((tmp / "back.bin").read_bytes()) == payload
    assert (tmp / "back.bin").read_bytes() == (tmp / "secret.bin").read_bytes()


def test_missing_key_is_usage_error(workdir, capsys):
    tmp, _ = workdir
    code = run(["encode", "--config", tmp / "config.json",
                "--payload", tmp / "secret.bin", "--out", tmp / "out.lstg"])
    assert code == 2
    assert "key" in capsys.readouterr().err


def test_key_from_environment(workdir, monkeypatch):
    tmp, _ = workdir
    monkeypatch.setenv("LISTSTEG_KEY", KEY_HEX)
    assert run(["encode", "--config", tmp / "config.json",
                "--payload", tmp / "secret.bin", "--out", tmp / "out.lstg"]) == 0


def test_token_budget_distinct_exit_code(workdir, capsys):
    tmp, _ = workdir
    cfg = {
        "model": {"kind": "peaked", "vocab_size": 3, "eps_log2": -12},
        "codec": {"list_cap_log2": 8, "security_bits": 0, "suffix_bits": 16},
        "max_tokens": 200,
    }
    (tmp / "slow.json").write_text(json.dumps(cfg))
    code = run(["encode", "--config", tmp / "slow.json", "--key", KEY_HEX,
                "--payload", tmp / "secret.bin", "--out", tmp / "out.lstg"])
    assert code == 7
    err = capsys.readouterr().err
    assert "200 tokens" in err  # partial-trace diagnostic


def test_corrupted_stegotext_detected(workdir, capsys):
    tmp, _ = workdir
    assert run(["encode", "--config", tmp / "config.json", "--key", KEY_HEX,
                "--payload", tmp / "secret.bin", "--out", tmp / "out.lstg"]) == 0
    data = bytearray((tmp / "out.lstg").read_bytes())
    # flip one token id in the body (header is 13 bytes)
    data[16] ^= 0x05
    (tmp / "bad.lstg").write_bytes(bytes(data))
    meta = (tmp / "out.lstg.meta").read_text()
    (tmp / "bad.lstg.meta").write_text(meta)
    code = run(["decode", "--config", tmp / "config.json", "--key", KEY_HEX,
                "--stegotext", tmp / "bad.lstg", "--out", tmp / "bad.bin"])
    assert code in (3, 4, 5)


def test_bad_magic_rejected(workdir):
    tmp, _ = workdir
    (tmp / "junk.lstg").write_bytes(b"JUNK" + bytes(20))
    code = run(["decode", "--config", tmp / "config.json", "--key", KEY_HEX,
                "--stegotext", tmp / "junk.lstg", "--out", tmp / "x.bin",
                "--payload-bits", "63"])
    assert code == 2


def test_wrong_model_config_rejected(workdir, capsys):
    tmp, _ = workdir
    assert run(["encode", "--config", tmp / "config.json", "--key", KEY_HEX,
                "--payload", tmp / "secret.bin", "--out", tmp / "out.lstg"]) == 0
    other = {
        "model": {"kind": "uniform", "vocab_size": 8},
        "codec": {"list_cap_log2": 10, "security_bits": 24, "suffix_bits": "auto"},
    }
    (tmp / "other.json").write_text(json.dumps(other))
    code = run(["decode", "--config", tmp / "other.json", "--key", KEY_HEX,
                "--stegotext", tmp / "out.lstg", "--out", tmp / "x.bin"])
    assert code == 2
    assert "does not match" in capsys.readouterr().err


def test_raw_payload_round_trip(workdir):
    tmp, _ = workdir
    (tmp / "raw.bin").write_bytes(b"attack at dawn")
    assert run(["encode", "--config", tmp / "config.json", "--key", KEY_HEX,
                "--payload", tmp / "raw.bin", "--raw",
                "--out", tmp / "out.lstg"]) == 0
    assert run(["decode", "--config", tmp / "config.json", "--key", KEY_HEX,
                "--stegotext", tmp / "out.lstg", "--raw",
                "--out", tmp / "raw-back.bin"]) == 0
    assert (tmp / "raw-back.bin").read_bytes() == b"attack at dawn"


def test_capacity_single_point(workdir, capsys):
    tmp, _ = workdir
    assert run(["capacity", "--config", tmp / "config.json", "--key", KEY_HEX,
                "--lengths", "128", "--list-exps", "10"]) == 0
    out = capsys.readouterr().out
    lines = [ln for ln in out.strip().splitlines() if ln]
    assert lines[0].startswith("payload_bits,")
    assert len(lines) == 2  # header plus exactly one data row


def test_capacity_csv_file(workdir):
    tmp, _ = workdir
    assert run(["capacity", "--config", tmp / "config.json", "--key", KEY_HEX,
                "--lengths", "64,128", "--list-exps", "8,10",
                "--out", tmp / "table.csv"]) == 0
    rows = (tmp / "table.csv").read_text().strip().splitlines()
    assert len(rows) == 5


def test_selftest_deterministic(workdir, capsys):
    assert run(["selftest", "--scale", "quick", "--seed", "3"]) == 0
    first = capsys.readouterr().out
    assert run(["selftest", "--scale", "quick", "--seed", "3"]) == 0
    second = capsys.readouterr().out
    assert first == second
    assert "[PASS]" in first and "[FAIL]" not in first


def test_console_script_installed():
    proc = subprocess.run([sys.executable, "-m", "liststeg.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "encode" in proc.stdout
