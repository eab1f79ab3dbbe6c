import itertools
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rieszgas.errors import ConfigError
from rieszgas.harness import parse_config, read_records
from rieszgas.harness import experiments as ex
from rieszgas.harness.cli import cli_main
from rieszgas.harness.config import config_digest
from rieszgas.harness.oracles import matching_w1, min_cost_assignment
from rieszgas.harness.records import RECORD_FIELDS, check, data, flag, write_records, write_table

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

SMALL_SAMPLE = """\
[kernel]
family = "riesz"
d = 1
s = 0.25

[grid]
half_width = 2.0
n = 256

[sampler]
N = 8
beta = 1.0
n_steps = 200
burn_in = 50
thinning = 10
chains = 2

[experiment]
seed = 4
"""


# ---------------------------------------------------------------------------
# configuration


def test_missing_field_points_at_section():
    text = "# comment\n\n[kernel]\nfamily = \"riesz\"\ns = 0.5\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == 3
    assert "kernel.d" in str(exc.value)


def test_bad_value_points_at_key():
    text = "[kernel]\nfamily = \"riesz\"\nd = 2\ns = 0.5\n\n[grid]\nhalf_width = 1.0\nn = 100\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == 8
    assert "power of two" in str(exc.value)


def test_invalid_kernel_order_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_config("[kernel]\nfamily = \"riesz\"\nd = 1\ns = 0.5\n")
    assert exc.value.line == 1


def test_unknown_section_and_syntax_error():
    with pytest.raises(ConfigError) as exc:
        parse_config("[kernel]\nfamily = \"coulomb\"\nd = 2\n\n[extras]\nx = 1\n")
    assert exc.value.line == 5
    with pytest.raises(ConfigError) as exc:
        parse_config("[kernel]\nfamily = \"coulomb\"\nd = = 2\n")
    assert exc.value.line == 3


def test_defaults_and_digest():
    cfg = parse_config(SMALL_SAMPLE)
    assert cfg.get("solver", "tol") is None
    assert cfg.get("sampler", "step_size") == 0.1
    assert cfg.seed == 4
    reordered = SMALL_SAMPLE.replace("d = 1\ns = 0.25", "s = 0.25\nd = 1")
    assert parse_config(reordered).digest == cfg.digest
    assert parse_config(SMALL_SAMPLE.replace("seed = 4", "seed = 5")).digest != cfg.digest
    assert len(cfg.digest) == 16


@given(st.dictionaries(st.text(min_size=1, max_size=5), st.integers(), max_size=6))
def test_digest_ignores_insertion_order(d):
    items = list(d.items())
    assert config_digest(dict(items)) == config_digest(dict(reversed(items)))


def test_every_shipped_config_parses():
    for path in sorted(CONFIGS.glob("*.toml")):
        parse_config(path.read_text(), str(path))


# ---------------------------------------------------------------------------
# records and tables


def test_record_field_order_and_non_finite():
    rec = check("x/1", "exp", float("inf"), 1.0, {"N": np.int64(4)})
    assert rec.passed is False
    row = json.loads(rec.to_json())
    assert tuple(row) == RECORD_FIELDS
    assert row["lhs"] == "inf" and row["params"] == {"N": 4}
    assert check("x/2", "exp", 1.0, 1.0).passed
    assert not check("x/3", "exp", 1.0, 1.0, strict=True).passed
    assert not check("x/4", "exp", 0.0, float("nan")).passed
    assert flag("x/5", "exp", True).passed and flag("x/5", "exp", True).counts
    assert not data("x/6", "exp").counts and not check("x/7", "e", 0, 1, kind="qualitative").counts


def test_records_roundtrip(tmp_path):
    recs = [check("a", "e", 0.5, 1.0), data("b", "e", lhs=2.0, details={"v": [1.0, float("nan")]})]
    write_records(tmp_path / "r.jsonl", recs)
    back = read_records(tmp_path / "r.jsonl")
    assert [r["id"] for r in back] == ["a", "b"]
    assert back[1]["details"]["v"] == [1.0, "nan"]


def test_csv_is_rfc4180(tmp_path):
    write_table(tmp_path / "t.csv", ["a", "b"], [[1.5, "x,y"], [None, [1, 2]]])
    raw = (tmp_path / "t.csv").read_bytes()
    assert raw == b'a,b\r\n1.5,"x,y"\r\n,"[1,2]"\r\n'


# ---------------------------------------------------------------------------
# oracles


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_hungarian_matches_brute_force(n):
    r = np.random.default_rng(n)
    for _ in range(20):
        cost = r.random((n, n))
        perm = min_cost_assignment(cost)
        assert sorted(perm) == list(range(n))
        best = min(sum(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))
        assert cost[np.arange(n), perm].sum() == pytest.approx(best, abs=1e-12)


def test_matching_w1_one_dimensional():
    # on the line the monotone matching is optimal
    r = np.random.default_rng(0)
    x, y = r.random(7), r.random(7)
    expected = np.mean(np.abs(np.sort(x) - np.sort(y)))
    assert matching_w1(x[:, None], y[:, None]) == pytest.approx(expected, abs=1e-12)


# ---------------------------------------------------------------------------
# experiment helpers


@given(st.lists(st.floats(0.01, 10.0), min_size=2, max_size=30), st.floats(0.01, 10.0))
def test_required_constant_monotone_under_enlargement(L, extra):
    # the fitted constant is a max over the family, so adding a case never lowers it
    t = np.linspace(0.1, 1.0, len(L))
    norms = {"w1inf": 1.0, "c0a": 1.0, "h1": 1.0, "hs": 1.0, "cia": 1.0}
    args = (norms, 16, 1.0, 2, 0.0, 0.5, 0)
    base = ex._required_constant(1, np.array(L), t, *args).max()
    more = ex._required_constant(1, np.array(L + [extra]), np.r_[t, 1.1], *args).max()
    assert more >= base


def test_fit_quadratic_tail_exact():
    r = np.linspace(0.5, 2.0, 12)
    c = 3.0 * np.maximum(r - 0.4, 0) ** 2
    a, r0, env = ex.fit_quadratic_tail(r, c)
    assert a == pytest.approx(3.0, rel=1e-10) and r0 == pytest.approx(0.4, abs=1e-10)
    assert env == pytest.approx(3.0, rel=1e-10)


# ---------------------------------------------------------------------------
# CLI


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_validate_kernel_exit_zero(tmp_path, capsys):
    out = tmp_path / "vk"
    code = cli_main(["validate-kernel", "--config", str(CONFIGS / "validate_riesz2d.toml"), "--out", str(out),
                     "--quiet"])
    assert code == 0
    assert (out / "validation_report.json").is_file()
    assert (out / "records.jsonl").is_file() and (out / "summary.txt").is_file()
    assert capsys.readouterr().out == ""


def test_missing_kernel_d_exit_two(tmp_path, capsys):
    cfg = write(tmp_path, "bad.toml", "[kernel]\nfamily = \"riesz\"\ns = 0.5\n")
    assert cli_main(["validate-kernel", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "line 1" in err and "kernel.d" in err


def test_failed_check_exit_one(tmp_path, capsys):
    cfg = write(tmp_path, "none.toml", "[kernel]\nfamily = \"none\"\nd = 2\n\n[grid]\nhalf_width = 2.0\nn = 64\n")
    assert cli_main(["validate-kernel", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == 1
    assert "failed: validate-kernel/item3" in capsys.readouterr().err


def test_numerical_failure_exit_one(tmp_path, capsys, monkeypatch):
    def boom(run):
        run.context = "boom/step"
        raise FloatingPointError("overflow in step")

    monkeypatch.setitem(ex.EXPERIMENTS, "sample", boom)
    cfg = write(tmp_path, "s.toml", SMALL_SAMPLE)
    assert cli_main(["sample", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "numerical failure in record boom/step" in capsys.readouterr().err
    rec = read_records(tmp_path / "o" / "records.jsonl")[-1]
    assert rec["id"] == "boom/step" and rec["passed"] is False


def test_verify_splitting_default_config(tmp_path):
    out = tmp_path / "vs"
    assert cli_main(["verify-splitting", "--config", str(CONFIGS / "splitting.toml"), "--out", str(out),
                     "--quiet"]) == 0
    recs = [r for r in read_records(out / "records.jsonl") if r["kind"] == "check"]
    residuals = [r["lhs"] for r in recs if r["id"] == "verify-splitting/identity"]
    assert residuals and max(residuals) <= 1e-10


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, "s.toml", SMALL_SAMPLE)
    for name in ("a", "b"):
        assert cli_main(["sample", "--config", str(cfg), "--out", str(tmp_path / name), "--quiet"]) == 0
    a = (tmp_path / "a" / "records.jsonl").read_bytes()
    assert a == (tmp_path / "b" / "records.jsonl").read_bytes()
    for csv in (tmp_path / "a").glob("*.csv"):
        assert csv.read_bytes() == (tmp_path / "b" / csv.name).read_bytes()
    # the exit code of this run is the chains' own business; only the records matter here
    cli_main(["sample", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "5", "--quiet"])
    assert (tmp_path / "c" / "records.jsonl").read_bytes() != a


def test_threads_do_not_change_records(tmp_path):
    cfg = write(tmp_path, "s.toml", SMALL_SAMPLE)
    for name, k in (("one", "1"), ("two", "2")):
        assert cli_main(["sample", "--config", str(cfg), "--out", str(tmp_path / name), "--threads", k,
                         "--quiet"]) == 0
    assert (tmp_path / "one" / "records.jsonl").read_bytes() == (tmp_path / "two" / "records.jsonl").read_bytes()


def test_writes_stay_in_output_dir(tmp_path, monkeypatch):
    work = tmp_path / "work"
    work.mkdir()
    cfg = write(tmp_path, "s.toml", SMALL_SAMPLE)
    monkeypatch.chdir(work)
    assert cli_main(["sample", "--config", str(cfg), "--out", "out", "--quiet"]) == 0
    assert sorted(p.name for p in work.iterdir()) == ["out"]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["s.toml", "work"]


def test_report_aggregates(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = write(tmp_path, "s.toml", SMALL_SAMPLE)
    assert cli_main(["sample", "--config", str(cfg), "--out", "runs/sample", "--quiet"]) == 0
    rep = write(tmp_path, "r.toml", "[experiment]\ninputs = [\"runs/sample\"]\n")
    assert cli_main(["report", "--config", str(rep), "--out", "runs/report", "--quiet"]) == 0
    src = [r for r in read_records("runs/sample/records.jsonl") if r["kind"] == "check"]
    agg = read_records("runs/report/records.jsonl")
    assert [r["id"] for r in agg] == [f"report/{r['id']}" for r in src]
    missing = write(tmp_path, "m.toml", "[experiment]\ninputs = [\"runs/nothing\"]\n")
    assert cli_main(["report", "--config", str(missing), "--out", "runs/r2", "--quiet"]) == 2


def test_seed_out_of_range(tmp_path):
    cfg = write(tmp_path, "s.toml", SMALL_SAMPLE)
    assert cli_main(["sample", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", str(2 ** 64)]) == 2
