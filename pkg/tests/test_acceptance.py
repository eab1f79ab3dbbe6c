"""End-to-end acceptance suite: every criterion runs its experiment through the CLI.

Each test prints one line ``ACCEPTANCE k: PASS|FAIL <detail>``. Run alone with
``pytest tests/test_acceptance.py -v -s`` or ``python tests/test_acceptance.py``.
"""
import json
import time
from pathlib import Path

import pytest

from rieszgas.harness.cli import cli_main

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


class Runs:
    def __init__(self, root):
        self.root = root
        self.cache = {}

    def get(self, subcommand, config, tag=""):
        key = (subcommand, config, tag)
        if key not in self.cache:
            out = self.root / f"{config}{tag}"
            start = time.perf_counter()
            code = cli_main([subcommand, "--config", str(CONFIGS / f"{config}.toml"), "--out", str(out), "--quiet"])
            seconds = time.perf_counter() - start
            records = {}
            for line in (out / "records.jsonl").read_text(encoding="utf-8").splitlines():
                r = json.loads(line)
                records[r["id"]] = r
            self.cache[key] = (code, records, seconds, out)
        return self.cache[key]


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    return Runs(tmp_path_factory.mktemp("acceptance"))


def report(k, checks, capsys):
    failed = [name for name, ok, _ in checks if not ok]
    detail = "; ".join(f"{name}={info}" for name, _, info in checks)
    line = f"ACCEPTANCE {k}: {'FAIL' if failed else 'PASS'} {detail}"
    with capsys.disabled():
        print("\n" + line)
    assert not failed, f"acceptance {k} failed: {', '.join(failed)}"


def check_ok(records, rid):
    r = records[rid]
    return r["kind"] == "check" and r["passed"]


def test_acceptance_01_splitting(runs, capsys):
    code, rec, sec, _ = runs.get("verify-splitting", "splitting")
    r = rec["verify-splitting/identity"]
    p = r["params"]
    report(1, [
        ("exit", code == 0, code),
        ("setup", p["trials"] == 100 and p["N_max"] <= 64 and p["n"] == 128, p),
        ("residual", r["lhs"] <= 1e-8, f"{r['lhs']:.3g}<=1e-8"),
        ("runtime", sec <= 60, f"{sec:.1f}s<=60s"),
    ], capsys)


def test_acceptance_02_energy_duality(runs, capsys):
    checks = []
    for cfg in ("duality_d1", "duality_d2"):
        code, rec, sec, _ = runs.get("norm", cfg)
        gaps = [r["lhs"] for rid, r in rec.items() if rid.startswith("norm/energy-duality/")]
        checks += [
            (f"{cfg}/exit", code == 0, code),
            (f"{cfg}/count", len(gaps) == 20, len(gaps)),
            (f"{cfg}/gap", max(gaps) <= 0.02, f"{max(gaps):.3g}<=0.02"),
            (f"{cfg}/runtime", sec <= 120, f"{sec:.1f}s<=120s"),
        ]
    report(2, checks, capsys)


def test_acceptance_03_seminorm_equivalence(runs, capsys):
    checks = []
    for cfg in ("duality_d1", "duality_d2"):
        code, rec, sec, _ = runs.get("norm", cfg)
        r = rec["norm/seminorm-equivalence"]
        checks += [
            (f"{cfg}/spread", check_ok(rec, "norm/seminorm-equivalence") and r["lhs"] <= 0.05,
             f"{r['lhs']:.3g}<=0.05"),
            (f"{cfg}/runtime", sec <= 120, f"{sec:.1f}s<=120s"),
        ]
    report(3, checks, capsys)


def test_acceptance_04_dual_norm_closed_forms(runs, capsys):
    code, rec, sec, _ = runs.get("norm", "dual_norms")
    checks = [("exit", code == 0, code), ("runtime", sec <= 30, f"{sec:.1f}s<=30s")]
    for name in ("homogeneous", "full", "wasserstein"):
        r = rec[f"norm/closed-form/{name}"]
        checks.append((name, check_ok(rec, f"norm/closed-form/{name}") and r["lhs"] <= 1e-8, f"{r['lhs']:.3g}<=1e-8"))
    report(4, checks, capsys)


THETAS = (10, 100, 1000)


def test_acceptance_05_thermal_exactness(runs, capsys):
    checks = []
    for cfg in ("thermal_coulomb", "thermal_riesz1d"):
        code, rec, sec, _ = runs.get("thermal", cfg)
        exact = max(rec[f"thermal/no-interaction/theta={t}"]["lhs"] for t in THETAS)
        foc = max(rec[f"thermal/foc/theta={t}"]["lhs"] for t in THETAS)
        checks += [
            (f"{cfg}/no-interaction", exact <= 1e-10, f"{exact:.3g}<=1e-10"),
            (f"{cfg}/foc", foc <= 1e-6, f"{foc:.3g}<=1e-6"),
            (f"{cfg}/runtime", sec <= 120, f"{sec:.1f}s<=120s"),
        ]
    report(5, checks, capsys)


def test_acceptance_06_thermal_bounds(runs, capsys):
    checks = []
    for cfg in ("thermal_coulomb", "thermal_riesz1d"):
        code, rec, sec, _ = runs.get("thermal", cfg)
        r = rec["thermal/decay-bounds"]
        violations = r["details"].get("violations")
        checks += [
            (f"{cfg}/bounds", check_ok(rec, "thermal/decay-bounds") and violations == 0,
             f"C={r['constant']:.4g},violations={violations}"),
            (f"{cfg}/runtime", sec <= 120, f"{sec:.1f}s<=120s"),
        ]
    report(6, checks, capsys)


def test_acceptance_07_thermal_rate(runs, capsys):
    # Left failing on purpose: the measured product decays like 1/theta.
    code, rec, sec, _ = runs.get("thermal", "thermal_rate")
    r = rec["thermal/rate/product-ratio"]
    report(7, [
        ("max/min", r["lhs"] <= 10, f"{r['lhs']:.4g}<=10"),
        ("runtime", sec <= 300, f"{sec:.1f}s<=300s"),
    ], capsys)


def test_acceptance_08_lower_bound(runs, capsys):
    code, rec, sec, _ = runs.get("lower-bound", "lower_bound")
    checks = [("runtime", sec <= 300, f"{sec:.1f}s<=300s")]
    for alpha in ("1", "0.75"):
        slope = rec[f"lower-bound/alpha{alpha}/slope"]
        checks.append((f"alpha{alpha}/slope", slope["lhs"] <= 0.05, f"|slope+a/d|={slope['lhs']:.3g}<=0.05"))
        per_n = [r for rid, r in rec.items() if rid.startswith(f"lower-bound/alpha{alpha}/N")]
        worst = min(r["rhs"] / r["lhs"] for r in per_n)
        checks.append((f"alpha{alpha}/certified>=bound",
                       len(per_n) >= 5 and all(r["passed"] and r["rhs"] >= r["lhs"] for r in per_n),
                       f"min certified/bound={worst:.3g}"))
    report(8, checks, capsys)


def test_acceptance_09_transport(runs, capsys):
    code, rec, sec, _ = runs.get("transport", "transport")
    checks = [("exit", code == 0, code), ("runtime", sec <= 600, f"{sec:.1f}s<=600s")]
    for item in (1, 2):
        bounded = [r for rid, r in rec.items() if rid.startswith(f"transport/item{item}/n")]
        checks.append((f"item{item}/bounded", all(r["passed"] and r["params"]["pairs"] == 50 for r in bounded),
                       ",".join(f"{r['constant']:.4g}" for r in bounded)))
        stab = [r for rid, r in rec.items() if rid.startswith(f"transport/item{item}/stability/")]
        checks.append((f"item{item}/stability", bool(stab) and all(r["passed"] and r["lhs"] <= 0.3 for r in stab),
                       ",".join(f"{r['lhs']:.3g}" for r in stab) + "<=0.3"))
    report(9, checks, capsys)


def test_acceptance_10_concentration_and_tail(runs, capsys):
    code_c, conc, sec_c, _ = runs.get("concentration", "concentration")
    code_t, tail, sec_t, _ = runs.get("fn-tail", "fn_tail")
    checks = [("runtime", sec_c + sec_t <= 900, f"{sec_c + sec_t:.1f}s<=900s")]
    for N in (16, 32, 64):
        r = tail[f"fn-tail/N{N}/slack"]
        checks.append((f"fn-tail/N{N}/below-bound", r["passed"] and r["lhs"] <= r["rhs"], f"slack={r['lhs']:.3g}"))
    for N in (16, 32, 64):
        rid = f"concentration/N{N}/below-bound"
        checks.append((rid, check_ok(conc, rid), f"C={conc[rid]['constant']:.4g}"))
    for rid in ("concentration/exponent-scaling", "concentration/offset-scaling"):
        r = conc[rid]
        checks.append((rid, check_ok(conc, rid) and r["lhs"] <= 2.0, f"{r['lhs']:.3g}<=2"))
    report(10, checks, capsys)


def test_acceptance_11_moderate_temperature(runs, capsys):
    checks = []
    total = 0.0
    for cfg, items in (("mt_coulomb2d", (1, 3)), ("mt_riesz1d", (2, 4))):
        code, rec, sec, _ = runs.get("mt", cfg)
        total += sec
        for fn in ("bump", "rough", "linear"):
            for item in items:
                r = rec[f"mt/item{item}/{fn}"]
                checks.append((f"{cfg}/item{item}/{fn}", check_ok(rec, f"mt/item{item}/{fn}") and r["lhs"] <= 0,
                               f"max(L-RHS)={r['lhs']:.3g}"))
        for fn in ("bump", "rough", "linear", "constant"):
            l0 = rec[f"mt/{fn}/L0"]
            conv = rec[f"mt/{fn}/convex"]
            checks.append((f"{cfg}/{fn}/L0", l0["lhs"] == 0.0, l0["lhs"]))
            checks.append((f"{cfg}/{fn}/convex", check_ok(rec, f"mt/{fn}/convex"), f"{conv['lhs']:.3g}"))
    checks.append(("runtime", total <= 900, f"{total:.1f}s<=900s"))
    report(11, checks, capsys)


def test_acceptance_12_determinism(runs, capsys):
    checks = []
    for sub, cfg in (("verify-splitting", "splitting"), ("norm", "dual_norms"), ("fn-tail", "fn_tail"),
                     ("sample", "sample_riesz1d")):
        first = runs.get(sub, cfg)[3] / "records.jsonl"
        again = runs.get(sub, cfg, "-rerun")[3] / "records.jsonl"
        checks.append((cfg, first.read_bytes() == again.read_bytes(), f"{first.stat().st_size}B"))
    report(12, checks, capsys)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
