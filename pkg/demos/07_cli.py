"""Run an experiment through the command-line entry point and show its summary."""
import sys
import tempfile
from pathlib import Path

from rieszgas.harness.cli import cli_main

config = Path(__file__).resolve().parents[1] / "configs" / "dual_norms.toml"
with tempfile.TemporaryDirectory() as out:
    code = cli_main(["norm", "--config", str(config), "--out", out, "--quiet"])
    print((Path(out) / "summary.txt").read_text())
    print("files:", sorted(p.name for p in Path(out).iterdir()))
sys.exit(code)
