"""Run the default scenario, verify the decay estimates and write CSV/SVG output.

    python3 scripts/run_default.py [OUTDIR]
"""
import sys
from pathlib import Path

from porothermo.cli import run_cli

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "out/default"
    code = run_cli(["verify", str(ROOT / "configs" / "default.json"), "-o", out])
    if code == 0:
        code = run_cli(["report", out])
    sys.exit(code)
