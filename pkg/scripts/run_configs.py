"""Run every config in configs/ through the CLI and report the exit codes.

Outputs go to a scratch directory (default ``out/``) given by --out.
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
SECTIONS = ("nilseq", "gpoly", "correlate", "decompose", "wiener", "density")


def subcommand(path: Path) -> str:
    cfg = json.loads(path.read_text())
    return next(s for s in SECTIONS if s in cfg)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(ROOT / "out"))
    args = ap.parse_args()
    worst = 0
    for path in sorted((ROOT / "configs").glob("*.json")):
        cmd = subcommand(path)
        out = Path(args.out) / path.stem
        proc = subprocess.run([sys.executable, "-m", "nilcorr", cmd, "--config", str(path),
                               "--out", str(out)], capture_output=True, text=True)
        note = proc.stderr.strip().splitlines()[-1] if proc.stderr.strip() else ""
        print(f"{path.name:36s} {cmd:10s} exit {proc.returncode}  {note}")
        worst = max(worst, proc.returncode)
    return 0 if worst in (0, 2, 3) else worst


if __name__ == "__main__":
    sys.exit(main())
