"""Run selected acceptance criteria and print their pass/fail lines.

    python scripts/run_acceptance.py          # all ten
    python scripts/run_acceptance.py 4 7      # criteria 4 and 7
"""

import argparse
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("criteria", nargs="*", type=int, help="criterion numbers (1-10)")
    args = parser.parse_args()
    bad = [n for n in args.criteria if not 1 <= n <= 10]
    if bad:
        parser.error(f"no criterion {bad[0]}")
    cmd = [sys.executable, "-m", "pytest", str(ROOT / "tests" / "test_acceptance.py"), "-q"]
    if args.criteria:
        cmd += ["-k", " or ".join(f"criterion_{n}_" for n in args.criteria)]
    return subprocess.call(cmd, cwd=ROOT)


if __name__ == "__main__":
    sys.exit(main())
