"""Run every config in configs/ and write the results next to each other.

usage: python scripts/run_all.py [--jobs N] [--out-dir results] [config ...]
"""

import argparse
import sys
from pathlib import Path

from qsglab.cli import main as qsglab_main
from qsglab.config import load_file

ROOT = Path(__file__).resolve().parent.parent


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("configs", nargs="*", type=Path)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out-dir", type=Path, default=ROOT / "results")
    args = parser.parse_args(argv)
    configs = args.configs or sorted((ROOT / "configs").glob("*.toml"))
    failures = 0
    for path in configs:
        experiment = load_file(path)["experiment"]
        out = args.out_dir / f"{path.stem}.csv"
        code = qsglab_main([experiment, "--config", str(path), "--jobs", str(args.jobs),
                            "--out", str(out)])
        failures += code != 0
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
