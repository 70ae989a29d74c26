"""Run every configuration in configs/ through the CLI and summarize the exit statuses.

    python scripts/run_all_configs.py [--out out]
"""

import argparse
import sys
import time
from pathlib import Path

from singular_pq.cli import main


def run_all(config_dir: Path, out_root: Path) -> dict:
    statuses = {}
    for cfg in sorted(config_dir.glob("*.toml")):
        command = next(line.split("=")[1].strip().strip('"') for line in cfg.read_text().splitlines()
                       if line.strip().startswith("command"))
        t0 = time.perf_counter()
        status = main([command, "--config", str(cfg), "--out", str(out_root / cfg.stem)])
        statuses[cfg.stem] = (status, time.perf_counter() - t0)
    return statuses


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--configs", default=str(Path(__file__).resolve().parent.parent / "configs"))
    ap.add_argument("--out", default="out")
    args = ap.parse_args()
    results = run_all(Path(args.configs), Path(args.out))
    print()
    for name, (status, secs) in results.items():
        print(f"{name:18s} status={status} {secs:6.1f}s")
    sys.exit(max(s for s, _ in results.values()))
