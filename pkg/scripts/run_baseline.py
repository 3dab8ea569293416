#!/usr/bin/env python3
"""Baseline experiment: localized saturating damping on the unit square.

Writes the config, runs the solver through the CLI, and prints the fitted
decay rate from the report. Output lands in out/baseline/.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from dampedwave import cli

CONFIG = """\
geometry.shape = rectangle
geometry.width = 1
geometry.height = 1
geometry.x0 = -1 -1
geometry.eps = 0.25
geometry.omega = mgc
geometry.a0 = 1.0
geometry.require_mgc = true

damping.family = saturating
damping.require_h1 = true

solver.h = 0.015625
solver.horizon = 20.0
solver.record_stride = 4
solver.u0 = eigenmode 1 1 1.0

output.rasters = true
"""


def main():
    out_dir = pathlib.Path("out/baseline")
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_path = out_dir / "baseline.cfg"
    cfg_path.write_text(CONFIG)
    code = cli.main(["run", str(cfg_path), "--out", str(out_dir)])
    if code != 0:
        return code
    for line in (out_dir / "report.txt").read_text().splitlines():
        if line.startswith(("fit.", "mgc.", "law.passed")):
            print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
