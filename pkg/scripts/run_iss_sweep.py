#!/usr/bin/env python3
"""Disturbance-scale sweep: pulse forcing on [0, 5], recovery to t = 30.

Produces one trace per scale plus the aggregated gain report showing the
asymptotic energy level against the disturbance scale.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from dampedwave import cli

CONFIG = """\
geometry.shape = rectangle
geometry.x0 = -1 -1
geometry.eps = 0.25
geometry.omega = mgc
geometry.a0 = 1.0

damping.family = saturating

solver.h = 0.015625
solver.horizon = 30.0
solver.record_stride = 4
solver.u0 = eigenmode 1 1 1.0

disturbance.d_time = pulse
disturbance.d_t0 = 0.0
disturbance.d_t1 = 5.0
disturbance.d_space = gaussian
disturbance.d_center = 0.7 0.7
disturbance.d_width = 0.15
disturbance.d_amplitude = 1.0

disturbance.e_time = pulse
disturbance.e_t0 = 0.0
disturbance.e_t1 = 5.0
disturbance.e_space = gaussian
disturbance.e_center = 0.3 0.4
disturbance.e_width = 0.2
disturbance.e_amplitude = 0.5

disturbance.scales = 0 0.5 1 2
analysis.fit_t0 = 10.0
analysis.fit_t1 = 30.0
"""


def main():
    out_dir = pathlib.Path("out/iss_sweep")
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_path = out_dir / "sweep.cfg"
    cfg_path.write_text(CONFIG)
    return cli.main(["sweep", str(cfg_path), "--out", str(out_dir), "--workers", "4"])


if __name__ == "__main__":
    sys.exit(main())
