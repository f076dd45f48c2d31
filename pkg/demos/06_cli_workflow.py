"""Drive the whole pipeline through the command-line interface.

Everything in the library is reachable from the `gmdkit` command:
matrices go in as dense CSV files (with optional JSON shape sidecars),
results come out as JSON.  This script writes a small dataset to a
temporary directory and runs each subcommand on it.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from gmdkit.io import write_matrix
from gmdkit.simulate import SettingSpec, build_setting


def run(args):
    proc = subprocess.run([sys.executable, "-m", "gmdkit.cli", *args],
                          capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(proc.stderr)
    return json.loads(proc.stdout)


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    # a setting with a genuinely informative row structure, so the
    # structure screen below comes out significant
    data, _, _ = build_setting(
        SettingSpec(setting="III", n=60, p=30, h_variant="h1", seed=9)
    )
    for name, M in [("x", data.X), ("h", data.H), ("q", data.Q),
                    ("y", data.y)]:
        write_matrix(str(tmp / f"{name}.csv"), M)
    mats = ["--x", str(tmp / "x.csv"), "--h", str(tmp / "h.csv"),
            "--q", str(tmp / "q.csv")]

    out = run(["decompose", *mats])
    print("decompose: rank", out["rank"], "leading value",
          round(out["sigma"][0], 3))

    out = run(["fit", "gmdr", *mats, "--y", str(tmp / "y.csv")])
    print("fit: selected components", out["selected"],
          "in-sample relative error", round(out["rmse"], 3))

    out = run(["infer", *mats, "--y", str(tmp / "y.csv"), "--fdr", "0.1"])
    print("infer: discoveries at q<=0.1:", sum(out["discoveries"]))

    out = run(["structtest", "krv", "--structure", str(tmp / "h.csv"),
               "--x", str(tmp / "x.csv"), "--b", "199"])
    print("structtest: p =", out["p_value"])

    out = run(["robust-tau", *mats, "--y", str(tmp / "y.csv")])
    print("robust-tau: tau =", round(out["tau_hat"], 3))

    out = run(["simulate", "--setting", "I", "--r2", "0.6", "--n", "40",
               "--p", "20", "--reps", "3", "--methods", "gmdi-d",
               "--b", "99"])
    print("simulate: mean power",
          round(out["summary"]["gmdi-d"]["power"]["mean"], 3))
