/// Python script written next to each summary. Run it from that directory
/// (`python3 plot.py`); it needs numpy and matplotlib and writes
/// `errors.png` and `spectra.png`.
pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Error histories and spectra of one aa-admm experiment."""
import json
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = os.path.dirname(os.path.abspath(sys.argv[0]))
with open(os.path.join(here, "summary.json")) as f:
    summary = json.load(f)
kind = summary["problem"]["kind"]

fig, ax = plt.subplots(figsize=(7, 4.5))
for s in summary["schemes"]:
    data = np.genfromtxt(os.path.join(here, s["trace_file"]), delimiter=",", names=True)
    errors = np.atleast_1d(data["error_norm"])
    label = s["label"]
    if s.get("beta"):
        label += " beta=" + ",".join("%.3f" % b for b in s["beta"])
    ax.semilogy(np.atleast_1d(data["k"]), np.maximum(errors, 1e-300), label=label)
ax.set_xlabel("iteration k")
ax.set_ylabel("||x_k - x*||")
ax.set_title(kind)
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(os.path.join(here, "errors.png"), dpi=150)

fig, ax = plt.subplots(figsize=(5.5, 5.5))
t = np.linspace(0, 2 * np.pi, 400)
ax.plot(np.cos(t), np.sin(t), "k:", lw=0.8)
files = [("q'", summary["spectrum"]["file"])]
files += [("Psi' " + s["label"], s["spectrum_file"]) for s in summary["schemes"] if s.get("spectrum_file")]
for name, path in files:
    eig = np.genfromtxt(os.path.join(here, path), delimiter=",", names=True)
    ax.scatter(np.atleast_1d(eig["re"]), np.atleast_1d(eig["im"]), s=6, label=name)
ax.set_aspect("equal")
ax.set_xlabel("Re")
ax.set_ylabel("Im")
ax.set_title(kind + " spectra")
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(os.path.join(here, "spectra.png"), dpi=150)
"#;
