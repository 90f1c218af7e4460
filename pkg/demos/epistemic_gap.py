"""
Epistemic uncertainty where data is scarce
==========================================

Training inputs avoid the interval (0.4, 0.6). Dropout draws disagree most
there, and per-bin epistemic spread ranks inversely with how many samples a
bin holds.
"""
import numpy as np

from mcpower.data import Standardizer, split, standardize_split
from mcpower.evaluate import binned_uncertainty
from mcpower.model import NetworkConfig
from mcpower.synthetic import gap_probe, gap_sine
from mcpower.train import TrainConfig, train
from mcpower.uq import McConfig, summarize

x, y = gap_sine(4000, seed=0)
sp = split(x, y, (0.8, 0.1, 0.1), "shuffled", seed=0)
st = Standardizer.fit(sp.x_train, sp.y_train, ["x"])
net, _ = train(standardize_split(sp, st), NetworkConfig(input_dim=1, hidden_width=64, init_seed=1),
               TrainConfig(epochs=200, batch_size=32, seed=1))

grid = np.linspace(0, 1, 201)[:, None]
s = summarize(net, grid, McConfig(passes=100, seed=1), st)
gap = (grid[:, 0] > 0.45) & (grid[:, 0] < 0.55)
print(f"mean epistemic std  in gap: {s.epistemic_std[gap].mean():.4f}")
print(f"mean epistemic std outside: {s.epistemic_std[~gap].mean():.4f}")

# Probe inputs follow the (unrestricted) training density, so bin counts vary.
probe = gap_probe(2000, seed=1)
rep = binned_uncertainty(summarize(net, probe, McConfig(passes=100, seed=1), st), probe[:, 0], 0.05)
print(rep.table[["bin_center", "frequency", "mean_epistemic_std"]].round(4).to_string(index=False))
print(f"Spearman(frequency, epistemic std) = {rep.rho:.2f}")
