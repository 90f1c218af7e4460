"""
Recovering input-dependent noise
================================

The log-variance head learns how noisy the target is at each input. Here the
noise standard deviation grows linearly from 0.05 at x = 0 to 0.15 at x = 1, and
we check how closely the trained network tracks it.
"""
import numpy as np

from mcpower.data import Standardizer, split, standardize_split
from mcpower.model import NetworkConfig
from mcpower.synthetic import heteroscedastic_sine, noise_std_sine
from mcpower.train import TrainConfig, train
from mcpower.uq import McConfig, summarize

x, y = heteroscedastic_sine(4000, seed=0)
sp = split(x, y, (0.8, 0.1, 0.1), "shuffled", seed=0)
st = Standardizer.fit(sp.x_train, sp.y_train, ["x"])

# Small batches give enough optimizer steps for the variance head to settle.
net, history = train(standardize_split(sp, st), NetworkConfig(input_dim=1, hidden_width=64),
                     TrainConfig(epochs=300, batch_size=32))
print("learned dropout p per layer:", np.round(net.dropout_p, 4))

grid = np.linspace(0, 1, 11)[:, None]
s = summarize(net, grid, McConfig(passes=100), st)
print(f"{'x':>5} {'true std':>9} {'aleatoric':>10} {'epistemic':>10}")
for xi, t, a, e in zip(grid[:, 0], noise_std_sine(grid[:, 0]), s.aleatoric_std, s.epistemic_std):
    print(f"{xi:5.1f} {t:9.3f} {a:10.3f} {e:10.3f}")
