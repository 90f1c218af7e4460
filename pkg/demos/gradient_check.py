"""
Checking the hand-written backward pass
=======================================

Central differences on the full training objective (one relaxed-dropout pass
with frozen noise, plus the dropout regularizer) against the analytic gradient.
"""
import numpy as np

from mcpower.model import NetworkConfig, init_network
from mcpower.numerics import RngStream, grad_check
from mcpower.train import loss_and_grads, total_loss

for seed in range(5):
    rng = np.random.default_rng(seed)
    net = init_network(NetworkConfig(input_dim=4, hidden_width=16, init_seed=seed, characteristic_length_sq=1e-2))
    x, y = rng.normal(size=(20, 4)), rng.normal(size=20)
    noise = [RngStream(seed, i).uniform((20, 16)) for i in range(4)]
    _, grads = loss_and_grads(net, x, y, n_train=100, noise=noise)
    analytic = np.concatenate([g.ravel() for g in grads.values()])

    def f(flat):
        net.set_flat(flat)
        return total_loss(net, x, y, 100, noise=noise)

    err = grad_check(f, net.get_flat(), analytic)
    print(f"seed {seed}: {net.n_params} parameters, max relative error {err:.2e}")
