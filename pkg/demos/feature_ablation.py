"""
Which inputs matter?
====================

The synthetic generator lets turbulence intensity shift the effective wind
speed, so adding TI to the inputs should lower the test error.
"""
from pathlib import Path

from mcpower.data import FeatureSpec, clean, load_scada
from mcpower.evaluate import ablation
from mcpower.model import NetworkConfig
from mcpower.train import TrainConfig
from mcpower.uq import McConfig

root = Path(__file__).resolve().parents[1]
records = clean(load_scada(root / "data/synthetic_scada.csv").records)
sets = [FeatureSpec.parse(s) for s in ("WS", "WS,TI", "WS,TI,G", "WS,TI,G,SHEAR,T")]
rep = ablation(records, sets, runs=2, net_config=NetworkConfig(input_dim=1, hidden_width=16),
               train_config=TrainConfig(epochs=150, batch_size=32), mc=McConfig(passes=50))
print(rep.table.round(2).to_string(index=False))
