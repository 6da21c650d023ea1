# The flip channel in action: train on labels corrupted at a known rate q
# and watch the per-type parameters p converge toward 1 - q while the
# classifier underneath learns the clean concept.

import numpy as np

from kgtyperr.ingest import SynthConfig, generate_synthetic_kg
from kgtyperr.network import DescriptionSpec, EncoderConfig
from kgtyperr.pipeline import bundle_from_synth, make_trainer
from kgtyperr.training import TrainConfig

q = 0.3
kg = generate_synthetic_kg(
    SynthConfig(
        n_entities=2000, n_types=2, noise_rate=q, seed=7,
        desc_noise=0.6, desc_signal=3.0, dev_fraction=0.05, test_fraction=0.0,
    )
)
bundle = bundle_from_synth(kg)

cfg = TrainConfig(batch_size=64, base_lr=1e-3, epochs=1, annotations_per_round=0,
                  use_vat=False, use_dynamic_lr=False, seed=0)
enc = EncoderConfig(n_types=2, description=DescriptionSpec(kind="file_vector", dim=16),
                    surface_hidden=4, relation_embed_dim=4, relation_min_count=0,
                    classifier_hidden=0, relu_output=True, seed=0)
trainer = make_trainer(bundle, cfg, enc)

s, s_hat = trainer.items_from_split(bundle.split.noisy_train, [])
print(f"planted flip rate q = {q}; a perfect channel estimate is p = {1 - q}")
print("epoch   p(type0)  p(type1)  dev accuracy")
for epoch in range(1, 31):
    trainer.run_epoch(s, s_hat, None)
    if epoch % 5 == 0:
        p = trainer.model.noise_p().data
        dev = trainer.evaluate_dev([trainer.make_noisy_item(a) for a in bundle.split.dev])
        print(f"{epoch:5d}   {p[0]:.3f}     {p[1]:.3f}     {dev['dev_acc']:.3f}")

p = trainer.model.noise_p().data
print(f"\nfinal p = {np.round(p, 3)}, deviation from 1-q: {np.abs(p - (1 - q)).max():.3f}")
