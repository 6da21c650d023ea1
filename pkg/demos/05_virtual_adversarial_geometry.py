# Virtual adversarial smoothing: find the input-space direction the model
# is most sensitive to, then penalize the prediction shift along it.

import numpy as np

from kgtyperr import autodiff as ad
from kgtyperr.vat import VatConfig, adversarial_direction, multilabel_kl_np, vat_penalty

rng = np.random.default_rng(0)
w = rng.normal(size=8)


def predict(emb: ad.Tensor) -> ad.Tensor:
    # one-output linear model: sigma(w . e)
    return ad.sigmoid(ad.matmul(emb, ad.constant(w.reshape(-1, 1))))


cfg = VatConfig(epsilon=1.0, lam=0.1)
e = rng.normal(size=8)

# For a linear model the worst direction is the weight vector itself; the
# power iteration discovers that from a random start.
r = adversarial_direction(e, predict, cfg, rng)
cos = float(np.dot(r, w) / (np.linalg.norm(r) * np.linalg.norm(w)))
print(f"|cos(direction, w)| = {abs(cos):.4f}  (norm {np.linalg.norm(r):.6f} = epsilon)")

# The penalty is the divergence between predictions at e and e + r.
pen = vat_penalty(e, predict, cfg, rng)
print(f"penalty at epsilon=1: {float(pen.data.max()):.4f}")

# A random direction of the same length moves the prediction less.
random_dir = rng.normal(size=8)
random_dir *= cfg.epsilon / np.linalg.norm(random_dir)


def probs_at(x):
    return predict(ad.constant(x[None, :])).data[0]


base = probs_at(e)
print(f"KL along adversarial direction: {multilabel_kl_np(base, probs_at(e + r)):.4f}")
print(f"KL along random direction:      {multilabel_kl_np(base, probs_at(e + random_dir)):.4f}")

# Shrinking epsilon shrinks the penalty toward zero smoothly.
for eps in (1.0, 0.1, 0.01, 1e-4):
    pen = vat_penalty(e, predict, VatConfig(epsilon=eps, lam=0.1), np.random.default_rng(1))
    print(f"  epsilon {eps:>7}: penalty {float(pen.data.max()):.2e}")
