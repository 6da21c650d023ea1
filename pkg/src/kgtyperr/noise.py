"""Per-type label-flip channel.

Each type i carries one learnable probability p_i that the observed label
agrees with the model's clean belief. The channel output is
``p * z + (1 - p) * (1 - z)``; p is kept in [P_FLOOR, 1] by projection
after every optimizer step (a squashing reparameterization cannot
represent the exact 1.0 initialization).
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad

P_FLOOR = 0.01
P_INIT = 1.0
NOISE_PARAM = "noise_p"


def init_noise_params(store: ad.ParamStore, n_types: int) -> ad.Tensor:
    return store.add(NOISE_PARAM, np.full(n_types, P_INIT))


def apply_noise(z_probs: ad.Tensor, p: ad.Tensor) -> ad.Tensor:
    """Flip-channel output, differentiable in both inputs.

    Broadcasts a (T,) parameter vector across a (batch, T) probability
    matrix; a plain (T,) vector also works.
    """
    one = 1.0
    return ad.add(ad.mul(p, z_probs), ad.mul(ad.add(one, ad.neg(p)), ad.add(one, ad.neg(z_probs))))


def apply_noise_np(z: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Plain-array twin of apply_noise for inference paths."""
    return p * z + (1.0 - p) * (1.0 - z)


def project_noise_params(p: ad.Tensor | np.ndarray) -> None:
    """Clamp p into [P_FLOOR, 1] in place."""
    data = p.data if isinstance(p, ad.Tensor) else p
    np.clip(data, P_FLOOR, 1.0, out=data)
