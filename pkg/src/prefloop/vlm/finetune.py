"""Joint preference + inverse-dynamics fine-tuning of the adapter stack.

Each update samples a minibatch of human-labeled segment pairs and a
minibatch of replay transitions, recomputes the (noisy) frozen embeddings,
and takes one Adam step on the adapters and the inverse-dynamics head.
Gradients are hand-assembled: the pairwise logistic loss differentiates
through per-step cosines, the dynamics term through the prediction head.
"""

from __future__ import annotations

import numpy as np

from prefloop.numcore import (
    adam_init,
    adam_step,
    clip_grad_norm,
    mlp_backward,
    mlp_forward,
    mlp_forward_cached,
    param_arrays,
)
from prefloop.numcore.mlp import add_grads, grad_arrays, zeros_like_params
from prefloop.vlm.adapters import Adapters
from prefloop.vlm.encoders import FrozenEncoders


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_sigmoid(z):
    return np.where(z >= 0, -np.log1p(np.exp(-np.abs(z))),
                    z - np.log1p(np.exp(-np.abs(z))))


class VlmTrainer:
    def __init__(self, encoders: FrozenEncoders, adapters: Adapters, head,
                 language_token: int, learning_rate: float = 3e-4,
                 id_weight: float = 1.0, pref_minibatch: int = 64,
                 trans_minibatch: int = 128,
                 rng: np.random.Generator | None = None):
        self.encoders = encoders
        self.adapters = adapters
        self.head = head
        self.language_token = language_token
        self.id_weight = id_weight
        self.pref_minibatch = pref_minibatch
        self.trans_minibatch = trans_minibatch
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self._params = (
            param_arrays(adapters.language)
            + param_arrays(adapters.image)
            + param_arrays(head)
        )
        self._n_lang = len(param_arrays(adapters.language))
        self._n_img = len(param_arrays(adapters.image))
        self.opt = adam_init(self._params, learning_rate=learning_rate)

    def finetune(self, pref_data: list, transitions: dict | None,
                 steps: int) -> dict:
        """Run exactly ``steps`` updates; returns a status + loss trace dict."""
        have_pref = len(pref_data) > 0
        have_id = (
            self.id_weight > 0.0
            and transitions is not None
            and len(transitions["actions"]) > 0
        )
        if not have_pref and not have_id:
            return {"status": "noop", "pref_loss": [], "id_loss": [],
                    "warning": "no human preferences and no dynamics objective"}
        pref_trace, id_trace = [], []
        for _ in range(steps):
            pref_loss, id_loss = self._step(pref_data if have_pref else None,
                                            transitions if have_id else None)
            pref_trace.append(pref_loss)
            id_trace.append(id_loss)
        return {"status": "ok", "pref_loss": pref_trace, "id_loss": id_trace}

    def _step(self, pref_data, transitions) -> tuple[float, float]:
        pref_loss_val, id_loss_val, grads = self.loss_and_grads(pref_data,
                                                                transitions)
        clip_grad_norm(grads, 10.0)
        adam_step(self.opt, self._params, grads)
        return pref_loss_val, id_loss_val

    def loss_and_grads(self, pref_data, transitions):
        """One minibatch evaluation: (pref_loss, id_loss, flat grad list).

        Minibatches are only drawn (consuming the rng) when the data exceeds
        the configured minibatch size, so small-batch evaluations are
        deterministic.
        """
        lang_grads = zeros_like_params(param_arrays(self.adapters.language))
        img_grads = zeros_like_params(param_arrays(self.adapters.image))
        head_grads = zeros_like_params(param_arrays(self.head))

        img_inputs = []
        img_upstream_parts = []

        pref_loss_val = 0.0
        pref_block = None
        if pref_data:
            if len(pref_data) > self.pref_minibatch:
                sel = self.rng.choice(len(pref_data), size=self.pref_minibatch,
                                      replace=False)
                batch = [pref_data[int(i)] for i in sel]
            else:
                batch = list(pref_data)
            pref_block = self._prepare_pref(batch)
            img_inputs.append(pref_block["image_embeds"])

        id_block = None
        if transitions is not None and len(transitions["actions"]) > 0:
            n = len(transitions["actions"])
            if n > self.trans_minibatch:
                sel = self.rng.integers(0, n, size=self.trans_minibatch)
            else:
                sel = np.arange(n)
            obs = transitions["observations"][sel]
            obs_next = transitions["next_observations"][sel]
            actions = transitions["actions"][sel]
            e_t = self.encoders.encode_image_rows(obs)
            e_t1 = self.encoders.encode_image_rows(obs_next)
            id_block = {"count": len(sel), "actions": actions}
            img_inputs.append(e_t)
            img_inputs.append(e_t1)

        if not img_inputs:
            raise ValueError("nothing to train on: no preferences, no transitions")
        all_img_in = np.concatenate(img_inputs, axis=0)
        img_out, img_cache = mlp_forward_cached(self.adapters.image, all_img_in)

        offset = 0
        if pref_block is not None:
            n_pref = pref_block["image_embeds"].shape[0]
            v = img_out[:n_pref]
            pref_loss_val, g_v, g_u = self._pref_grads(pref_block, v)
            img_upstream_parts.append(g_v)
            # language adapter: single embedding row feeds every pair
            _, lang_cache = mlp_forward_cached(self.adapters.language,
                                               pref_block["lang_embed"])
            lg, _ = mlp_backward(self.adapters.language, lang_cache, g_u)
            add_grads(lang_grads, grad_arrays(lg))
            offset = n_pref

        id_loss_val = 0.0
        if id_block is not None:
            b = id_block["count"]
            x_t = img_out[offset:offset + b]
            x_t1 = img_out[offset + b:offset + 2 * b]
            head_in = np.concatenate([x_t, x_t1], axis=1)
            pred, head_cache = mlp_forward_cached(self.head, head_in)
            err = pred - id_block["actions"]
            id_loss_val = float(np.mean(np.sum(err * err, axis=1)))
            g_pred = (2.0 / b) * err * self.id_weight
            hg, g_head_in = mlp_backward(self.head, head_cache, g_pred)
            add_grads(head_grads, grad_arrays(hg))
            d = x_t.shape[1]
            img_upstream_parts.append(g_head_in[:, :d])
            img_upstream_parts.append(g_head_in[:, d:])

        upstream = np.concatenate(img_upstream_parts, axis=0)
        ig, _ = mlp_backward(self.adapters.image, img_cache, upstream)
        add_grads(img_grads, grad_arrays(ig))

        return pref_loss_val, id_loss_val, lang_grads + img_grads + head_grads

    def _prepare_pref(self, batch) -> dict:
        T = len(batch[0].pair[0])
        obs = np.concatenate(
            [np.concatenate([d.pair[0].observations, d.pair[1].observations])
             for d in batch],
            axis=0,
        )
        labels = np.array([d.label for d in batch])
        return {
            "image_embeds": self.encoders.encode_image_rows(obs),
            "lang_embed": self.encoders.encode_language(self.language_token),
            "labels": labels,
            "pairs": len(batch),
            "T": T,
        }

    def _pref_grads(self, block, v: np.ndarray):
        """Loss and gradients wrt adapted image rows v and language row u."""
        u = mlp_forward(self.adapters.language, block["lang_embed"])
        B, T = block["pairs"], block["T"]
        nu = float(np.linalg.norm(u))
        nv = np.linalg.norm(v, axis=1)
        cos = (v @ u) / (nu * nv)
        returns = cos.reshape(B, 2, T).sum(axis=2)
        z = returns[:, 1] - returns[:, 0]
        y1 = block["labels"][:, 1]
        y0 = block["labels"][:, 0]
        loss = float(np.mean(-y0 * _log_sigmoid(-z) - y1 * _log_sigmoid(z)))
        dz = (_sigmoid(z) - y1) / B               # dL/dz per pair
        side_sign = np.array([-1.0, 1.0])
        coef = (dz[:, None] * side_sign).reshape(B * 2)  # dL/dR per (pair, side)
        coef_rows = np.repeat(coef, T)
        # d cos / dv and d cos / du
        g_v = coef_rows[:, None] * (u / (nu * nv[:, None]) -
                                    cos[:, None] * v / (nv[:, None] ** 2))
        g_u = (coef_rows[:, None] * (v / (nu * nv[:, None]) -
                                     cos[:, None] * u / (nu * nu))).sum(axis=0)
        return loss, g_v, g_u
