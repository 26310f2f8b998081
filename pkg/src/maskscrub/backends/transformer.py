"""BERT-style masked LM evaluated with numpy from a local weight file.

Weights are stored as a flat ``.npz`` archive with the key layout written
by :mod:`maskscrub.backends.export`. Linear weights are ``(in, out)``.
"""

from __future__ import annotations

import numpy as np

from .. import _accel
from ..tokenizer import SubwordVocabulary
from .base import MlmBackend


class BertConfig:
    def __init__(self, num_layers, num_heads, layer_norm_eps=1e-12, hidden_act="gelu",
                 max_positions=512):
        self.num_layers = int(num_layers)
        self.num_heads = int(num_heads)
        self.layer_norm_eps = float(layer_norm_eps)
        if hidden_act != "gelu":
            raise ValueError(f"unsupported activation {hidden_act!r}")
        self.hidden_act = hidden_act
        self.max_positions = int(max_positions)

    @classmethod
    def from_dict(cls, d):
        return cls(d["num_layers"], d["num_heads"], d.get("layer_norm_eps", 1e-12),
                   d.get("hidden_act", "gelu"), d.get("max_positions", 512))


class BertBackend(MlmBackend):

    def __init__(self, vocab: SubwordVocabulary, weights, config: BertConfig,
                 identity: str = "bert"):
        super().__init__()
        if vocab.cls_id is None:
            raise ValueError("BERT bundles need a [CLS]-style token")
        self.vocab = vocab
        self.config = config
        self.identity = identity
        self.w = {k: np.asarray(v, dtype=np.float64) for k, v in dict(weights).items()}
        word = self.w["word_embeddings"]
        if word.shape[0] != len(vocab):
            raise ValueError(f"embedding rows ({word.shape[0]}) != vocabulary size ({len(vocab)})")
        self.embedding_dim = word.shape[1]
        if self.embedding_dim % config.num_heads:
            raise ValueError("hidden size not divisible by head count")
        # [CLS] and [SEP] wrap every query
        self.max_context = min(config.max_positions, self.w["position_embeddings"].shape[0]) - 2
        for arr in self.w.values():
            arr.setflags(write=False)

    @classmethod
    def from_files(cls, vocab, weights_path, config: dict, identity="bert"):
        with np.load(weights_path) as z:
            weights = {k: z[k] for k in z.files}
        return cls(vocab, weights, BertConfig.from_dict(config), identity)

    def _ln(self, x, name):
        return _accel.layer_norm(x, self.w[name + "_g"], self.w[name + "_b"],
                                 self.config.layer_norm_eps)

    def _layer(self, h, i):
        w = self.w
        p = f"l{i}."
        s, d = h.shape
        nh = self.config.num_heads
        hd = d // nh
        q = (h @ w[p + "q_w"] + w[p + "q_b"]).reshape(s, nh, hd).transpose(1, 0, 2)
        k = (h @ w[p + "k_w"] + w[p + "k_b"]).reshape(s, nh, hd).transpose(1, 0, 2)
        v = (h @ w[p + "v_w"] + w[p + "v_b"]).reshape(s, nh, hd).transpose(1, 0, 2)
        att = _accel.softmax(q @ k.transpose(0, 2, 1) / np.sqrt(hd))
        ctx = (att @ v).transpose(1, 0, 2).reshape(s, d)
        h = self._ln(ctx @ w[p + "ao_w"] + w[p + "ao_b"] + h, p + "ao_ln")
        inter = _accel.gelu(h @ w[p + "i_w"] + w[p + "i_b"])
        return self._ln(inter @ w[p + "o_w"] + w[p + "o_b"] + h, p + "o_ln")

    def logits(self, tokens, target) -> np.ndarray:
        w = self.w
        ids = np.array([self.vocab.cls_id, *tokens, self.vocab.sep_id], dtype=np.int64)
        h = (w["word_embeddings"][ids] + w["position_embeddings"][:ids.size]
             + w["token_type_embeddings"][0])
        h = self._ln(h, "emb_ln")
        for i in range(self.config.num_layers):
            h = self._layer(h, i)
        x = h[target + 1]
        x = self._ln(_accel.gelu(x @ w["head_w"] + w["head_b"]), "head_ln")
        decoder = w.get("decoder_w", w["word_embeddings"])
        return decoder @ x + w["decoder_b"]

    def _full_distribution(self, tokens, target):
        return _accel.softmax(self.logits(tokens, target))

    def embed(self, token_id: int) -> np.ndarray:
        return self.w["word_embeddings"][token_id]

    def embed_many(self, token_ids) -> np.ndarray:
        return self.w["word_embeddings"][np.asarray(token_ids, dtype=np.int64)]
