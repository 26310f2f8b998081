"""Convert a Hugging Face ``BertForMaskedLM`` into a local model bundle.

Needs ``torch`` and ``transformers``; nothing else in the package does.

    python -m maskscrub.backends.export /path/to/hf-model /path/to/bundle
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np


def state_to_arrays(state, num_layers):
    def t(name):
        return state[name].detach().cpu().numpy().astype(np.float32)

    out = {
        "word_embeddings": t("bert.embeddings.word_embeddings.weight"),
        "position_embeddings": t("bert.embeddings.position_embeddings.weight"),
        "token_type_embeddings": t("bert.embeddings.token_type_embeddings.weight"),
        "emb_ln_g": t("bert.embeddings.LayerNorm.weight"),
        "emb_ln_b": t("bert.embeddings.LayerNorm.bias"),
        "head_w": t("cls.predictions.transform.dense.weight").T,
        "head_b": t("cls.predictions.transform.dense.bias"),
        "head_ln_g": t("cls.predictions.transform.LayerNorm.weight"),
        "head_ln_b": t("cls.predictions.transform.LayerNorm.bias"),
        "decoder_b": t("cls.predictions.bias"),
    }
    dec = state.get("cls.predictions.decoder.weight")
    if dec is not None and not np.array_equal(dec.detach().cpu().numpy(), out["word_embeddings"]):
        out["decoder_w"] = dec.detach().cpu().numpy().astype(np.float32)
    for i in range(num_layers):
        p = f"bert.encoder.layer.{i}."
        names = {
            "q": "attention.self.query", "k": "attention.self.key",
            "v": "attention.self.value", "ao": "attention.output.dense",
            "i": "intermediate.dense", "o": "output.dense",
        }
        for short, long in names.items():
            out[f"l{i}.{short}_w"] = t(p + long + ".weight").T
            out[f"l{i}.{short}_b"] = t(p + long + ".bias")
        out[f"l{i}.ao_ln_g"] = t(p + "attention.output.LayerNorm.weight")
        out[f"l{i}.ao_ln_b"] = t(p + "attention.output.LayerNorm.bias")
        out[f"l{i}.o_ln_g"] = t(p + "output.LayerNorm.weight")
        out[f"l{i}.o_ln_b"] = t(p + "output.LayerNorm.bias")
    return out


def export_model(model, vocab_tokens, out_dir, variant="bert"):
    """Write manifest, vocabulary and weights for an in-memory model."""
    cfg = model.config
    if getattr(cfg, "hidden_act", "gelu") != "gelu":
        raise ValueError("only exact-gelu BERT checkpoints are supported")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    arrays = state_to_arrays(model.state_dict(), cfg.num_hidden_layers)
    np.savez(out / "weights.npz", **arrays)
    (out / "vocab.txt").write_text("\n".join(vocab_tokens) + "\n", encoding="utf-8")
    manifest = {
        "format": "bert-mlm",
        "variant": variant,
        "vocab_file": "vocab.txt",
        "continuation_marker": "##",
        "unk_token": "[UNK]",
        "mask_token": "[MASK]",
        "sep_token": "[SEP]",
        "cls_token": "[CLS]",
        "pad_token": "[PAD]",
        "max_context": cfg.max_position_embeddings - 2,
        "embedding_dim": cfg.hidden_size,
        "weights": "weights.npz",
        "config": {
            "num_layers": cfg.num_hidden_layers,
            "num_heads": cfg.num_attention_heads,
            "layer_norm_eps": cfg.layer_norm_eps,
            "hidden_act": "gelu",
            "max_positions": cfg.max_position_embeddings,
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", help="Hugging Face model directory or hub id")
    ap.add_argument("out_dir")
    ap.add_argument("--variant", default=None)
    args = ap.parse_args(argv)

    from transformers import AutoTokenizer, BertForMaskedLM

    model = BertForMaskedLM.from_pretrained(args.source)
    tok = AutoTokenizer.from_pretrained(args.source)
    vocab = [t for t, _ in sorted(tok.get_vocab().items(), key=lambda kv: kv[1])]
    export_model(model.eval(), vocab, args.out_dir, args.variant or str(args.source))


if __name__ == "__main__":
    main()
