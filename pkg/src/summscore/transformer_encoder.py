"""Adapter exposing a Hugging Face encoder through the flat-parameter encoder contract.

Needs the optional ``torch`` and ``transformers`` packages. Weights are only
read from local directories; nothing is downloaded. Dropout is disabled
(the module stays in eval mode) so forward passes are deterministic and the
analytic gradient matches finite differences.
"""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any

import numpy as np

from .encoding import EncodingError, SequenceEncoder, TokenSequence
from .persist import read_manifest, write_manifest

try:
    import torch
    from torch.nn.utils import parameters_to_vector, vector_to_parameters
    from transformers import AutoModel, AutoTokenizer
except ImportError as exc:  # pragma: no cover - exercised only without the extra
    raise ImportError("the transformer encoder needs `pip install artifact[transformer]` (torch, transformers)") from exc


class _TokenizerAdapter:
    """Subword ids without specials, plus the special ids the layout needs."""

    kind = "hf"

    def __init__(self, hf_tokenizer: Any):
        self.hf = hf_tokenizer
        self.cls_id = hf_tokenizer.cls_token_id
        self.sep_id = hf_tokenizer.sep_token_id
        if self.cls_id is None or self.sep_id is None:
            raise ValueError("tokenizer must define CLS and SEP tokens")
        # RoBERTa-style tokenizers put two separators between the segments
        probe = hf_tokenizer("a", "b")["input_ids"]
        self.pair_sep = probe.count(self.sep_id) - 1

    def tokenize(self, text: str) -> list[int]:
        ids = self.hf(text, add_special_tokens=False)["input_ids"]
        if not ids:
            raise EncodingError("text is empty after normalization")
        return list(ids)


class TransformerCrossEncoder(SequenceEncoder):
    """CLS hidden state of a pretrained transformer."""

    kind = "transformer"

    def __init__(self, model: Any, hf_tokenizer: Any, max_len: int = 512, dtype: str = "float32"):
        self.dtype = dtype
        self.model = model.to(getattr(torch, dtype))
        self.model.eval()
        self.hf_tokenizer = hf_tokenizer
        self.tokenizer = _TokenizerAdapter(hf_tokenizer)
        limit = getattr(model.config, "max_position_embeddings", max_len)
        # RoBERTa reserves two position slots for padding offsets
        if getattr(model.config, "model_type", "") in ("roberta", "xlm-roberta", "camembert"):
            limit -= 2
        self.max_len = min(max_len, limit)
        self.dim = int(model.config.hidden_size)
        self._params = [p for p in self.model.parameters()]
        self._names = [n for n, _ in self.model.named_parameters()]

    @classmethod
    def from_pretrained(cls, path: str | Path, max_len: int = 512, dtype: str = "float32") -> TransformerCrossEncoder:
        path = Path(path)
        try:
            model = AutoModel.from_pretrained(path, local_files_only=True, add_pooling_layer=False)
        except TypeError:  # architectures without a pooler
            model = AutoModel.from_pretrained(path, local_files_only=True)
        tok = AutoTokenizer.from_pretrained(path, local_files_only=True)
        return cls(model, tok, max_len=max_len, dtype=dtype)

    @property
    def theta(self) -> np.ndarray:
        with torch.no_grad():
            return parameters_to_vector(self._params).double().cpu().numpy()

    def set_theta(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ValueError(f"parameter vector has shape {theta.shape}, expected ({self.n_params},)")
        with torch.no_grad():
            ref = self._params[0]
            vector_to_parameters(torch.from_numpy(theta).to(dtype=ref.dtype, device=ref.device), self._params)

    @property
    def n_params(self) -> int:
        return int(sum(p.numel() for p in self._params))

    def no_decay_mask(self) -> np.ndarray:
        parts = []
        for name, p in zip(self._names, self._params):
            skip = name.endswith("bias") or "LayerNorm" in name or "layer_norm" in name
            parts.append(np.full(p.numel(), skip, dtype=bool))
        return np.concatenate(parts)

    def forward_cached(self, seq: TokenSequence) -> tuple[np.ndarray, Any]:
        if len(seq) > self.max_len:
            raise EncodingError(f"sequence of {len(seq)} tokens exceeds encoder limit {self.max_len}")
        ids = torch.tensor([seq.token_ids], dtype=torch.long)
        with torch.enable_grad():
            hidden = self.model(input_ids=ids, attention_mask=torch.ones_like(ids)).last_hidden_state
            cls = hidden[0, seq.cls_index]
        return cls.detach().double().cpu().numpy(), cls

    def forward(self, seq: TokenSequence) -> np.ndarray:
        ids = torch.tensor([seq.token_ids], dtype=torch.long)
        with torch.no_grad():
            hidden = self.model(input_ids=ids, attention_mask=torch.ones_like(ids)).last_hidden_state
        return hidden[0, seq.cls_index].double().cpu().numpy()

    def backward(self, cache: Any, grad_out: np.ndarray, out: np.ndarray) -> None:
        for p in self._params:
            p.grad = None
        cache.backward(torch.from_numpy(np.asarray(grad_out, dtype=np.float64)).to(cache.dtype))
        offset = 0
        for p in self._params:
            n = p.numel()
            if p.grad is not None:
                out[offset : offset + n] += p.grad.detach().double().cpu().numpy().ravel()
            offset += n
            p.grad = None

    def copy(self) -> TransformerCrossEncoder:
        return TransformerCrossEncoder(copy.deepcopy(self.model), self.hf_tokenizer, self.max_len, self.dtype)

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.model.save_pretrained(directory / "hf")
        self.hf_tokenizer.save_pretrained(directory / "hf")
        write_manifest(directory / "manifest.txt",
                       {"kind": self.kind, "dim": self.dim, "max_len": self.max_len, "dtype": self.dtype})

    @classmethod
    def load(cls, directory: str | Path) -> TransformerCrossEncoder:
        directory = Path(directory)
        meta = read_manifest(directory / "manifest.txt")
        return cls.from_pretrained(directory / "hf", max_len=int(meta["max_len"]), dtype=meta.get("dtype", "float32"))
