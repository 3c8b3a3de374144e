"""Tokenization, input layout and the sequence-encoder contract.

An encoder maps a laid-out :class:`TokenSequence` to the hidden vector at the
leading CLS position. Encoders expose their parameters as one flat float64
vector so the optimizer and gradient checks can treat every backend alike.
"""

from __future__ import annotations

import abc
import hashlib
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .dimensions import InputMode
from .persist import read_manifest, write_manifest

CLS_ID = 0
SEP_ID = 1
PAD_ID = 2
UNK_ID = 3
_N_SPECIAL = 4

DEFAULT_MAX_LEN = 512
DEFAULT_BUCKETS = 4096

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class EncodingError(ValueError):
    pass


class SummaryTooLong(EncodingError):
    pass


class HashTokenizer:
    """Lowercasing word/punctuation tokenizer over a hashed vocabulary.

    Ids 0-3 are the specials ([CLS], [SEP], [PAD], [UNK]); every surface form
    hashes into one of the remaining ``buckets - 4`` ids.
    """

    kind = "hash"

    def __init__(self, buckets: int = DEFAULT_BUCKETS):
        if buckets <= _N_SPECIAL:
            raise ValueError("bucket count must exceed the number of special ids")
        self.buckets = buckets
        self.cls_id = CLS_ID
        self.sep_id = SEP_ID
        self.pair_sep = 1
        self._surface: dict[int, str] = {}

    @staticmethod
    def pieces(text: str) -> list[str]:
        text = unicodedata.normalize("NFKC", text).lower()
        return _TOKEN_RE.findall(text)

    def token_id(self, piece: str) -> int:
        digest = hashlib.blake2b(piece.encode("utf-8"), digest_size=8).digest()
        return _N_SPECIAL + int.from_bytes(digest, "little") % (self.buckets - _N_SPECIAL)

    def tokenize(self, text: str) -> list[int]:
        pieces = self.pieces(text)
        if not pieces:
            raise EncodingError("text is empty after normalization")
        ids = []
        for p in pieces:
            i = self.token_id(p)
            self._surface.setdefault(i, p)
            ids.append(i)
        return ids

    def surface(self, token_id: int) -> str:
        specials = {CLS_ID: "[CLS]", SEP_ID: "[SEP]", PAD_ID: "[PAD]", UNK_ID: "[UNK]"}
        if token_id in specials:
            return specials[token_id]
        return self._surface.get(token_id, f"<{token_id}>")


@dataclass(frozen=True)
class TokenSequence:
    token_ids: tuple[int, ...]
    cls_index: int
    sep_indices: tuple[int, ...]
    mode: InputMode
    truncated: int = 0  # first-segment tokens dropped to fit

    def __len__(self) -> int:
        return len(self.token_ids)


def build_input(
    document_ids: list[int] | tuple[int, ...] | None,
    summary_ids: list[int] | tuple[int, ...],
    mode: InputMode,
    max_len: int = DEFAULT_MAX_LEN,
    *,
    cls_id: int = CLS_ID,
    sep_id: int = SEP_ID,
    pair_sep: int = 1,
    reserved: int = 1,
) -> TokenSequence:
    """Lay out ``[CLS] doc [SEP] summary [SEP]`` or ``[CLS] summary [SEP]``.

    The document tail gives way when the pair is too long; the summary is
    never cut. In paired mode ``reserved`` slots are withheld from the
    document budget so tokenizers that double the pair separator fit too.
    """
    if not summary_ids:
        raise EncodingError("summary has no tokens")
    summary_ids = tuple(summary_ids)
    if mode is InputMode.SUMMARY_ONLY:
        if len(summary_ids) + 2 > max_len:
            raise SummaryTooLong(f"summary too long: {len(summary_ids)} tokens + 2 specials > max_len {max_len}")
        ids = (cls_id,) + summary_ids + (sep_id,)
        return TokenSequence(ids, 0, (len(ids) - 1,), mode)

    if not document_ids:
        raise EncodingError("paired input needs a non-empty document")
    budget = max_len - len(summary_ids) - (2 + pair_sep) - reserved
    if budget < 1:
        raise SummaryTooLong(
            f"summary too long: {len(summary_ids)} tokens leave no room for the document within max_len {max_len}"
        )
    doc = tuple(document_ids[:budget])
    ids = (cls_id,) + doc + (sep_id,) * pair_sep + summary_ids + (sep_id,)
    first_sep = 1 + len(doc)
    seps = tuple(range(first_sep, first_sep + pair_sep)) + (len(ids) - 1,)
    return TokenSequence(ids, 0, seps, mode, truncated=len(document_ids) - len(doc))


class SequenceEncoder(abc.ABC):
    """Contract for CLS-pooled encoders with a flat parameter vector."""

    kind: str
    dim: int
    max_len: int
    tokenizer: Any

    @property
    @abc.abstractmethod
    def theta(self) -> np.ndarray:
        """Flat view/copy of all parameters."""

    @abc.abstractmethod
    def set_theta(self, theta: np.ndarray) -> None: ...

    @abc.abstractmethod
    def forward_cached(self, seq: TokenSequence) -> tuple[np.ndarray, Any]:
        """Return the CLS vector plus whatever :meth:`backward` needs."""

    @abc.abstractmethod
    def backward(self, cache: Any, grad_out: np.ndarray, out: np.ndarray) -> None:
        """Accumulate d(scalar)/d(theta) into ``out`` given d(scalar)/d(output)."""

    @abc.abstractmethod
    def copy(self) -> SequenceEncoder: ...

    @abc.abstractmethod
    def save(self, directory: str | Path) -> None: ...

    def forward(self, seq: TokenSequence) -> np.ndarray:
        return self.forward_cached(seq)[0]

    @property
    def n_params(self) -> int:
        return int(self.theta.size)

    # parameters that are biases; excluded from weight decay
    def no_decay_mask(self) -> np.ndarray:
        return np.zeros(self.n_params, dtype=bool)


class TinyTestEncoder(SequenceEncoder):
    """Desk-scale encoder: hashed embeddings, position-weighted mean pooling, tanh projection.

    For a sequence ``t_0..t_{L-1}``::

        m = (1/L) * sum_i q[i] * E[t_i]
        v = tanh(U @ m + c)

    ``v`` stands in for the CLS hidden state. Parameters are ``E`` (buckets x
    dim), ``q`` (max_len), ``U`` (dim x dim) and ``c`` (dim), all views into
    one flat vector.

    Parameters are stored multiplied by ``param_scale`` and divided back out
    in the forward pass. Adam moves each stored coordinate by about ``lr`` per
    step, so the encoder function moves by about ``lr / param_scale``: a
    stiff encoder next to a freshly initialised head, as when fine-tuning a
    pretrained model.
    """

    kind = "tiny"

    def __init__(
        self,
        dim: int = 16,
        buckets: int = DEFAULT_BUCKETS,
        max_len: int = DEFAULT_MAX_LEN,
        seed: int = 0,
        init_gain: float = 4.0,
        param_scale: float = 30.0,
    ):
        if param_scale <= 0:
            raise ValueError("param_scale must be positive")
        self.dim = dim
        self.param_scale = param_scale
        self.buckets = buckets
        self.max_len = max_len
        self.seed = seed
        self.init_gain = init_gain
        self.tokenizer = HashTokenizer(buckets)
        self._shapes = [(buckets, dim), (max_len,), (dim, dim), (dim,)]
        sizes = [int(np.prod(s)) for s in self._shapes]
        self._offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self._theta = np.zeros(int(self._offsets[-1]), dtype=np.float64)
        self._bind_views()
        rng = np.random.default_rng(seed)
        self.E[...] = rng.standard_normal((buckets, dim)) * param_scale
        self.q[...] = param_scale
        self.U[...] = rng.standard_normal((dim, dim)) * (init_gain / np.sqrt(dim)) * param_scale
        self.c[...] = rng.standard_normal(dim) * 0.1 * param_scale

    def _bind_views(self) -> None:
        views = []
        for shape, lo, hi in zip(self._shapes, self._offsets[:-1], self._offsets[1:]):
            views.append(self._theta[lo:hi].reshape(shape))
        self.E, self.q, self.U, self.c = views

    @property
    def theta(self) -> np.ndarray:
        return self._theta

    def set_theta(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != self._theta.shape:
            raise ValueError(f"parameter vector has shape {theta.shape}, expected {self._theta.shape}")
        self._theta[...] = theta

    def no_decay_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_params, dtype=bool)
        mask[self._offsets[3] : self._offsets[4]] = True
        return mask

    def forward_cached(self, seq: TokenSequence) -> tuple[np.ndarray, Any]:
        ids = np.asarray(seq.token_ids, dtype=np.intp)
        n = ids.size
        if n > self.max_len:
            raise EncodingError(f"sequence of {n} tokens exceeds encoder limit {self.max_len}")
        inv = 1.0 / self.param_scale
        rows = self.E[ids] * inv
        w = self.q[:n] * inv
        m = (w @ rows) / n
        U = self.U * inv
        v = np.tanh(U @ m + self.c * inv)
        return v, (ids, rows, w, m, U, v)

    def backward(self, cache: Any, grad_out: np.ndarray, out: np.ndarray) -> None:
        ids, rows, w, m, U, v = cache
        n = ids.size
        inv = 1.0 / self.param_scale
        o = self._offsets
        gz = grad_out * (1.0 - v * v) * inv
        out[o[2] : o[3]] += np.outer(gz, m).ravel()
        out[o[3] : o[4]] += gz
        gm = U.T @ gz
        out[o[1] : o[1] + n] += (rows @ gm) / n
        gE = out[o[0] : o[1]].reshape(self.buckets, self.dim)
        np.add.at(gE, ids, np.outer(w, gm) / n)

    def copy(self) -> TinyTestEncoder:
        clone = object.__new__(TinyTestEncoder)
        clone.__dict__.update(self.__dict__)
        clone._theta = self._theta.copy()
        clone._bind_views()
        clone.tokenizer = self.tokenizer
        return clone

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        np.save(directory / "params.npy", self._theta)
        write_manifest(
            directory / "manifest.txt",
            {
                "kind": self.kind,
                "dim": self.dim,
                "vocab": f"hash:{self.buckets}",
                "max_len": self.max_len,
                "seed": self.seed,
                "init_gain": repr(self.init_gain),
                "param_scale": repr(self.param_scale),
            },
        )

    @classmethod
    def load(cls, directory: str | Path) -> TinyTestEncoder:
        directory = Path(directory)
        meta = read_manifest(directory / "manifest.txt")
        if meta.get("kind") != cls.kind:
            raise ValueError(f"{directory} holds a {meta.get('kind')!r} encoder, not {cls.kind!r}")
        vocab_kind, _, buckets = meta["vocab"].partition(":")
        if vocab_kind != "hash":
            raise ValueError(f"unsupported vocabulary spec {meta['vocab']!r}")
        enc = cls(
            dim=int(meta["dim"]),
            buckets=int(buckets),
            max_len=int(meta["max_len"]),
            seed=int(meta["seed"]),
            init_gain=float(meta.get("init_gain", 4.0)),
            param_scale=float(meta.get("param_scale", 30.0)),
        )
        enc.set_theta(np.load(directory / "params.npy"))
        return enc


def tokenize(text: str, tokenizer: HashTokenizer | None = None) -> list[int]:
    return (tokenizer or HashTokenizer()).tokenize(text)


def encode(encoder: SequenceEncoder, seq: TokenSequence) -> np.ndarray:
    if len(seq) > encoder.max_len:
        raise EncodingError(f"sequence of {len(seq)} tokens exceeds encoder limit {encoder.max_len}")
    return encoder.forward(seq)


def load_encoder(directory: str | Path) -> SequenceEncoder:
    """Load an encoder checkpoint directory, dispatching on its manifest ``kind``."""
    directory = Path(directory)
    kind = read_manifest(directory / "manifest.txt").get("kind")
    if kind == TinyTestEncoder.kind:
        return TinyTestEncoder.load(directory)
    if kind == "transformer":
        from .transformer_encoder import TransformerCrossEncoder

        return TransformerCrossEncoder.load(directory)
    raise ValueError(f"unknown encoder kind {kind!r} in {directory}")
