"""Per-stance LDA topic models and the 3H-dim implicit-topic distribution.

Three LDA models (favor / none / against training subsets, shared vocabulary,
H topics each) are fit by collapsed Gibbs sampling. Any text, train or test,
is folded in under all three models with counts frozen; the three length-H
posteriors concatenated and divided by 3 give its topic distribution, which
later doubles as text-to-topic edge weights.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from math import lgamma
from pathlib import Path

import numpy as np

from .corpus import Example, Vocabulary


class TopicsError(Exception):
    """Bad topic-model arguments or a corrupt model file."""


class GibbsLda:
    """Sequential collapsed Gibbs sampler over a fixed vocabulary.

    State lives in plain Python lists: at H <= 7 the per-token work is a
    handful of float ops, and array round-trips would dominate. Uniform
    draws are batched from one PCG64 stream per sampler, so runs are
    deterministic per seed.
    """

    def __init__(self, doc_ids: list[list[int]], h: int, alpha: float,
                 beta: float, vocab_size: int, seed: int):
        if h < 1:
            raise TopicsError(f"H must be >= 1, got {h}")
        if alpha < 0 or beta < 0:
            raise TopicsError(f"negative priors: alpha={alpha}, beta={beta}")
        self.h = h
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.vocab_size = vocab_size
        self.doc_ids = [list(ids) for ids in doc_ids]
        self.rng = np.random.default_rng(seed)

        self._n_dk = [[0.0] * h for _ in self.doc_ids]
        self._n_wk = [[0.0] * h for _ in range(vocab_size)]
        self._n_k = [0.0] * h
        self.assignments = []
        self.token_total = sum(len(ids) for ids in self.doc_ids)
        init = self.rng.integers(0, h, size=self.token_total).tolist()
        pos = 0
        for d, ids in enumerate(self.doc_ids):
            z_d = init[pos:pos + len(ids)]
            pos += len(ids)
            self.assignments.append(z_d)
            row = self._n_dk[d]
            for w, k in zip(ids, z_d):
                row[k] += 1.0
                self._n_wk[w][k] += 1.0
                self._n_k[k] += 1.0

    @property
    def n_k(self) -> np.ndarray:
        return np.array(self._n_k)

    def topic_word_array(self) -> np.ndarray:
        """(h, |V|) counts as an integer array."""
        if self.vocab_size == 0:
            return np.zeros((self.h, 0), dtype=np.int64)
        return np.rint(np.array(self._n_wk).T).astype(np.int64)

    def sweep(self) -> None:
        """One full Gibbs pass: resample every token's topic assignment."""
        h = self.h
        alpha, beta = self.alpha, self.beta
        beta_v = beta * self.vocab_size
        n_dk, n_wk, n_k = self._n_dk, self._n_wk, self._n_k
        uniforms = self.rng.random(self.token_total).tolist()
        probs = [0.0] * h
        pos = 0
        for d, ids in enumerate(self.doc_ids):
            z_d = self.assignments[d]
            row = n_dk[d]
            for j, w in enumerate(ids):
                k = z_d[j]
                wrow = n_wk[w]
                row[k] -= 1.0
                wrow[k] -= 1.0
                n_k[k] -= 1.0
                total = 0.0
                for t in range(h):
                    p = (row[t] + alpha) * (wrow[t] + beta) / (n_k[t] + beta_v)
                    probs[t] = p
                    total += p
                u = uniforms[pos]
                pos += 1
                if total <= 0.0:
                    k = int(u * h)
                else:
                    u *= total
                    acc = 0.0
                    for k in range(h):
                        acc += probs[k]
                        if u <= acc:
                            break
                z_d[j] = k
                row[k] += 1.0
                wrow[k] += 1.0
                n_k[k] += 1.0

    def log_joint(self) -> float:
        """Collapsed log p(w, z) up to assignment-independent constants."""
        beta, alpha = self.beta, self.alpha
        out = 0.0
        for k in range(self.h):
            out += sum(lgamma(wrow[k] + beta) for wrow in self._n_wk)
            out -= lgamma(self._n_k[k] + beta * self.vocab_size)
        for d, ids in enumerate(self.doc_ids):
            out += sum(lgamma(c + alpha) for c in self._n_dk[d])
            out -= lgamma(len(ids) + alpha * self.h)
        return out


@dataclass
class LdaModel:
    h: int
    alpha: float
    beta: float
    vocab: Vocabulary
    topic_word_counts: np.ndarray  # (h, |V|) int64
    topic_totals: np.ndarray       # (h,) int64
    trained_sweeps: int

    def __post_init__(self):
        if self.h < 1:
            raise TopicsError(f"H must be >= 1, got {self.h}")
        if self.alpha < 0 or self.beta < 0:
            raise TopicsError("negative priors")
        if self.topic_word_counts.shape != (self.h, len(self.vocab)):
            raise TopicsError("topic_word_counts shape mismatch")
        if (self.topic_word_counts < 0).any():
            raise TopicsError("negative counts")
        if not np.array_equal(self.topic_totals,
                              self.topic_word_counts.sum(axis=1)):
            raise TopicsError("topic_totals do not match counts")

    def phi(self) -> np.ndarray:
        """Smoothed topic-word distributions, (h, |V|); rows sum to 1."""
        v = len(self.vocab)
        if v == 0:
            return np.zeros((self.h, 0))
        counts = self.topic_word_counts.astype(np.float64)
        return (counts + self.beta) / (self.topic_totals[:, None] + self.beta * v)

    def top_words(self, n: int) -> list[list[str]]:
        phi = self.phi()
        out = []
        for k in range(self.h):
            order = np.argsort(-phi[k], kind="stable")[: min(n, len(self.vocab))]
            out.append([self.vocab.tokens[int(w)] for w in order])
        return out


@dataclass
class TopicModelTriple:
    favor: LdaModel
    none: LdaModel
    against: LdaModel

    def __post_init__(self):
        models = (self.favor, self.none, self.against)
        if len({m.h for m in models}) != 1:
            raise TopicsError("triple models disagree on H")
        if any(m.vocab.tokens != self.favor.vocab.tokens for m in models):
            raise TopicsError("triple models disagree on vocabulary")

    @property
    def h(self) -> int:
        return self.favor.h

    @property
    def models(self) -> tuple[LdaModel, LdaModel, LdaModel]:
        return (self.favor, self.none, self.against)


@dataclass
class TopicDistribution:
    """Length-3H probability vector [f_1..f_H, n_1..n_H, a_1..a_H]."""

    values: np.ndarray
    h: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (3 * self.h,):
            raise TopicsError("distribution length != 3H")
        if (self.values < -1e-12).any():
            raise TopicsError("negative probability entry")
        if abs(self.values.sum() - 1.0) > 1e-9:
            raise TopicsError("distribution does not sum to 1")

    def block(self, i: int) -> np.ndarray:
        return self.values[i * self.h:(i + 1) * self.h]


def _doc_token_ids(docs: list[list[str]], vocab: Vocabulary) -> list[list[int]]:
    index = vocab.index
    return [[index[t] for t in doc if t in index] for doc in docs]


def fit_lda(docs: list[list[str]], h: int, alpha: float | None = None,
            beta: float = 0.01, sweeps: int = 500, seed: int = 0,
            vocab: Vocabulary | None = None,
            sweep_callback=None) -> LdaModel:
    """Fit one LDA model by collapsed Gibbs sampling.

    docs are token lists. With vocab=None the vocabulary is built from docs;
    passing a vocabulary lets several models share one (required inside a
    triple). alpha defaults to 50/H, beta to 0.01. Deterministic per seed.
    An empty doc list yields a prior-only model. sweep_callback, when given,
    is called as sweep_callback(sweep_index, topic_totals_copy) after every
    sweep (diagnostics only).
    """
    if h < 1:
        raise TopicsError(f"H must be >= 1, got {h}")
    if sweeps < 1:
        raise TopicsError(f"sweeps must be >= 1, got {sweeps}")
    if alpha is None:
        alpha = 50.0 / h
    if vocab is None:
        vocab = Vocabulary.from_docs(docs)
    sampler = GibbsLda(_doc_token_ids(docs, vocab), h, alpha, beta,
                       len(vocab), seed)
    for s in range(sweeps):
        sampler.sweep()
        if sweep_callback is not None:
            sweep_callback(s, sampler.n_k)
    counts = sampler.topic_word_array()
    return LdaModel(
        h=h, alpha=float(alpha), beta=float(beta), vocab=vocab,
        topic_word_counts=counts, topic_totals=counts.sum(axis=1),
        trained_sweeps=sweeps,
    )


def fit_triple(favor_docs: list[list[str]], none_docs: list[list[str]],
               against_docs: list[list[str]], h: int,
               alpha: float | None = None, beta: float = 0.01,
               sweeps: int = 500, seed: int = 0) -> TopicModelTriple:
    """Fit the three per-stance models over one shared vocabulary."""
    vocab = Vocabulary.from_docs(favor_docs + none_docs + against_docs)
    favor, none, against = (
        fit_lda(docs, h, alpha, beta, sweeps, seed + offset, vocab=vocab)
        for offset, docs in enumerate((favor_docs, none_docs, against_docs))
    )
    return TopicModelTriple(favor=favor, none=none, against=against)


def doc_topic_posterior(model: LdaModel, tokens, sweeps: int = 50,
                        seed: int = 0) -> np.ndarray:
    """Fold-in posterior over the model's H topics; sums to 1.

    Topic-word counts stay frozen; only the doc-local topic counts move.
    Empty or fully out-of-vocabulary docs return the uniform prior.
    """
    index = model.vocab.index
    ids = [index[t] for t in tokens if t in index]
    h = model.h
    if len(ids) == 0 or h == 1:
        return np.full(h, 1.0 / h)
    rng = np.random.default_rng(seed)
    alpha = model.alpha
    denom = model.topic_totals + model.beta * len(model.vocab)
    # counts are frozen, so the word factor of the conditional is a constant
    # per distinct word; precompute it once per token position
    factor = {}
    for w in set(ids):
        factor[w] = ((model.topic_word_counts[:, w] + model.beta)
                     / denom).tolist()
    pos_factor = [factor[w] for w in ids]
    z = rng.integers(0, h, size=len(ids)).tolist()
    local = [0.0] * h
    for k in z:
        local[k] += 1.0
    uniforms = rng.random(sweeps * len(ids)).tolist()
    probs = [0.0] * h
    pos = 0
    for _ in range(sweeps):
        for j, fw in enumerate(pos_factor):
            local[z[j]] -= 1.0
            total = 0.0
            for t in range(h):
                p = (local[t] + alpha) * fw[t]
                probs[t] = p
                total += p
            u = uniforms[pos]
            pos += 1
            if total <= 0.0:
                k = int(u * h)
            else:
                u *= total
                acc = 0.0
                for k in range(h):
                    acc += probs[k]
                    if u <= acc:
                        break
            z[j] = k
            local[k] += 1.0
    return (np.array(local) + alpha) / (len(ids) + h * alpha)


def dis_vector(triple: TopicModelTriple, tokens, sweeps: int = 50,
               seed: int = 0) -> TopicDistribution:
    """Concatenate the three fold-in posteriors and divide by 3."""
    parts = [
        doc_topic_posterior(m, tokens, sweeps=sweeps, seed=seed)
        for m in triple.models
    ]
    return TopicDistribution(values=np.concatenate(parts) / 3.0, h=triple.h)


def perplexity(model: LdaModel, docs: list[list[str]], sweeps: int = 50,
               seed: int = 0) -> float:
    """exp(-mean log p(w|d)) with p(w|d) = sum_h theta_dh phi_hw.

    theta comes from fold-in, phi from the smoothed trained counts. Docs with
    no in-vocabulary tokens are skipped; raises if nothing is left.
    """
    phi = model.phi()
    index = model.vocab.index
    log_lik = 0.0
    total = 0
    for i, doc in enumerate(docs):
        ids = np.array([index[t] for t in doc if t in index], dtype=np.int64)
        if len(ids) == 0:
            continue
        theta = doc_topic_posterior(model, doc, sweeps=sweeps, seed=seed + i)
        p = theta @ phi[:, ids]
        log_lik += float(np.log(p).sum())
        total += len(ids)
    if total == 0:
        raise TopicsError("perplexity undefined: zero in-vocabulary tokens")
    return float(np.exp(-log_lik / total))


def umass_coherence(model: LdaModel, docs: list[list[str]],
                    top_n: int) -> float:
    """Mean over topics of sum_{i<j} log((D(w_i,w_j)+1)/D(w_j)).

    D counts document co-occurrence over docs. Pairs whose denominator word
    never occurs are skipped (possible on tiny corpora where top words are
    pure smoothing artifacts).
    """
    if top_n < 2:
        raise TopicsError(f"top_n must be >= 2, got {top_n}")
    index = model.vocab.index
    doc_sets = [frozenset(index[t] for t in doc if t in index) for doc in docs]
    tops = model.top_words(top_n)
    score = 0.0
    for words in tops:
        ids = [index[w] for w in words]
        topic_score = 0.0
        for a in range(len(ids)):
            for b in range(a + 1, len(ids)):
                d_j = sum(1 for s in doc_sets if ids[b] in s)
                if d_j == 0:
                    continue
                d_ij = sum(1 for s in doc_sets if ids[a] in s and ids[b] in s)
                topic_score += np.log((d_ij + 1.0) / d_j)
        score += topic_score
    return float(score / model.h)


# --- serialization --------------------------------------------------------
#
# LDA1 layout, little-endian:
#   magic "LDA1" | u32 H | u32 |V| | f64 alpha | f64 beta | u32 sweeps
#   | i64 counts (H x |V|, row-major)
#   | per vocab token: u32 byte length, UTF-8 bytes, u32 doc frequency
# A JSON sidecar (<path>.json) lists the top-10 words per topic.

_LDA_MAGIC = b"LDA1"


def save_lda(model: LdaModel, path: str | Path, sidecar: bool = True) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_LDA_MAGIC)
        fh.write(struct.pack("<II", model.h, len(model.vocab)))
        fh.write(struct.pack("<dd", model.alpha, model.beta))
        fh.write(struct.pack("<I", model.trained_sweeps))
        fh.write(model.topic_word_counts.astype("<i8").tobytes(order="C"))
        for tok, freq in zip(model.vocab.tokens, model.vocab.doc_freq):
            raw = tok.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", freq))
    if sidecar:
        doc = {
            "h": model.h, "alpha": model.alpha, "beta": model.beta,
            "trained_sweeps": model.trained_sweeps,
            "top_words": model.top_words(10),
        }
        with open(f"{path}.json", "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_lda(path: str | Path) -> LdaModel:
    path = Path(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _LDA_MAGIC:
        raise TopicsError(f"{path}: bad magic, not an LDA1 file")
    off = 4
    h, v = struct.unpack_from("<II", data, off)
    off += 8
    alpha, beta = struct.unpack_from("<dd", data, off)
    off += 16
    (sweeps,) = struct.unpack_from("<I", data, off)
    off += 4
    counts = np.frombuffer(data, dtype="<i8", count=h * v, offset=off)
    counts = counts.reshape(h, v).astype(np.int64)
    off += 8 * h * v
    tokens = []
    freqs = []
    for _ in range(v):
        (n,) = struct.unpack_from("<I", data, off)
        off += 4
        tokens.append(data[off:off + n].decode("utf-8"))
        off += n
        (freq,) = struct.unpack_from("<I", data, off)
        off += 4
        freqs.append(freq)
    if off != len(data):
        raise TopicsError(f"{path}: trailing bytes, file corrupt")
    vocab = Vocabulary(tokens=tokens,
                       index={t: i for i, t in enumerate(tokens)},
                       doc_freq=freqs)
    return LdaModel(h=h, alpha=alpha, beta=beta, vocab=vocab,
                    topic_word_counts=counts, topic_totals=counts.sum(axis=1),
                    trained_sweeps=sweeps)


def token_docs(examples: list[Example]) -> list[list[str]]:
    """Token lists for a list of examples (LDA input shape)."""
    return [list(ex.tokens) for ex in examples]
