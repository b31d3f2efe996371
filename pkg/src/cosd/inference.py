"""Hybrid scoring of unseen texts, retrieval, and attention export.

The semantic score dots the target-attended text representation against the
trained label embeddings; the distributed score composes the text's topic
distribution with the trained topic embeddings, pushes both sides through
the graph-free transform, and takes a per-stance max over topics. Their sum
decides the label. Ablation modes zero one side.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import LABELS, Example, Stance
from .cpa import CpaCheckpoint, CpaWeights, infer_transform
from .topics import TopicModelTriple, dis_vector
from .training import EncoderStore, attention_weights, semantic_rep

MODES = ("full", "no_sem", "no_dis")


class InferenceError(Exception):
    """Missing records, invalid mode, or out-of-range retrieval."""


@dataclass
class ScoreBundle:
    """Scores in label order (Favor, None, Against); total = sem + dis."""

    sem: np.ndarray
    dis: np.ndarray
    total: np.ndarray
    predicted: Stance


def semantic_score(e_sem: np.ndarray, z_table: np.ndarray) -> np.ndarray:
    """Inner products against the three trained label embeddings."""
    e_sem = np.asarray(e_sem, dtype=np.float64).reshape(-1)
    z_table = np.asarray(z_table, dtype=np.float64)
    if z_table.shape != (3, e_sem.shape[0]):
        raise InferenceError(
            f"label table {z_table.shape} vs vector length {e_sem.shape[0]}")
    return z_table @ e_sem


def distributed_rep(dis: np.ndarray, u_table: np.ndarray) -> np.ndarray:
    """Topic-weighted mix of topic embeddings; dis must sum to 1."""
    dis = np.asarray(dis, dtype=np.float64).reshape(-1)
    u_table = np.asarray(u_table, dtype=np.float64)
    if u_table.shape[0] != dis.shape[0]:
        raise InferenceError(
            f"{dis.shape[0]} weights vs {u_table.shape[0]} topic rows")
    if abs(dis.sum() - 1.0) > 1e-6:
        raise InferenceError(f"topic distribution sums to {dis.sum():.6f}")
    return dis @ u_table


def distributed_score(dis: np.ndarray, u_table: np.ndarray,
                      weights: CpaWeights, slope: float = 0.01) -> np.ndarray:
    """Per stance block, max over its H topics of the transformed products."""
    e_dis = infer_transform(distributed_rep(dis, u_table), weights, slope)
    u_tilde = infer_transform(u_table, weights, slope)
    sims = u_tilde @ e_dis
    return sims.reshape(3, -1).max(axis=1)


def semantic_scores(e_sem_matrix: np.ndarray,
                    z_table: np.ndarray) -> np.ndarray:
    """(n, 3) semantic scores for stacked rows."""
    e = np.asarray(e_sem_matrix, dtype=np.float64)
    return e @ np.asarray(z_table, dtype=np.float64).T


def distributed_scores(dis_matrix: np.ndarray, u_table: np.ndarray,
                       weights: CpaWeights, slope: float = 0.01) -> np.ndarray:
    """(n, 3) distributed scores for stacked topic distributions."""
    dis_matrix = np.asarray(dis_matrix, dtype=np.float64)
    if dis_matrix.shape[0] == 0:
        return np.zeros((0, 3))
    reps = dis_matrix @ np.asarray(u_table, dtype=np.float64)
    e_tilde = infer_transform(reps, weights, slope)
    u_tilde = infer_transform(u_table, weights, slope)
    sims = e_tilde @ u_tilde.T
    return sims.reshape(len(dis_matrix), 3, -1).max(axis=2)


def zscore_rows(scores: np.ndarray) -> np.ndarray:
    """Standardize each row; a constant row becomes zeros."""
    mean = scores.mean(axis=1, keepdims=True)
    std = scores.std(axis=1, keepdims=True)
    return np.divide(scores - mean, std, out=np.zeros_like(scores),
                     where=std > 0)


def argmax_labels(total: np.ndarray) -> list[Stance]:
    """Row-wise argmax; ties break by label order Favor < None < Against."""
    return [LABELS[int(np.argmax(row))] for row in np.atleast_2d(total)]


def make_bundle(sem: np.ndarray, dis: np.ndarray, mode: str = "full",
                score_norm: bool = False) -> ScoreBundle:
    if mode not in MODES:
        raise InferenceError(f"unknown mode {mode!r}, expected one of {MODES}")
    sem = np.asarray(sem, dtype=np.float64).reshape(3)
    dis = np.asarray(dis, dtype=np.float64).reshape(3)
    if score_norm:
        sem = zscore_rows(sem[None])[0]
        dis = zscore_rows(dis[None])[0]
    if mode == "no_sem":
        sem = np.zeros(3)
    elif mode == "no_dis":
        dis = np.zeros(3)
    total = sem + dis
    return ScoreBundle(sem=sem, dis=dis, total=total,
                       predicted=argmax_labels(total)[0])


def predict(example: Example, store: EncoderStore, triple: TopicModelTriple,
            checkpoint: CpaCheckpoint, mode: str = "full",
            fold_in_sweeps: int = 50, seed: int = 0, slope: float = 0.01,
            score_norm: bool = False) -> ScoreBundle:
    """Score one example end to end against a frozen checkpoint."""
    if example.id not in store.tokens:
        raise InferenceError(f"no embedding record for example {example.id!r}")
    if example.target not in store.targets:
        raise InferenceError(f"no embedding record for target {example.target!r}")
    e_sem = semantic_rep(store.tokens[example.id],
                         store.targets[example.target])
    sem = semantic_score(e_sem, checkpoint.z)
    dist = dis_vector(triple, example.tokens, sweeps=fold_in_sweeps, seed=seed)
    dis = distributed_score(dist.values, checkpoint.u, checkpoint.weights(),
                            slope=slope)
    return make_bundle(sem, dis, mode=mode, score_norm=score_norm)


def final_train_reps(checkpoint: CpaCheckpoint, lap,
                     slope: float = 0.01) -> np.ndarray:
    """Propagated final representations of all graph nodes (no gradients)."""
    from .cpa import final_reps, propagate
    from .numerics import Tensor

    layers = propagate(Tensor(checkpoint.e0), lap, checkpoint.weights(),
                       slope=slope)
    return final_reps(Tensor(checkpoint.e0), layers).data


def top_k_similar(query_rep: np.ndarray, train_reps: np.ndarray,
                  train_ids: list[str], k: int,
                  exclude_id: str | None = None) -> list[tuple[str, float]]:
    """Cosine retrieval over training representations, descending.

    Zero-norm stored rows score 0; the query must be nonzero. exclude_id
    drops the query's own row when it is one of the stored texts.
    """
    query = np.asarray(query_rep, dtype=np.float64).reshape(-1)
    reps = np.asarray(train_reps, dtype=np.float64)
    if reps.shape[0] != len(train_ids):
        raise InferenceError(
            f"{reps.shape[0]} rep rows vs {len(train_ids)} ids")
    if reps.shape[1] != query.shape[0]:
        raise InferenceError("query/representation width mismatch")
    qn = np.linalg.norm(query)
    if qn == 0:
        raise InferenceError("zero-norm query")
    keep = [i for i, rec_id in enumerate(train_ids) if rec_id != exclude_id]
    if k < 1 or k > len(keep):
        raise InferenceError(f"k={k} out of range (1..{len(keep)})")
    norms = np.linalg.norm(reps[keep], axis=1)
    sims = np.divide(reps[keep] @ query, norms * qn,
                     out=np.zeros(len(keep)), where=norms > 0)
    order = np.argsort(-sims, kind="stable")[:k]
    return [(train_ids[keep[i]], float(sims[i])) for i in order]


def export_attention(example: Example, store: EncoderStore,
                     path: str | Path) -> None:
    """CSV of per-token attention weights (one row per token vector)."""
    if example.id not in store.tokens:
        raise InferenceError(f"no embedding record for example {example.id!r}")
    if example.target not in store.targets:
        raise InferenceError(f"no embedding record for target {example.target!r}")
    mat = store.tokens[example.id]
    weights = attention_weights(mat, store.targets[example.target])
    if len(example.tokens) == mat.shape[0]:
        names = list(example.tokens)
    else:
        # encoder token rows need not align with our word tokens
        names = [f"token_{i}" for i in range(mat.shape[0])]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["token", "attention_weight"])
        for name, w in zip(names, weights):
            writer.writerow([name, f"{w:.12f}"])
