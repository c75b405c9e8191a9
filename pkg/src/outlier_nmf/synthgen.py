"""
Seeded generator of sparse count corpora with planted outlier documents.

Regular documents are multinomial draws from a Dirichlet mixture of
``n_topics`` topics whose vocabulary supports are disjoint. Outlier documents
are drawn from one extra topic. A fraction ``outlier_vocab_overlap`` of that
topic's support is taken from the vocabulary of one regular topic, with that
topic's relative word weights, and the rest from words no regular topic
uses. Raising the overlap makes outliers look more like the neighbor topic,
so it acts as a difficulty dial.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .corpus_io import as_term_doc


class InfeasibleConfig(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n_terms: int = 2000
    n_regular_docs: int = 475
    n_outliers: int = 25
    n_topics: int = 10
    doc_length_mean: int = 300
    outlier_vocab_overlap: float = 0.3
    seed: int = 0
    # Dirichlet concentration of per-document topic mixtures
    mixture_concentration: float = 0.05
    # gamma shape of the document-length mixture; larger is closer to Poisson
    length_shape: float = 4.0
    # exponents of the rank-frequency law inside regular and outlier topics
    zipf_exponent: float = 1.0
    outlier_zipf_exponent: float = 0.9

    def validate(self):
        for name in ("n_terms", "n_regular_docs", "n_topics", "doc_length_mean"):
            if getattr(self, name) < 1:
                raise InfeasibleConfig(f"{name} must be positive")
        if self.n_outliers < 0:
            raise InfeasibleConfig("n_outliers must be >= 0")
        if not 0.0 <= self.outlier_vocab_overlap <= 1.0:
            raise InfeasibleConfig("outlier_vocab_overlap must lie in [0, 1]")
        if self.n_topics > self.n_terms:
            raise InfeasibleConfig("n_topics exceeds n_terms")
        if self.support_size < 2:
            raise InfeasibleConfig(
                f"vocabulary of {self.n_terms} terms cannot hold {self.n_topics + 1} "
                f"topic supports of at least 2 terms")
        if self.mixture_concentration <= 0 or self.length_shape <= 0:
            raise InfeasibleConfig("mixture_concentration and length_shape must be > 0")

    @property
    def support_size(self):
        return self.n_terms // (self.n_topics + 1)

    @property
    def n_docs(self):
        return self.n_regular_docs + self.n_outliers


def _zipf_weights(size, exponent, rng):
    w = 1.0 / np.arange(1, size + 1) ** exponent
    return rng.permutation(w / w.sum())


def generate(cfg):
    """Draw a corpus and its labels.

    Returns
    -------
    A : scipy.sparse.csc_matrix, shape (n_terms, n_docs)
    labels : ndarray of int8
        1 marks planted outliers, aligned with the (shuffled) columns.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    m, K, s = cfg.n_terms, cfg.n_topics, cfg.support_size

    vocab = rng.permutation(m)
    supports = [vocab[k * s:(k + 1) * s] for k in range(K)]
    fresh = vocab[K * s:(K + 1) * s]
    n_shared = int(round(cfg.outlier_vocab_overlap * s))
    # shared words all come from one regular topic, a close neighbor class
    shared = rng.choice(supports[0], size=n_shared, replace=False)
    own = fresh[:s - n_shared]

    topics = np.zeros((K, m))
    for k, sup in enumerate(supports):
        topics[k, sup] = _zipf_weights(s, cfg.zipf_exponent, rng)
    # shared words keep the neighbor's relative weights and carry a share of
    # the outlier mass equal to their share of the outlier support
    outlier_topic = np.zeros(m)
    if n_shared:
        w = topics[0, shared]
        outlier_topic[shared] = (n_shared / s) * w / w.sum()
    if own.size:
        outlier_topic[own] = (own.size / s) * _zipf_weights(own.size, cfg.outlier_zipf_exponent,
                                                           rng)

    n = cfg.n_docs
    rate = rng.gamma(cfg.length_shape, cfg.doc_length_mean / cfg.length_shape, size=n)
    lengths = np.maximum(rng.poisson(rate), 1)

    cols = []
    for j in range(cfg.n_regular_docs):
        theta = rng.dirichlet(np.full(K, cfg.mixture_concentration))
        p = theta @ topics
        cols.append(rng.multinomial(lengths[j], p / p.sum()))
    for j in range(cfg.n_regular_docs, n):
        cols.append(rng.multinomial(lengths[j], outlier_topic))

    labels = np.zeros(n, dtype=np.int8)
    labels[cfg.n_regular_docs:] = 1
    order = rng.permutation(n)
    dense = np.stack(cols, axis=1)[:, order]
    labels = labels[order]
    return as_term_doc(sp.csc_matrix(dense), copy=False), labels
