"""Meta-feature engineering and text preprocessing."""

from revsent.features.embeddings import EmbeddingTable, load_embeddings, random_embeddings
from revsent.features.meta import (
    DEFAULT_DROP_LIST, LEAKING_FIELDS, MetaSchema, encode_meta, encode_meta_batch, fit_meta_schema,
)
from revsent.features.stemmer import stem
from revsent.features.text import (
    PAD, PAD_ID, UNK, UNK_ID, TokenizedReview, Vocabulary, classical_tokens, preprocess_text,
    split_sentences, stopwords, tokenize_review,
)
from revsent.features.tfidf import TfIdfModel, fit_tfidf, tfidf_vector

__all__ = [
    "DEFAULT_DROP_LIST", "EmbeddingTable", "LEAKING_FIELDS", "MetaSchema", "PAD", "PAD_ID",
    "TfIdfModel", "TokenizedReview", "UNK", "UNK_ID", "Vocabulary", "classical_tokens",
    "encode_meta", "encode_meta_batch", "fit_meta_schema", "fit_tfidf", "load_embeddings",
    "preprocess_text", "random_embeddings", "split_sentences", "stem", "stopwords", "tfidf_vector",
    "tokenize_review",
]
