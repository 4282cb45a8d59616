"""Walk an email from raw text to the padded embedding matrix.

Shows each stage of the text side of the pipeline: normalization
(placeholder rewrites, contraction expansion, lowercasing), whitespace
tokenization with truncation metadata, and the lookup against a .vec
table with padding mask and OOV accounting.

Run:  python3 demos/01_text_pipeline.py
"""

import numpy as np

from fusenet.embeddings import embed_sequence, random_table
from fusenet.textprep import normalize, tokenize

EMAILS = [
    "I’d like to pay off my loan early, before April 29, 2017 if possible.",
    "Why was I charged $1,234.56? Please call me at (415) 555-0134.",
    "Contact john.doe@gmail.com about the renewal offer!",
]

print("=== 1. Normalization ===")
for raw in EMAILS:
    print(f"  raw : {raw}")
    print(f"  norm: {normalize(raw)}")
    print()

print("=== 2. Tokenization (max_seq_len=8, truncation keeps the first tokens) ===")
norm = normalize(EMAILS[0])
seq = tokenize(norm, max_seq_len=8)
print(f"  tokens ({len(seq.tokens)} kept of {seq.original_len}): {seq.tokens}")
print()

print("=== 3. Embedding lookup ===")
# A tiny random table standing in for pre-trained vectors; real runs load
# a .vec file with fusenet.embeddings.load_vec_file.
vocab = sorted(set(seq.tokens) - {"loan"})  # drop one word to force an OOV
table = random_table(vocab, dim=4, seed=0)
embedded = embed_sequence(table, seq, max_seq_len=8)
print(f"  matrix shape: {embedded.vectors.shape}")
print(f"  mask:         {embedded.mask.astype(int)}")
print(f"  oov tokens:   {embedded.oov_count} (mapped to zero rows, mask stays true)")
print()
print("  row norms (padding rows are exactly zero):")
print(" ", np.linalg.norm(embedded.vectors, axis=1).round(3))
