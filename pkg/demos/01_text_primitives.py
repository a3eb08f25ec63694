"""Text primitives: tokenization, n-grams, length statistics, keywords.

Run from the repository root:

    python demos/01_text_primitives.py
"""

from pathlib import Path

from coda import HashedTfidfEmbedder, extract_lexical, extract_ngrams, length_stats, load_dataset, tokenize
from coda.constraints import extract_length

DATA = Path(__file__).parent / "data" / "demo_news.jsonl"

# Tokenization splits on whitespace, then peels punctuation off the chunk
# edges. Internal periods survive, so abbreviations stay whole.
sentence = "Shops in most malls advertise for Christmas help up to the last minute."
seq = tokenize(sentence)
print("tokens:", seq.surfaces())
print("word count (punctuation excluded):", seq.word_count)
print()

# Keyword candidates are every contiguous 1-3 gram that contains no
# punctuation token and at least one non-stopword.
ngrams = extract_ngrams(seq)
print(f"{len(ngrams)} n-gram candidates; first ten:")
print([n.surface for n in ngrams[:10]])
print()

# Corpus length statistics feed the per-document length windows.
dataset = load_dataset(DATA, "jsonl", "classification")
stats = length_stats(dataset)
print(f"corpus of {len(dataset)} docs: mean length {stats.mean:.2f}, sd {stats.sd:.2f}")

doc = dataset.documents[0]
window = extract_length(doc, stats)
print(f"document {doc.id!r} ({tokenize(doc.text).word_count} words) gets window "
      f"[{window.lower}, {window.upper}]")
print()

# Keywords are ranked by cosine similarity between each n-gram's embedding
# and the whole document's. The offline embedder is hashed TF-IDF, so the
# demo is deterministic and needs no network.
embedder = HashedTfidfEmbedder().fit(d.text for d in dataset)
lexical = extract_lexical(doc, 4, embedder)
print("document:", doc.text)
print("top keywords:", [group.head for group in lexical.include])
