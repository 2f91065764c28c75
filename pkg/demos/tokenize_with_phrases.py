"""
Mixed tokenization with a phrase table
======================================

A phrase table extends the static vocabulary for one input: every phrase
gets a global id just past the token ids, and the tokenizer greedily
prefers the longest phrase match at each position. Decoding maps each id
back through whichever side of the id space it came from, so the round
trip is exact.
"""

from dvagen import DocumentSet, PhraseTable, decode, encode, tokenize, train_static_vocab

corpus = DocumentSet.from_texts([
    "the cat sat on the mat",
    "the dog slept by the door",
    "a cat and a dog met on the mat",
    "the bird flew over the door",
])
vocab = train_static_vocab(corpus, target_size=64)
print("vocab size:", vocab.size)

# Two multi-word candidates. Each becomes one id at vocab.size + row.
table = PhraseTable.build(["on the mat", "the dog"], vocab)
for phrase in table.phrases:
    print(f"phrase id {table.global_id(phrase.surface)}: {phrase.surface!r}")

text = "the dog sat on the mat"
seq = encode(text, table, vocab)
print("ids:", list(seq.ids))
print("length with phrases:", seq.length, "| static length:", len(encode(text, PhraseTable.build([], vocab), vocab).ids))

# tokenize() keeps the segment structure; phrases arrive as single segments
for seg in tokenize(text, table, vocab):
    print(f"  {seg.kind:>6}  {seg.surface!r}")

roundtrip = decode(seq.ids, table, vocab)
assert roundtrip == text
print("round trip ok:", roundtrip)
