"""Chunking: long inputs are split under a 3K-token budget and the
per-chunk verdicts fold into one conservative overall verdict."""

from guardgate import TokenizerPolicy, aggregate_verdicts, count_tokens, split_chunks
from guardgate.lexicon import score_text
from guardgate.service import default_lexicon

# A synthetic 6.5K-token document of uniform ten-token sentences.
sentence = "the class compared river maps from two different state atlases."
document = " ".join([sentence] * 650)
print("document tokens:", count_tokens(document))

policy = TokenizerPolicy(max_tokens=3000)
chunks = split_chunks(document, policy)
print("chunks:", [(c.index, c.token_count) for c in chunks])

# Score each chunk with the bundled lexicon and aggregate: the flag is
# sticky (any inappropriate chunk flags the whole text) and each attribute
# takes its maximum across chunks.
lexicon = default_lexicon()
spiked = document + " then a fight broke out near the gun display"
chunk_verdicts = [score_text(c.text, lexicon).verdict for c in split_chunks(spiked, policy)]
overall = aggregate_verdicts(chunk_verdicts)
print("per-chunk flags:", [v.flag for v in chunk_verdicts])
print("overall:", overall.flag, {k: v for k, v in overall.scores.as_dict().items() if v})
