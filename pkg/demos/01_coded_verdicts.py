"""Coded verdicts: the compact wire format for classifier output.

A verdict is an appropriate/inappropriate flag plus sixteen attribute
scores on a tenth grid. The coded form packs it into a handful of tokens:
flag word, then letter/value pairs (A..P, score x 10), zeros omitted.
"""

from guardgate import (
    AttributeScores,
    Verdict,
    decode_verdict,
    encode_verdict,
    parse_uncoded,
    render_uncoded,
)

# A question that lumps religious practitioners together: high on
# Religion & Belief, low side scores on several other attributes.
verdict = Verdict(
    flag="inappropriate",
    scores=AttributeScores.from_floats(
        {
            "derogatory": 0.2, "toxic": 0.2, "violent": 0.1, "insult": 0.1,
            "death_harm_tragedy": 0.1, "public_safety": 0.1,
            "religion_belief": 1.0, "war_conflict": 0.1, "politics": 0.2,
        }
    ),
)

coded = encode_verdict(verdict).text
uncoded = render_uncoded(verdict)
print("coded:  ", coded)
print("uncoded:", uncoded)
print(f"that's {len(coded)} chars coded vs {len(uncoded)} uncoded")

# The decoder inverts the encoder exactly...
assert decode_verdict(coded) == verdict

# ...and is lenient about what the model actually emits: stray whitespace,
# shuffled letters, explicit zeros.
messy = "true  K10 A2B2 C1E1G1I1M1N2"
print("messy decode ->", encode_verdict(decode_verdict(messy)).text)

# The uncoded JSON route tolerates surrounding prose, which models love
# to add.
wrapped = f"Sure! Here is my analysis: {uncoded} Hope that helps."
print("prose-wrapped parse ->", parse_uncoded(wrapped).flag)
