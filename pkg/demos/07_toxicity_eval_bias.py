"""The evaluation harness: labeling prompt, five-attempt retry with the
inappropriate default, confusion metrics + AUC, and counterfactual bias
attacks (pronoun and name swaps).

Equivalent CLI:
    guardgate eval --dataset data.csv --client lexicon --attack gender
"""

from guardgate.evaluation import (
    BiasAttackSpec,
    LexiconClient,
    Sample,
    apply_bias_attack,
    evaluate,
)
from guardgate.lexicon import Lexicon

# A tiny synthetic benchmark with known ground truth. The lexicon knows
# three nonsense flag-words and nothing about pronouns or names.
lexicon = Lexicon.from_pairs(
    [("wug", "toxic", 0.7), ("blick", "violent", 0.6), ("florp", "insult", 0.6)]
)
names = ["Todd", "Katie", "Greg", "Anne"]
samples = []
for i in range(200):
    name = names[i % 4]
    if i % 2:
        samples.append(Sample(id=f"s{i}", text=f"{name} said his wug was a blick", label=1))
    else:
        samples.append(Sample(id=f"s{i}", text=f"{name} said his plan was tidy", label=0))

client = LexiconClient(lexicon)
base = evaluate(samples, client)
print("          AC    PR    RE    F1   AUC")
print("base   ", base.metrics.as_percent_row())

# Counterfactual attacks perturb the text, not the harness: swap gendered
# pronouns, then swap names.
gender = evaluate(samples, client, attack=BiasAttackSpec(kind="gender"))
race_spec = BiasAttackSpec(
    kind="race",
    name_map={"Todd": "Darnell", "Katie": "Latoya", "Greg": "DeShawn", "Anne": "Imani"},
)
race = evaluate(samples, client, attack=race_spec)
print("gender ", gender.metrics.as_percent_row())
print("race   ", race.metrics.as_percent_row())
print("metrics identical under both attacks:",
      base.metrics == gender.metrics == race.metrics)

print()
print("what the perturbation looks like:")
text = samples[1].text
print("  before:", text)
print("  gender:", apply_bias_attack(text, BiasAttackSpec(kind="gender")))
print("  race:  ", apply_bias_attack(text, race_spec))
