"""
Words, cones and one step of the walk
=====================================

Vertices of the free product are alternating words over the two factor
alphabets. This script builds a few words by hand and lists the one-step
distribution of the walk from them.
"""
# %%
from fprw import EMPTY, FreeWord, concat, graph_distance, in_cone, get_scenario, step_distribution, word_length

spec = get_scenario("group-z2z3").spec
print(spec.factor1.labels, spec.factor2.labels)

# a word is a tuple of (factor, letter) pairs, letters indexing non-root vertices;
# neighbouring letters must come from different factors
ab = FreeWord.of((1, 0), (2, 0))
print("ab =", ab, "length", word_length(ab), "type", ab.type)
print("graph distance of ab:", graph_distance(spec, ab))

# %%
# the cone of x holds every word with prefix x
aba = concat(ab, FreeWord.of((1, 0)))
print(in_cone(ab, aba), in_cone(aba, ab))

# %%
# stepping from ab: factor 1 appends or cancels an a, factor 2 moves the last letter
for outcome in step_distribution(spec, ab):
    print(f"{str(outcome.next):>8s}  {outcome.prob:.3f}")

# exact arithmetic is available for enumeration
print(step_distribution(spec, EMPTY, exact=True))
