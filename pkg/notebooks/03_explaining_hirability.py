# %% [markdown]
# # What drives the interview score?
#
# Annotation-level analyses on a synthetic dataset: which traits explain
# I linearly, what a shallow tree keys on, and which words separate
# Select from Reject transcripts.

# %%

from hirability.core import OCEAN, TRAITS
from hirability.explain import best_subset_curve, correlation_matrix, export_tree, top_informative_stems
from hirability.models import fit_cart, fit_nb
from hirability.pipeline import from_synthetic
from hirability.synth import generate, preset

data = generate(preset("default", n_samples=600, seed=1))
ocean, i = data.labels[:, 1:], data.labels[:, 0]

# %% [markdown]
# Best-subset in-sample R^2. The generator weights ES most heavily, so it
# should enter first.

# %%
for pt in best_subset_curve(ocean, i):
    print(f"k={pt.k}  R2={pt.r2:.3f}  {'+'.join(pt.subset)}")

# %% [markdown]
# A depth-2 regression tree on the same data.

# %%
tree = fit_cart(ocean, i, max_depth=2, feature_names=OCEAN)
print(export_tree(tree))

# %% [markdown]
# Correlations between the trait annotations themselves, with two-sided
# p-values at alpha = 0.05.

# %%
rep = correlation_matrix(ocean, i, feature_names=OCEAN, trait_names=("I",))
for name, r, p in zip(OCEAN, rep.r[:, 0], rep.p[:, 0]):
    print(f"{name:>2}  r={r: .3f}  p={p:.2g}")

# %% [markdown]
# Bernoulli naive Bayes on transcript stems, then the stems with the
# largest importance weights for conscientiousness. Negative weights lean
# toward the low-score class.

# %%
text = from_synthetic(data, "text")
tr = ~text.is_test
c = (text.labels[tr, TRAITS.index("C")] >= 0.5).astype(float)
nb = fit_nb((text.X[tr] > 0).astype(float), c)
for trait, rank, stem, w in top_informative_stems({"C": nb}, text.vocab, k=8):
    print(f"{rank:>2}. {stem:<10} {w: .2f}")
