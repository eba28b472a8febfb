# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
#       jupytext_version: 1.13.1
#   kernelspec:
#     display_name: Python 3 (ipykernel)
#     language: python
#     name: python3
# ---

# %% [markdown]
# This notebook shows how the blend weight `alpha` changes the similar-products list for one shopper, and how MAP@15 moves as we sweep it.
# There is also a script version of the sweep in `scripts/sweep.py`. Both utilize the same underlying logic in `src/modelling/model_utils.py`.
#
# We use a synthetic event log so that the notebook runs without any downloads. Every shopper has a planted taste over a handful of product styles, so we can check whether the personalized list leans towards that shopper's style.

# %% [markdown]
# # Imports

# %%
# %load_ext autoreload
# %autoreload 2

import sys

import pandas as pd

sys.path.append("../../")

from src.config.models import (
    BlendConfig,
    ExperimentConfig,
    SweepGrid,
    SynthConfig,
)
from src.data_processing import synthgen
from src.modelling import model_utils
from src.prediction import predict_utils

# %% [markdown]
# # Parameters

# %%
N_USERS = 1_000
N_ITEMS = 300
SEED = 7

config = ExperimentConfig.load(
    overrides={"seed": SEED, "out_dir": "../../data/notebook-artifacts"}
)

# %% [markdown]
# # Synthetic event log

# %%
events, oracle = synthgen.generate(
    SynthConfig(n_users=N_USERS, n_items=N_ITEMS, n_styles=6, seed=SEED)
)
print(f"{len(events):,} events, sparsity {synthgen.sparsity(events):.4f}")

# %% [markdown]
# # Build the artifacts

# %%
train_events, test_events, boundary = model_utils.split_for_evaluation(events, config)
artifacts = model_utils.build_artifacts(train_events, config)
model_utils.save_artifacts(artifacts, config)

# %% [markdown]
# # One shopper, several alphas

# %% [markdown]
# At `alpha=0` the list is the plain item-item similarity list. As `alpha` grows, products from the shopper's own style move up.

# %%
user = artifacts.matrix.user_ids[0]
item = artifacts.matrix.item_ids[0]
user_style = oracle.user_styles[oracle.user_ids.index(user)]
style_of = dict(zip(oracle.item_ids, oracle.item_styles))

lists = {}
for alpha in [0.0, 0.2, 0.5, 1.0]:
    recs = predict_utils.recommend(
        user, item, artifacts, BlendConfig(alpha=alpha, top_k=10)
    )
    recs["style"] = recs["item_id"].map(style_of)
    lists[alpha] = recs

print(f"user {user} has planted style {user_style}")
pd.concat({alpha: recs[["item_id", "style"]] for alpha, recs in lists.items()}, axis=1)

# %%
pd.Series(
    {alpha: (recs["style"] == user_style).mean() for alpha, recs in lists.items()},
    name="share of own style",
)

# %% [markdown]
# # Alpha sweep

# %%
grid = SweepGrid(dimension="Alpha", points=[0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0])
results = model_utils.run_sweep(grid, config, events=events)
results

# %%
results.set_index("alpha")[["map@15", "precision@15", "recall@15"]].round(4)
