
# coding: utf-8

# # Solver variants on the five-journal fixture
#
# The small fixture under tests/data is handy for seeing how the two switches
# (institution prestige on/off, outside citations in/out) move the scores.

# In[1]:

from pathlib import Path

import numpy as np

from repcite.ingest import load_graph, parse_ranking_file
from repcite.prestige import institution_prestige
from repcite.solver import SolverConfig, iterate, solve

FIXTURE = Path(__file__).resolve().parents[1] / "tests" / "data" / "five_journal"


# In[2]:

graph = load_graph(FIXTURE)
rankings = [parse_ranking_file(p) for p in sorted(FIXTURE.glob("rankings/*.csv"))]
table = institution_prestige(rankings, [i.id for i in graph.institutions])
table.scores


# Watch the first few iterations of the default configuration.

# In[3]:

for state, _ in zip(iterate(graph, table, SolverConfig()), range(4)):
    print(state.k, np.round(state.scores, 3))


# In[4]:

rows = []
for use_prestige in (True, False):
    for mode in ("exclude", "include"):
        res, _ = solve(graph, table, SolverConfig(use_institutional_prestige=use_prestige, exogenous_mode=mode))
        rows.append((use_prestige, mode, res.iteration_count, [round(res.scores[j], 3) for j in sorted(res.scores)]))
for r in rows:
    print(*r)


# Multiplying every prestige value by a constant leaves the excluded-mode
# scores untouched, because the rescale step absorbs it.

# In[5]:

base, _ = solve(graph, table, SolverConfig())
tripled, _ = solve(graph, table.scaled(3.0), SolverConfig())
ids = sorted(base.scores)
np.max(np.abs(base.as_array(ids) - tripled.as_array(ids)))
