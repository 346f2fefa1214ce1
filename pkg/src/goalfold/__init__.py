"""Workbench for a logic language with goals as arguments.

The package provides, in layers:

- `syntax`: terms/goals/clauses, typing, positions, parsing, printing
- `subst`: substitutions, unification, matching, answer-set comparisons
- `evaluate`: the deduction-tree evaluator and its unification variant
- `laws`: replacement laws, the equality-theory decision helper, and the
  empirical law checker
- `transform`: definition/unfold/fold/replacement steps, derivation scripts,
  admissibility and correctness classification
- `verify`: program-pair checks, step-count benchmarks, bundled corpus
- `cli`, `service`: command line and HTTP front ends
"""

__version__ = "0.1.0"
