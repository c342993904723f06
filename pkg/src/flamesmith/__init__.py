"""flamesmith: derives provably correct array-reduction loops.

Given a pre/postcondition spec of a reduction over a vector, the engine
splits the postcondition, enumerates candidate loop invariants, fills the
eight-step derivation worksheet (classical indexed form and the index-free
partitioned form), discharges all proof obligations, executes the derived
algorithms against an independent oracle, and derives and proves closed-form
operation counts.
"""

__version__ = "0.1.0"
