"""Reverse-engineering workbench for transpiled variational quantum classifiers.

Pipeline: train a victim classifier (`qnn`), lower it to the
{id, x, sx, rz, cnot} basis on a linear coupling map (`transpiler`), recover
the original rotation ordering by signature lookup (`structlut`), then
recover the parameters either with a trained encoder/decoder network
(`neural` + `recovery`) or by exhaustive grid search, and score the copy
against the original (`recovery.evaluate`).
"""

__version__ = "0.1.0"

from . import circuit, kernels, neural, qnn, recovery, simulator, structlut, transpiler  # noqa: F401
