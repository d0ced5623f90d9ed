"""Mechanical reproduction of the growth counterexample: a boundary gain
with scaled-2-norm index below 1 whose C^1 norms nevertheless grow."""

from .backward import InitialData, backward_initial_data, counterexample_system
from .certificate import (CertificateArtifacts, GrowthCertificate,
                          PropagationResult, mismatch_scaling, propagate_tree,
                          run_certificate, tree_to_csv)
from .config import CounterexampleConfig, build_config
from .trace import (BumpTrace, ConsistentTrace, SynthesisReport, TraceKernels,
                    synthesize_trace)
from .tree import (DistinctnessReport, SeedTable, TimeTree, TreeNode,
                   build_time_tree, dv_recursion, enumerate_words_bruteforce,
                   seed_points, st_recursion, st_value, verify_distinct)

__all__ = [
    "CounterexampleConfig", "build_config",
    "SeedTable", "seed_points", "st_recursion", "st_value",
    "TimeTree", "TreeNode", "build_time_tree", "verify_distinct",
    "dv_recursion", "DistinctnessReport", "enumerate_words_bruteforce",
    "BumpTrace", "ConsistentTrace", "TraceKernels", "SynthesisReport",
    "synthesize_trace",
    "InitialData", "backward_initial_data", "counterexample_system",
    "PropagationResult", "propagate_tree", "GrowthCertificate",
    "CertificateArtifacts", "run_certificate", "mismatch_scaling",
    "tree_to_csv",
]
