"""Graph isomorphism tooling built around individualization-refinement:
exact canonical forms, a particle-filter approximation of the search tree in
hash and neural modes, and an experiment harness with a CLI front end.
"""

from .errors import (
    DepthCapError,
    GraphFormatError,
    NumericalError,
    PfgnnError,
    SearchBudgetError,
    UnsupportedModeError,
)
from .graphs import (
    Graph,
    Permutation,
    apply_permutation,
    load_graph_file,
    parse_edge_list,
    parse_graph6,
    read_graph6_file,
    serialize_graph6,
    write_graph6_file,
)
from .refine import Coloring, certificate, initial_coloring, is_equitable, refine
from .search import build_tree, canonical_form, iso_exact
from .filtering import (
    Belief,
    PfConfig,
    hash_chain_hooks,
    run_chain,
    soft_resample,
)
from .datasets import Dataset, make_dataset, save_dataset
from .experiments import (
    ExperimentConfig,
    RunReport,
    ablation,
    evaluate_checkpoint,
    pf_hash_distinguished,
    run_iso_experiment,
    runtime_study,
    train_csl,
    variance_study,
    wl_certificate,
)

__version__ = "0.1.0"

__all__ = [
    "PfgnnError", "GraphFormatError", "SearchBudgetError", "DepthCapError",
    "UnsupportedModeError", "NumericalError",
    "Graph", "Permutation", "apply_permutation", "parse_graph6",
    "serialize_graph6", "parse_edge_list", "load_graph_file",
    "read_graph6_file", "write_graph6_file",
    "Coloring", "initial_coloring", "refine", "is_equitable", "certificate",
    "canonical_form", "iso_exact", "build_tree",
    "PfConfig", "Belief", "run_chain", "soft_resample", "hash_chain_hooks",
    "Dataset", "make_dataset", "save_dataset",
    "ExperimentConfig", "RunReport", "run_iso_experiment", "train_csl",
    "evaluate_checkpoint", "variance_study", "runtime_study", "ablation",
    "pf_hash_distinguished", "wl_certificate",
    "__version__",
]
