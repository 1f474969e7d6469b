"""Online caching with next-arrival predictions: policies, offline optimum,
adversarial inputs and empirical checks of their guarantees."""

from .adversary import AdversarialInstance, instance_stats, sample_omega
from .engine import ChainRecord, SimReport
from .opt import belady_cost, brute_force_opt, count_clean, opt_report
from .policies import (Kind, PolicySpec, simulate, simulate_combiner, verify_lemma_injection,
                       verify_lemma_totalerror)
from .trace import (NoiseModel, Trace, compute_phases, compute_true_next, l1_error,
                    noisy_predictions, perfect_predictions, read_trace, write_trace)

__version__ = "0.1.0"

__all__ = [
    "AdversarialInstance", "ChainRecord", "Kind", "NoiseModel", "PolicySpec", "SimReport",
    "Trace", "belady_cost", "brute_force_opt", "compute_phases", "compute_true_next",
    "count_clean", "instance_stats", "l1_error", "noisy_predictions", "opt_report",
    "perfect_predictions", "read_trace", "sample_omega", "simulate", "simulate_combiner",
    "verify_lemma_injection", "verify_lemma_totalerror", "write_trace",
]
