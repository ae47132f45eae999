"""Guided sampling of discrete probabilistic programs, free-energy estimation
and importance-sampling lower bounds."""

from ._core import (
    Context,
    Dist,
    ExactFreeEnergy,
    FreeEnergyEstimate,
    Guide,
    GuideContext,
    GuideFamily,
    HypothesisEstimate,
    LowerBoundResult,
    Model,
    PathEnumeration,
    RunStopped,
    SearchReport,
    Site,
    Trace,
    VpiError,
    cli_main,
    enumerate_paths,
    estimate_free_energy,
    evidence_lower_bound,
    exact_conditional_expectation,
    exact_evidence,
    exact_free_energy,
    exact_guide_utility,
    guide_names,
    guide_utility,
    hypothesis_estimate,
    importance_weight,
    lower_confidence_bound,
    make_family,
    make_guide,
    make_model,
    mix,
    model_names,
    monkey_exact_evidence,
    one_run_free_energy,
    optimize_guide,
    run_trace,
    uniform_range,
)

__all__ = [name for name in dir() if not name.startswith("_")]
